#pragma once

// Preconditioned L-BFGS and a PHR augmented-Lagrangian driver.
//
// Objectives have the signature double(const Vector& x, Vector& grad) and
// may return +inf outside their domain; the line search backs off from
// such points. Gradient norms are dual norms sqrt(g^T K^{-1} g).

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>

#include "plap/linalg.hpp"

namespace plap {

using Objective = std::function<double(const Vector&, Vector&)>;

struct MinimizeOptions {
  double gtol = 1e-10;  // stop once ||g||_* <= gtol
  int max_iter = 20000;
  int memory = 10;
  double armijo = 1e-4;
  /// Upper bound on the K-norm of a trial step, relative to ||x||_K
  /// (0 disables). Keeps 0-homogeneous objectives from wild jumps.
  double max_relative_step = 0.5;
};

struct MinimizeResult {
  Vector x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
};

inline MinimizeResult lbfgs(const Objective& obj, Vector x, const StiffnessPreconditioner& P,
                            const MinimizeOptions& opt = {}) {
  MinimizeResult res;
  Vector g(x.size());
  double f = obj(x, g);
  if (!std::isfinite(f)) {
    res.x = std::move(x);
    res.f = f;
    res.status = "initial point outside domain";
    return res;
  }
  std::deque<Vector> S, Y;
  std::deque<double> rho;
  double gn = P.dual_norm(g);
  int stalls = 0;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    if (gn <= opt.gtol) {
      res.converged = true;
      res.status = "converged";
      break;
    }
    // two-loop recursion with H0 = scale * K^{-1}
    Vector q = g;
    std::vector<double> alpha(S.size());
    for (int k = static_cast<int>(S.size()) - 1; k >= 0; --k) {
      alpha[k] = rho[k] * S[k].dot(q);
      q -= alpha[k] * Y[k];
    }
    Vector r = P.apply(q);
    if (!S.empty()) {
      const Vector Ky = P.apply(Y.back());
      const double yKy = Y.back().dot(Ky);
      if (yKy > 0.0) r *= S.back().dot(Y.back()) / yKy;
    }
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double beta = rho[k] * Y[k].dot(r);
      r += (alpha[k] - beta) * S[k];
    }
    Vector d = -r;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      S.clear(), Y.clear(), rho.clear();
      d = -P.apply(g);
      slope = g.dot(d);
    }
    double step = 1.0;
    if (opt.max_relative_step > 0.0) {
      const double xn = P.energy_norm(x), dn = P.energy_norm(d);
      if (xn > 0.0 && dn * step > opt.max_relative_step * xn) step = opt.max_relative_step * xn / dn;
    }
    Vector xn, gnew(x.size());
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * d;
      fn = obj(xn, gnew);
      if (std::isfinite(fn) && fn <= f + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= std::isfinite(fn) ? 0.5 : 0.25;
    }
    if (!accepted) {
      if (!S.empty()) {  // retry once along the preconditioned gradient
        S.clear(), Y.clear(), rho.clear();
        if (++stalls < 3) continue;
      }
      res.status = "line search failed";
      break;
    }
    const Vector s = xn - x;
    const Vector y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-14 * std::sqrt(s.squaredNorm() * y.squaredNorm()) && sy > 0.0) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opt.memory) S.pop_front(), Y.pop_front(), rho.pop_front();
    }
    const double df = f - fn;
    x = std::move(xn);
    g = gnew;
    f = fn;
    gn = P.dual_norm(g);
    if (df <= 1e-16 * std::abs(f)) {
      if (++stalls >= 8) {
        res.status = "no further decrease";
        ++it;
        break;
      }
    } else {
      stalls = 0;
    }
  }
  if (it >= opt.max_iter && res.status.empty()) res.status = "iteration limit";
  if (gn <= opt.gtol) {
    res.converged = true;
    res.status = "converged";
  }
  res.x = std::move(x);
  res.f = f;
  res.grad_norm = gn;
  res.iterations = it;
  return res;
}

enum class ConstraintKind { inequality, equality };  // c(x) <= 0 or c(x) = 0

struct AugmentedLagrangianOptions {
  MinimizeOptions inner;
  double rho0 = 10.0;
  double rho_growth = 4.0;
  double max_rho = 1e12;
  double ctol = 1e-11;  // feasibility tolerance on |c| (or max(c, -nu/rho))
  int max_outer = 60;
  /// Called on the iterate after every outer iteration (normalization,
  /// absolute value, ...). Must preserve c and f for 0-homogeneous data.
  std::function<Vector(const Vector&)> post_outer;
};

struct AugmentedLagrangianResult {
  Vector x;
  double f = 0.0;          // objective (without penalty) at x
  double constraint = 0.0; // c(x)
  double multiplier = 0.0;
  double grad_norm = 0.0;  // ||grad of Lagrangian||_* at exit
  int outer = 0;
  int inner_iterations = 0;
  bool converged = false;
  std::string status;
};

inline AugmentedLagrangianResult augmented_lagrangian(const Objective& f, const Objective& c, ConstraintKind kind,
                                                      Vector x, const StiffnessPreconditioner& P,
                                                      const AugmentedLagrangianOptions& opt, double nu0 = 0.0) {
  AugmentedLagrangianResult res;
  double nu = nu0, rho = opt.rho0;
  double last_violation = std::numeric_limits<double>::infinity();
  Vector gc(x.size()), gf(x.size());
  const bool ineq = kind == ConstraintKind::inequality;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    const double nu_k = nu, rho_k = rho;
    Objective lag = [&](const Vector& z, Vector& g) {
      const double fv = f(z, g);
      if (!std::isfinite(fv)) return fv;
      const double cv = c(z, gc);
      if (!std::isfinite(cv)) return cv;
      if (ineq) {
        const double t = std::max(0.0, nu_k + rho_k * cv);
        g += t * gc;
        return fv + (t * t - nu_k * nu_k) / (2.0 * rho_k);
      }
      g += (-nu_k + rho_k * cv) * gc;
      return fv - nu_k * cv + 0.5 * rho_k * cv * cv;
    };
    const MinimizeResult mr = lbfgs(lag, x, P, opt.inner);
    res.inner_iterations += mr.iterations;
    res.grad_norm = mr.grad_norm;
    x = opt.post_outer ? opt.post_outer(mr.x) : mr.x;
    const double cv = c(x, gc);
    double violation;
    if (ineq) {
      nu = std::max(0.0, nu + rho * cv);
      violation = std::abs(std::max(cv, -nu / rho));
    } else {
      nu = nu - rho * cv;
      violation = std::abs(cv);
    }
    res.outer = outer + 1;
    const bool inner_ok = mr.converged || mr.grad_norm <= 10.0 * opt.inner.gtol;
    if (violation <= opt.ctol && inner_ok) {
      res.converged = true;
      res.status = "converged";
      break;
    }
    if (!std::isfinite(cv)) {
      res.status = "constraint not finite";
      break;
    }
    if (violation > opt.ctol && violation > 0.25 * last_violation) rho = std::min(rho * opt.rho_growth, opt.max_rho);
    last_violation = violation;
    res.status = mr.status;
  }
  if (!res.converged && res.status.empty()) res.status = "outer iteration limit";
  res.x = x;
  res.f = f(x, gf);
  res.constraint = c(x, gc);
  res.multiplier = nu;
  return res;
}

}  // namespace plap
