#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "plap/functionals.hpp"

namespace plap {

struct NewtonOptions {
  double tol = 1e-12;  // relative: ||Phi'(u)||_* <= tol * max(1, ||u||_K)
  int max_iter = 50;
};

struct NewtonResult {
  Vector u;
  double residual = 0.0;          // ||Phi'(u)||_*
  double initial_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
  std::vector<double> history;    // residual after each accepted step, starting with the initial one
};

/// Damped Newton on Phi_lambda' = 0 with the pivoted tridiagonal Hessian and
/// backtracking on the residual.
inline NewtonResult newton_polish(const ProblemSpec& s, double lambda, Vector u, const NewtonOptions& opt = {}) {
  const auto& P = s.preconditioner();
  NewtonResult res;
  Vector r;
  detail::energy(s, u, lambda, &r);
  double rn = P.dual_norm(r);
  res.initial_residual = rn;
  res.history.push_back(rn);
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const double target = opt.tol * std::max(1.0, P.energy_norm(u));
    if (rn <= target) {
      res.converged = true;
      break;
    }
    Vector du;
    try {
      du = solve_tridiagonal(energy_hessian(s, u, lambda), -r);
    } catch (const ConvergenceError&) {
      res.status = "singular Hessian";
      break;
    }
    if (!du.allFinite()) {
      res.status = "singular Hessian";
      break;
    }
    double step = 1.0;
    bool ok = false;
    for (int ls = 0; ls < 40; ++ls) {
      Vector un = u + step * du, rr;
      detail::energy(s, un, lambda, &rr);
      const double nn = P.dual_norm(rr);
      if (std::isfinite(nn) && nn < rn) {
        u = std::move(un), r = std::move(rr), rn = nn, ok = true;
        res.history.push_back(rn);
        break;
      }
      step *= 0.5;
    }
    if (!ok) {
      res.status = "no residual decrease";
      break;
    }
  }
  if (rn <= opt.tol * std::max(1.0, P.energy_norm(u))) res.converged = true;
  if (res.converged) res.status = "converged";
  else if (res.status.empty()) res.status = "iteration limit";
  res.u = std::move(u);
  res.residual = rn;
  res.iterations = it;
  return res;
}

}  // namespace plap
