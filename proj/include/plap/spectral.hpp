#pragma once

// First Dirichlet eigenpair of -Delta_p on subdomains and the extreme value
//   lambda* = inf { int|u'|^p / int|u|^p : int f|u|^gamma >= 0 }.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "plap/functionals.hpp"
#include "plap/newton.hpp"
#include "plap/optimize.hpp"
#include "plap/rng.hpp"

namespace plap {

struct EigenOptions {
  double tol = 1e-10;  // relative: ||grad R||_* <= tol * R
  int max_iter = 50000;
  std::uint64_t seed = 1;
};

struct EigenResult {
  double lambda1 = 0.0;
  NodalFunction phi1;  // ||phi1||_p = 1, positive on the subdomain
  int iterations = 0;
  double residual = 0.0;  // ||G' - lambda1 L'||_* / ||G'||_*
  Interval support{};     // component that attains the minimum
};

namespace detail {

inline std::vector<bool> interior_mask(const Mesh& m, const Interval& iv) {
  std::vector<bool> mask(static_cast<std::size_t>(m.interior_nodes()), false);
  const double slack = 1e-9 * m.h();
  for (int i = 1; i < m.elements(); ++i) {
    const double x = m.node(i);
    if (x > iv.lo + slack && x < iv.hi - slack) mask[static_cast<std::size_t>(i - 1)] = true;
  }
  return mask;
}

inline EigenResult eigen_on_interval(const ProblemSpec& s, const Interval& iv, const EigenOptions& opt) {
  const Mesh& m = s.mesh();
  if (iv.length() < 2.0 * m.h() * (1.0 - 1e-9))
    throw InvalidArgument("subdomain-too-small: interval (" + num(iv.lo) + ", " + num(iv.hi) +
                          ") spans fewer than 2 elements");
  const auto mask = interior_mask(m, iv);
  const StiffnessPreconditioner P(m, mask);
  Rng rng(opt.seed);
  Vector v = Vector::Zero(m.interior_nodes());
  for (int i = 0; i < v.size(); ++i) {
    if (!mask[i]) continue;
    const double t = (m.node(i + 1) - iv.lo) / iv.length();
    v[i] = std::sin(std::numbers::pi * t) * (1.0 + 0.1 * t * (1.0 - t) * rng.uniform(-1.0, 1.0));
  }
  v = normalize_lp(s, v);
  Objective obj = [&](const Vector& x, Vector& g) { return rayleigh(s, x, &g); };
  MinimizeOptions mo;
  mo.max_iter = opt.max_iter;
  Vector gtmp;
  mo.gtol = opt.tol * rayleigh(s, v, &gtmp);
  MinimizeResult r = lbfgs(obj, v, P, mo);
  int iters = r.iterations;
  // |v| has no larger quotient; restart from it so the minimizer is signed.
  Vector va = normalize_lp(s, r.x.cwiseAbs());
  mo.gtol = opt.tol * r.f;
  r = lbfgs(obj, va, P, mo);
  iters += r.iterations;
  if (!r.converged && r.grad_norm > 100.0 * mo.gtol)
    throw ConvergenceError("first_eigenpair: no convergence after " + std::to_string(iters) +
                           " iterations (||grad R||_* = " + num(r.grad_norm) + ")");
  Vector phi = normalize_lp(s, r.x.cwiseAbs());
  MomentGradients g;
  const Moments mm = moments(s, phi, &g);
  const double lam = mm.G / mm.L;
  Vector res = g.G - lam * g.L;
  const double denom = P.dual_norm(g.G);
  return {lam, NodalFunction(s.mesh_ptr(), phi), iters, denom > 0 ? P.dual_norm(res) / denom : 0.0, iv};
}

}  // namespace detail

/// Minimizes the Rayleigh quotient over functions supported in `subdomain`
/// (whole domain when empty). For a disconnected subdomain the smallest
/// component eigenvalue is returned.
inline EigenResult first_eigenpair(const ProblemSpec& s, const IntervalList& subdomain = {},
                                   const EigenOptions& opt = {}) {
  IntervalList comps = subdomain.empty() ? IntervalList{{s.mesh().a(), s.mesh().b()}} : merge_intervals(subdomain);
  std::optional<EigenResult> best;
  for (const auto& iv : comps) {
    EigenResult r = detail::eigen_on_interval(s, iv, opt);
    if (!best || r.lambda1 < best->lambda1) best = std::move(r);
  }
  return std::move(*best);
}

enum class F1Status { satisfied, violated, vacuous };

inline const char* to_string(F1Status s) {
  switch (s) {
    case F1Status::satisfied: return "satisfied";
    case F1Status::violated: return "violated";
    default: return "vacuous";
  }
}

struct F1Check {
  F1Status status = F1Status::vacuous;
  double lambda_zero_plus = 0.0;  // lambda1(int(zero u plus))
  double lambda_zero = 0.0;       // lambda1(int(zero))
  double margin = 0.0;            // lambda_zero - lambda_zero_plus
};

/// If f vanishes on a set with interior, the spectral gap
/// lambda1(int(zero u plus)) < lambda1(int(zero)) must hold.
inline F1Check check_f1_assumption(const ProblemSpec& s, const EigenOptions& opt = {}) {
  F1Check out;
  const auto& sup = s.support();
  if (!sup.has_zero()) return out;
  IntervalList zp = sup.zero;
  zp.insert(zp.end(), sup.plus.begin(), sup.plus.end());
  out.lambda_zero_plus = first_eigenpair(s, zp, opt).lambda1;
  out.lambda_zero = first_eigenpair(s, sup.zero, opt).lambda1;
  out.margin = out.lambda_zero - out.lambda_zero_plus;
  out.status = out.margin > 10.0 * opt.tol * out.lambda_zero ? F1Status::satisfied : F1Status::violated;
  return out;
}

struct ExtremeValueOptions {
  double tol = 1e-10;            // bisection width relative to lambda1
  double inner_tol = 1e-11;      // relative gradient tolerance of inner solves
  double constraint_tol = 1e-10; // |F~| at the inner minimizer
  EigenOptions eigen{};
  std::uint64_t seed = 1;
};

struct BisectionStep {
  double lo, hi, g_lo, g_hi;
};

struct ExtremeValueCertificate {
  double lambda1 = 0.0;
  double F_phi1 = 0.0;
  double upper_bound = 0.0;  // lambda1(int(zero u plus)) or +inf when it is the whole domain
  std::vector<BisectionStep> bracket;
  bool bracket_maintained = true;
  double multiplier = 0.0;         // Lagrange multiplier of F >= 0
  double scaled_residual = 0.0;    // relative residual of t phi1* before polishing
  double polished_residual = 0.0;  // ||Phi'(u)||_* after Newton polish from t phi1*
  double scale_factor = 0.0;       // t
  int starts = 0;
  std::vector<double> start_values;  // constrained minimum reached from each start
};

enum class ExtremeMethod { bisection, direct };

struct ExtremeValueResult {
  double lambda_star = 0.0;
  NodalFunction phi1_star;
  double F_at_min = 0.0;
  double H_at_min = 0.0;
  ExtremeMethod method = ExtremeMethod::bisection;
  ExtremeValueCertificate certificate;
};

namespace detail {

inline double bump(double x, const Interval& iv) {
  if (x <= iv.lo || x >= iv.hi) return 0.0;
  const double t = std::sin(std::numbers::pi * (x - iv.lo) / iv.length());
  return t * t;
}

/// Minimizes R subject to F~ >= 0 from `init` (augmented Lagrangian).
inline AugmentedLagrangianResult constrained_rayleigh_min(const ProblemSpec& s, const Vector& init, double scale,
                                                          const ExtremeValueOptions& opt, double nu0 = 0.0) {
  Objective f = [&](const Vector& x, Vector& g) { return rayleigh(s, x, &g); };
  Objective c = [&](const Vector& x, Vector& g) {
    const double v = -normalized_F(s, x, &g);
    g = -g;
    return v;
  };
  AugmentedLagrangianOptions al;
  al.inner.gtol = opt.inner_tol * scale;
  al.rho0 = scale;
  al.max_rho = 1e6 * al.rho0;
  al.ctol = opt.constraint_tol;
  al.post_outer = [&](const Vector& x) { return normalize_lp(s, x); };
  return augmented_lagrangian(f, c, ConstraintKind::inequality, normalize_lp(s, init), s.preconditioner(), al, nu0);
}

}  // namespace detail

/// Pure quadratic penalty minimizer with fixed rho (multiplier frozen at 0);
/// exposes the penalty path rho -> F(u_rho).
inline Vector penalized_extreme_minimizer(const ProblemSpec& s, const Vector& init, double rho, double gtol) {
  Objective obj = [&](const Vector& x, Vector& g) {
    Vector gc;
    const double R = detail::rayleigh(s, x, &g);
    const double Fn = detail::normalized_F(s, x, &gc);
    const double viol = std::max(0.0, -Fn);
    g -= rho * viol * gc;
    return R + 0.5 * rho * viol * viol;
  };
  MinimizeOptions mo;
  mo.gtol = gtol;
  return normalize_lp(s, lbfgs(obj, normalize_lp(s, init), s.preconditioner(), mo).x);
}

/// Initial guesses: phi1 pushed toward each component of the positive set
/// (and toward all of it) until F >= 0.
inline std::vector<Vector> extreme_value_starts(const ProblemSpec& s, const Vector& phi1, Rng& rng) {
  std::vector<IntervalList> targets;
  for (const auto& iv : s.support().plus) targets.push_back({iv});
  if (s.support().plus.size() > 1) targets.push_back(s.support().plus);
  std::vector<Vector> starts;
  const Mesh& m = s.mesh();
  for (const auto& tgt : targets) {
    Vector b = Vector::Zero(phi1.size());
    for (int i = 0; i < b.size(); ++i)
      for (const auto& iv : tgt) b[i] += detail::bump(m.node(i + 1), iv) * (1.0 + 0.01 * rng.uniform(-1.0, 1.0));
    double alpha = 0.5 * phi1.maxCoeff();
    Vector v = phi1 + alpha * b;
    for (int k = 0; k < 60 && detail::normalized_F(s, v) < 0.0; ++k) {
      alpha *= 2.0;
      v = phi1 + alpha * b;
    }
    starts.push_back(v);
  }
  return starts;
}

inline ExtremeValueResult extreme_value(const ProblemSpec& s, const ExtremeValueOptions& opt = {},
                                        const EigenResult* eig_in = nullptr) {
  std::optional<EigenResult> eig_local;
  if (!eig_in) eig_local = first_eigenpair(s, {}, opt.eigen);
  const EigenResult& eig = eig_in ? *eig_in : *eig_local;
  ExtremeValueResult out;
  auto& cert = out.certificate;
  cert.lambda1 = eig.lambda1;
  const Vector& phi1 = eig.phi1.values();
  const Moments m1 = detail::moments(s, phi1);
  cert.F_phi1 = m1.F;
  const double F_scale = detail::power_integral(s.mesh(), phi1, nullptr, s.gamma(), nullptr) *
                         s.weight().samples().cwiseAbs().maxCoeff();
  if (!(m1.F < -1e-8 * F_scale))
    throw HypothesisError("F_phi1_negative",
                          "F(phi1) >= 0: existence hypotheses unmet (F(phi1) = " + num(m1.F) + ")");

  // Upper end of the bracket: lambda1(int(zero u plus)) when that set is not
  // the whole domain.
  IntervalList zp = s.support().zero;
  zp.insert(zp.end(), s.support().plus.begin(), s.support().plus.end());
  zp = merge_intervals(zp);
  const bool whole = zp.size() == 1 && zp[0].lo <= s.mesh().a() && zp[0].hi >= s.mesh().b();
  cert.upper_bound = whole ? std::numeric_limits<double>::infinity() : first_eigenpair(s, zp, opt.eigen).lambda1;

  Rng rng(opt.seed);
  const auto starts = extreme_value_starts(s, phi1, rng);
  const double scale = eig.lambda1;
  std::optional<AugmentedLagrangianResult> best;
  for (const auto& st : starts) {
    AugmentedLagrangianResult r = detail::constrained_rayleigh_min(s, st, scale, opt);
    cert.start_values.push_back(r.f);
    const bool feasible = r.constraint <= 1e3 * opt.constraint_tol;
    if (feasible && (!best || r.f < best->f)) best = std::move(r);
  }
  cert.starts = static_cast<int>(starts.size());
  if (!best) throw ConvergenceError("extreme_value: no start reached the constraint set F >= 0");

  // g(lambda) = min { H_lambda(u) : F(u) >= 0, ||u||_p = 1 }; strictly
  // decreasing with its zero at lambda*. Each evaluation warm-starts from the
  // current minimizer.
  auto g_eval = [&](double lam) {
    AugmentedLagrangianResult r = detail::constrained_rayleigh_min(s, best->x, scale, opt, best->multiplier);
    if (r.constraint <= 1e3 * opt.constraint_tol && r.f <= best->f) best = std::move(r);
    return best->f - lam;  // H_lam at the normalized minimizer
  };
  double lo = eig.lambda1, hi = std::isfinite(cert.upper_bound) ? cert.upper_bound : 2.0 * eig.lambda1;
  double glo = g_eval(lo), ghi = g_eval(hi);
  if (!(glo > 0.0))
    throw ConvergenceError("extreme_value: bisection bracket failure, g(lambda1) = " + num(glo));
  for (int k = 0; k < 60 && !(ghi < 0.0); ++k) {
    lo = hi, glo = ghi;
    hi *= 2.0;
    ghi = g_eval(hi);
  }
  if (!(ghi < 0.0))
    throw ConvergenceError("extreme_value: bisection bracket failure, g(" + num(hi) +
                           ") = " + num(ghi));
  cert.bracket.push_back({lo, hi, glo, ghi});
  while (hi - lo > opt.tol * eig.lambda1) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g_eval(mid);
    if (gm > 0.0)
      lo = mid, glo = gm;
    else
      hi = mid, ghi = gm;
    cert.bracket.push_back({lo, hi, glo, ghi});
    if (!(glo > 0.0 && ghi <= 0.0)) cert.bracket_maintained = false;
  }
  out.lambda_star = 0.5 * (lo + hi);
  const Vector phis = normalize_lp(s, best->x.cwiseAbs());
  out.phi1_star = NodalFunction(s.mesh_ptr(), phis);
  MomentGradients gr;
  const Moments ms = detail::moments(s, phis, &gr);
  out.F_at_min = ms.F;
  out.H_at_min = ms.H(out.lambda_star);
  cert.multiplier = best->multiplier;

  // A multiple t phi1* solves the equation at lambda*: grad Phi(t phi) =
  // t^{p-1} (a - t^{gamma-p} b) with a = H'/p, b = F'/gamma.
  const auto& P = s.preconditioner();
  const Vector a = (gr.G - out.lambda_star * gr.L) / s.p();
  const Vector b = gr.F / s.gamma();
  const Vector Kb = P.apply(b);
  const double sigma = a.dot(Kb) / b.dot(Kb);
  const double an = P.dual_norm(a);
  cert.scaled_residual = an > 0 ? P.dual_norm(a - sigma * b) / an : 0.0;
  if (sigma > 0.0) {
    cert.scale_factor = std::pow(sigma, 1.0 / (s.gamma() - s.p()));
    cert.polished_residual = newton_polish(s, out.lambda_star, cert.scale_factor * phis, {1e-12, 20}).residual;
  } else {
    cert.scaled_residual = 1.0;
  }
  return out;
}

}  // namespace plap
