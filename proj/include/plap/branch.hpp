#pragma once

// Local-minimum branch for lambda > lambda*: minimize the reduced functional
// J+_lambda over the smaller cone {H_mu0 < 0, F < 0} and lift the minimizer
// to the fiber.

#include <algorithm>
#include <array>
#include <numbers>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "plap/functionals.hpp"
#include "plap/newton.hpp"
#include "plap/optimize.hpp"
#include "plap/rng.hpp"
#include "plap/spectral.hpp"

namespace plap {

struct BranchOptions {
  double inner_tol = 1e-10;      // relative gradient tolerance for J+ minimization
  double constraint_tol = 1e-10; // feasibility of R <= mu, relative to mu
  double boundary_margin = 1e-6; // R >= mu (1 - margin) counts as touching the boundary
  double interior_margin = 1e-3; // mu0 selection: R(v) <= mu0 (1 - margin) at lambda*
  int restarts = 8;              // random restarts for the mu0 check
  bool use_abs = true;           // replace iterates by |v| when that does not raise J
  double lambda_rtol = 1e-4;     // Lambda located to lambda_rtol * lambda*
  NewtonOptions newton{};
  std::uint64_t seed = 1;
  std::vector<double> mu_fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

/// Shared data of the branch computations: the problem and its two
/// spectral thresholds.
struct BranchContext {
  ProblemSpec spec;
  EigenResult eig;
  ExtremeValueResult extreme;
  BranchOptions opt{};

  double lambda1() const noexcept { return eig.lambda1; }
  double lambda_star() const noexcept { return extreme.lambda_star; }
};

struct ConstrainedMinResult {
  NodalFunction v;  // ||v||_p = 1
  double J_value = 0.0;
  double H_mu = 0.0;
  double F_val = 0.0;
  double R = 0.0;
  int iterations = 0;
  double mu = 0.0;
  double lambda = 0.0;
  bool boundary_active = false;
  bool converged = false;
  double multiplier = 0.0;
  std::string status;
};

/// Boundary solution on {H_mu = 0}: v maximizes F~ = F / L^{gamma/p} under
/// R = mu. The direction does not depend on lambda; its value is m.
struct BoundarySolution {
  NodalFunction v;
  double mu = 0.0;
  double m = 0.0;  // max F~ on {R = mu}, negative
  double multiplier = 0.0;
  bool converged = false;
};

/// J+_lambda on {R = mu} for a direction with F~ = m:
///   -c (lambda - mu)^{gamma/(gamma-p)} / |m|^{p/(gamma-p)}.
inline double boundary_energy(double p, double gamma, double lambda, double mu, double m) {
  return detail::j_plus_from(p, gamma, mu - lambda, m);
}

namespace detail {

inline void require_mu_range(const BranchContext& ctx, double lambda, double mu, const char* where) {
  const double l1 = ctx.lambda1(), ls = ctx.lambda_star();
  if (!(mu > l1 && mu < ls))
    throw InvalidArgument(std::string(where) + ": requires lambda1 < mu < lambda* (mu = " + num(mu) +
                          ", lambda1 = " + num(l1) + ", lambda* = " + num(ls) + ")");
  if (!(mu <= lambda))
    throw InvalidArgument(std::string(where) + ": requires mu <= lambda (mu = " + num(mu) +
                          ", lambda = " + num(lambda) + ")");
}

/// Keeps |v| when it does not raise J and stays in {R <= mu}.
inline Vector prefer_abs(const ProblemSpec& s, const Vector& v, double lambda, double mu) {
  const Vector a = normalize_lp(s, v.cwiseAbs());
  const Vector n = normalize_lp(s, v);
  if (a == n) return n;
  if (j_plus(s, a, lambda) <= j_plus(s, n, lambda) && rayleigh(s, a) <= std::max(mu, rayleigh(s, n))) return a;
  return n;
}

// Magnitudes of the gradient terms before cancellation, at ||v||_p = 1;
// stopping tolerances are relative to these.
inline double j_gradient_scale(const ProblemSpec& s, const Vector& v, double lambda) {
  MomentGradients g;
  const Moments m = moments(s, v, &g);
  const auto& P = s.preconditioner();
  const double H = m.H(lambda), J = j_plus_from(s.p(), s.gamma(), H, m.F);
  const double a = s.gamma() / (s.gamma() - s.p()), b = s.p() / (s.gamma() - s.p());
  return std::abs(J) * (a * (P.dual_norm(g.G) + std::abs(lambda) * P.dual_norm(g.L)) / std::abs(H) +
                        b * P.dual_norm(g.F) / std::abs(m.F));
}

inline double f_gradient_scale(const ProblemSpec& s, const Vector& v) {
  MomentGradients g;
  const Moments m = moments(s, v, &g);
  const auto& P = s.preconditioner();
  return (P.dual_norm(g.F) + s.gamma() / s.p() * std::abs(m.F) * P.dual_norm(g.L) / m.L) /
         std::pow(m.L, s.gamma() / s.p());
}

/// Smooth positive perturbation of phi1 with random low modes.
inline Vector random_positive_start(const ProblemSpec& s, const Vector& phi1, Rng& rng, double amplitude) {
  const Mesh& m = s.mesh();
  std::array<double, 6> c{};
  for (auto& ci : c) ci = rng.uniform(-amplitude, amplitude);
  Vector v(phi1.size());
  for (int i = 0; i < v.size(); ++i) {
    const double t = (m.node(i + 1) - m.a()) / (m.b() - m.a());
    double w = 1.0;
    for (std::size_t k = 0; k < c.size(); ++k) w += c[k] * std::cos(std::numbers::pi * (k + 1) * t);
    v[i] = phi1[i] * std::max(w, 0.05);
  }
  return normalize_lp(s, v);
}

}  // namespace detail

namespace detail {

/// Moves v along K^{-1} R'(v) until R = mu to rounding (scalar secant).
inline Vector project_rayleigh(const ProblemSpec& s, Vector v, double mu) {
  Vector g;
  rayleigh(s, v, &g);
  const Vector z = s.preconditioner().apply(g);
  auto phi = [&](double t) { return rayleigh(s, v + t * z) - mu; };
  double t0 = 0.0, f0 = phi(0.0);
  if (f0 == 0.0) return v;
  const double slope = g.dot(z);
  if (!(slope > 0.0)) return v;
  double t1 = -f0 / slope, f1 = phi(t1);
  for (int it = 0; it < 30 && std::abs(f1) > 1e-15 * mu && f1 != f0; ++it) {
    const double t2 = t1 - f1 * (t1 - t0) / (f1 - f0);
    t0 = t1, f0 = f1;
    t1 = t2, f1 = phi(t1);
  }
  return std::abs(f1) < std::abs(rayleigh(s, v) - mu) ? Vector(v + t1 * z) : v;
}

}  // namespace detail

/// Maximizes F~ on {R = mu} from `init` (equality-constrained augmented
/// Lagrangian).
inline BoundarySolution boundary_solve(const BranchContext& ctx, double mu, const Vector& init, double nu0 = 0.0) {
  const ProblemSpec& s = ctx.spec;
  Objective f = [&](const Vector& x, Vector& g) {
    const double v = -detail::normalized_F(s, x, &g);
    g = -g;
    return v;
  };
  Objective c = [&](const Vector& x, Vector& g) { return detail::rayleigh(s, x, &g) - mu; };
  const Vector x0 = normalize_lp(s, init);
  const double scale = std::abs(detail::normalized_F(s, x0));
  AugmentedLagrangianOptions al;
  al.inner.gtol = ctx.opt.inner_tol * detail::f_gradient_scale(s, x0);
  al.rho0 = scale / (mu * mu);
  al.max_rho = 1e6 * al.rho0;
  al.ctol = ctx.opt.constraint_tol * mu;
  al.post_outer = [&](const Vector& x) {
    const Vector a = normalize_lp(s, x.cwiseAbs()), n = normalize_lp(s, x);
    const double ra = detail::rayleigh(s, a), rn = detail::rayleigh(s, n);
    // |v| lowers R; accept it only if F~ is not worse and R stays near mu
    if (detail::normalized_F(s, a) >= detail::normalized_F(s, n) && std::abs(ra - mu) <= std::abs(rn - mu)) return a;
    return n;
  };
  AugmentedLagrangianResult r = augmented_lagrangian(f, c, ConstraintKind::equality, x0, s.preconditioner(), al, nu0);
  BoundarySolution out;
  out.mu = mu;
  const Vector v = normalize_lp(s, detail::project_rayleigh(s, r.x, mu));
  out.m = detail::normalized_F(s, v);
  out.multiplier = r.multiplier;
  out.converged = r.converged;
  out.v = NodalFunction(s.mesh_ptr(), v);
  return out;
}

/// Starting directions on {R = mu}: phi1 moved toward phi1* or toward a
/// bump on each positive component, with the mixing weight chosen so R = mu.
inline std::vector<Vector> boundary_starts(const BranchContext& ctx, double mu) {
  const ProblemSpec& s = ctx.spec;
  const Vector& phi1 = ctx.eig.phi1.values();
  std::vector<Vector> dirs;
  dirs.push_back(ctx.extreme.phi1_star.values());
  // mirror image of phi1*, relevant for symmetric data
  dirs.push_back(ctx.extreme.phi1_star.values().reverse());
  for (const auto& iv : s.support().plus) {
    Vector b(phi1.size());
    for (int i = 0; i < b.size(); ++i) b[i] = detail::bump(s.mesh().node(i + 1), iv);
    dirs.push_back(normalize_lp(s, b));
  }
  std::vector<Vector> starts;
  for (const Vector& d : dirs) {
    if (!(detail::rayleigh(s, d) > mu)) continue;
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 60; ++k) {
      const double t = 0.5 * (lo + hi);
      (detail::rayleigh(s, (1.0 - t) * phi1 + t * d) < mu ? lo : hi) = t;
    }
    starts.push_back(normalize_lp(s, (1.0 - lo) * phi1 + lo * d));
  }
  return starts;
}

/// Best boundary solution over the multi-start set, or the continuation of
/// `warm` alone.
inline BoundarySolution boundary_minimize(const BranchContext& ctx, double mu, const BoundarySolution* warm = nullptr) {
  if (!(mu > ctx.lambda1() && mu < ctx.lambda_star()))
    throw InvalidArgument("boundary_minimize: requires lambda1 < mu < lambda*");
  std::vector<Vector> starts;
  if (warm) starts.push_back(warm->v.values());
  else starts = boundary_starts(ctx, mu);
  std::optional<BoundarySolution> best;
  for (const auto& st : starts) {
    BoundarySolution b = boundary_solve(ctx, mu, st, warm ? warm->multiplier : 0.0);
    if (!best || b.m > best->m) best = std::move(b);
  }
  if (!best) throw SolverFailure("boundary-solve", "boundary_minimize: no admissible start on {R = mu}");
  return std::move(*best);
}

/// min J+_lambda(v) over {H_mu < 0, F < 0} (inclusive of the boundary
/// H_mu = 0), started from `init`, or from phi1 when `init` is empty or
/// outside the cone. Descent runs in the open set {R < mu}; when it ends on
/// the wall R = mu the minimum is taken on the boundary, where the
/// minimizing direction is the maximizer of F~ on {R = mu}.
inline ConstrainedMinResult constrained_minimize(const BranchContext& ctx, double lambda, double mu,
                                                 const Vector& init) {
  detail::require_mu_range(ctx, lambda, mu, "constrained_minimize");
  const ProblemSpec& s = ctx.spec;
  Vector start = init;
  auto in_cone = [&](const Vector& v) {
    const Moments m = detail::moments(s, v);
    return m.H(mu) < 0.0 && m.F < 0.0;
  };
  if (start.size() != s.mesh().interior_nodes() || !in_cone(start)) {
    start = ctx.eig.phi1.values();
    if (!in_cone(start)) throw SolverFailure("cone-empty", "constrained_minimize: no admissible initial point");
  }
  Objective f = [&](const Vector& x, Vector& g) {
    if (!(detail::rayleigh(s, x) < mu)) {
      g.setZero(x.size());
      return std::numeric_limits<double>::infinity();
    }
    return detail::j_plus(s, x, lambda, &g);
  };
  Vector x = normalize_lp(s, start);
  MinimizeOptions mo;
  mo.gtol = ctx.opt.inner_tol * detail::j_gradient_scale(s, x, lambda);
  mo.max_iter = 20000;
  MinimizeResult r;
  int iterations = 0;
  for (int round = 0; round < 4; ++round) {
    r = lbfgs(f, x, s.preconditioner(), mo);
    iterations += r.iterations;
    Vector next = ctx.opt.use_abs ? detail::prefer_abs(s, r.x, lambda, mu) : normalize_lp(s, r.x);
    if (!(detail::rayleigh(s, next) < mu)) next = normalize_lp(s, r.x);
    const bool same = (next - normalize_lp(s, r.x)).lpNorm<Eigen::Infinity>() == 0.0;
    x = std::move(next);
    if (r.converged && same) break;
  }
  ConstrainedMinResult out;
  out.mu = mu;
  out.lambda = lambda;
  out.iterations = iterations;
  const Moments mm = detail::moments(s, x);
  const double R = mm.G / mm.L;
  const bool at_wall = R >= mu * (1.0 - ctx.opt.boundary_margin);
  if (!at_wall) {
    if (!(r.grad_norm <= 1e6 * mo.gtol) || !std::isfinite(r.f))
      throw ConvergenceError("constrained_minimize: no convergence at lambda = " + num(lambda) + ", mu = " + num(mu) +
                             " (" + r.status + ")");
    out.R = R;
    out.F_val = mm.F;
    out.H_mu = mm.H(mu);
    out.J_value = detail::j_plus_from(s.p(), s.gamma(), mm.H(lambda), mm.F);
    out.boundary_active = false;
    out.converged = r.converged;
    out.status = r.status;
    out.v = NodalFunction(s.mesh_ptr(), std::move(x));
    return out;
  }
  if (!(mu < lambda))
    throw ConvergenceError("constrained_minimize: descent reached H_lambda = 0 at lambda = " + num(lambda));
  const BoundarySolution bd = boundary_minimize(ctx, mu);
  const Vector& v = bd.v.values();
  const Moments mb = detail::moments(s, v);
  out.R = mb.G / mb.L;
  out.F_val = mb.F;
  out.H_mu = mb.H(mu);
  out.J_value = detail::j_plus_from(s.p(), s.gamma(), mb.H(lambda), mb.F);
  // KKT multiplier of R <= mu for J+, least squares in the dual norm
  Vector gj, gr;
  detail::j_plus(s, v, lambda, &gj);
  detail::rayleigh(s, v, &gr);
  const Vector Kgr = s.preconditioner().apply(gr);
  out.multiplier = -gj.dot(Kgr) / gr.dot(Kgr);
  out.boundary_active = true;
  out.converged = bd.converged;
  out.status = "boundary";
  out.v = bd.v;
  return out;
}

struct ConstrainedInfimum {
  ConstrainedMinResult interior;  // inequality-constrained local minimizer
  BoundarySolution boundary;
  double J_boundary = 0.0;
  double J = 0.0;  // min of the two
  bool boundary_active = false;
};

inline ConstrainedInfimum constrained_infimum(const BranchContext& ctx, double lambda, double mu, const Vector& warm,
                                              const BoundarySolution* boundary = nullptr) {
  ConstrainedInfimum out;
  out.interior = constrained_minimize(ctx, lambda, mu, warm);
  out.boundary = boundary ? *boundary : boundary_minimize(ctx, mu);
  out.J_boundary = boundary_energy(ctx.spec.p(), ctx.spec.gamma(), lambda, mu, out.boundary.m);
  out.boundary_active = out.interior.boundary_active || out.J_boundary <= out.interior.J_value;
  out.J = std::min(out.interior.J_value, out.J_boundary);
  return out;
}

struct Mu0Candidate {
  double theta = 0.0;
  double mu = 0.0;
  double J = 0.0;
  double R = 0.0;
  double J_boundary = 0.0;
  bool admissible = false;
};

struct Mu0Selection {
  double mu0 = 0.0;
  double theta = 0.0;
  ConstrainedMinResult at_lambda_star;  // interior minimizer at lambda = lambda*
  BoundarySolution boundary;            // boundary direction at mu0
  std::vector<Mu0Candidate> tried;
  int restarts = 0;
};

/// Largest mu0 = lambda1 + theta (lambda* - lambda1) on the grid whose
/// constrained minimizer at lambda* is interior with margin and beats the
/// boundary value, confirmed against random restarts.
inline Mu0Selection select_mu0(const BranchContext& ctx) {
  const ProblemSpec& s = ctx.spec;
  const double l1 = ctx.lambda1(), ls = ctx.lambda_star();
  std::vector<double> th = ctx.opt.mu_fractions;
  std::sort(th.begin(), th.end(), std::greater<>());
  Mu0Selection out;
  Rng rng(ctx.opt.seed);
  for (double theta : th) {
    if (!(theta > 0.0 && theta < 1.0)) throw InvalidArgument("select_mu0: mu fractions must lie in (0, 1)");
    const double mu = l1 + theta * (ls - l1);
    Mu0Candidate cand{theta, mu};
    ConstrainedMinResult best = constrained_minimize(ctx, ls, mu, ctx.eig.phi1.values());
    Rng local = rng.split(static_cast<std::uint64_t>(theta * 1e6));
    for (int k = 0; k < ctx.opt.restarts; ++k) {
      Vector st = detail::random_positive_start(s, ctx.eig.phi1.values(), local, 0.6);
      const Moments m = detail::moments(s, st);
      if (!(m.H(mu) < 0.0 && m.F < 0.0)) continue;
      ConstrainedMinResult r = constrained_minimize(ctx, ls, mu, st);
      if (r.J_value < best.J_value - 1e-9 * std::abs(best.J_value)) best = std::move(r);
    }
    BoundarySolution bd = boundary_minimize(ctx, mu);
    cand.J = best.J_value;
    cand.R = best.R;
    cand.J_boundary = boundary_energy(s.p(), s.gamma(), ls, mu, bd.m);
    cand.admissible = best.R <= mu * (1.0 - ctx.opt.interior_margin) && cand.J_boundary > best.J_value;
    out.tried.push_back(cand);
    if (cand.admissible) {
      out.mu0 = mu;
      out.theta = theta;
      out.at_lambda_star = std::move(best);
      out.boundary = std::move(bd);
      out.restarts = ctx.opt.restarts;
      return out;
    }
  }
  throw SolverFailure("no-admissible-mu0", "select_mu0: no grid value of mu0 gives an interior minimizer at lambda*");
}

enum class BranchKind { local_min, mountain_pass };

inline const char* to_string(BranchKind k) { return k == BranchKind::local_min ? "local_min" : "mountain_pass"; }

struct BranchPoint {
  double lambda = 0.0;
  BranchKind kind = BranchKind::local_min;
  NodalFunction u;
  double energy = 0.0;
  double fiber_dd = 0.0;  // d^2/ds^2 Phi(s u) at s = 1
  double residual = 0.0;  // ||Phi'(u)||_*
  double min_u = 0.0;
  double mu_used = 0.0;
  double R = 0.0;          // Rayleigh quotient of u
  double J_reduced = 0.0;  // J+_lambda(u) before polishing
  bool boundary_active = false;
};

struct BranchTable {
  double lambda1 = 0.0;
  double lambda_star = 0.0;
  double mu0 = 0.0;
  double Lambda = std::numeric_limits<double>::infinity();  // end of the local-min branch
  bool Lambda_detected = false;
  std::string Lambda_reason;  // "boundary" (minimizer reaches H_mu0 = 0) or "boundary-value"
  std::vector<BranchPoint> points;
  std::vector<double> skipped;  // grid values at or below lambda1, or at or beyond Lambda
  std::vector<std::pair<double, std::string>> errors;  // per-lambda solver failures
  BoundarySolution boundary;    // boundary direction at mu0
};

/// Lifts a normalized direction to the fiber and polishes it as a critical
/// point of Phi_lambda.
inline BranchPoint lift_to_fiber(const ProblemSpec& s, double lambda, const Vector& v, const NewtonOptions& nopt) {
  const NodalFunction nv(s.mesh_ptr(), v);
  const FiberPoint fp = fiber_s_plus(s, nv, lambda);
  BranchPoint bp;
  bp.lambda = lambda;
  bp.J_reduced = fp.J_plus;
  NewtonResult nr = newton_polish(s, lambda, fp.s_plus * v, nopt);
  bp.u = NodalFunction(s.mesh_ptr(), std::move(nr.u));
  bp.residual = nr.residual;
  const Moments m = detail::moments(s, bp.u.values());
  bp.energy = m.H(lambda) / s.p() - m.F / s.gamma();
  // Phi(s u)'' at s = 1: (p-1) H - (gamma-1) F
  bp.fiber_dd = (s.p() - 1.0) * m.H(lambda) - (s.gamma() - 1.0) * m.F;
  bp.min_u = bp.u.min_interior();
  bp.R = m.G / m.L;
  return bp;
}

/// Follows the constrained minimizer over `grid` (warm-started outward from
/// lambda*) and locates Lambda, the first lambda > lambda* at which the
/// minimizer over {H_mu0 <= 0, F < 0} is on the boundary H_mu0 = 0.
inline BranchTable continue_branch(const BranchContext& ctx, const Mu0Selection& sel, std::vector<double> grid) {
  const ProblemSpec& s = ctx.spec;
  BranchTable tab;
  tab.lambda1 = ctx.lambda1();
  tab.lambda_star = ctx.lambda_star();
  tab.mu0 = sel.mu0;
  tab.boundary = sel.boundary;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const double ls = ctx.lambda_star();
  const double mu0 = sel.mu0;
  const Vector w0 = sel.boundary.v.values();
  const double m0 = sel.boundary.m;

  struct Eval {
    ConstrainedMinResult r;
    double J_boundary = 0.0;
    bool active = false;
  };
  auto eval = [&](double lam, const Vector& warm) {
    const double mu = std::min(mu0, lam);
    Eval e{constrained_minimize(ctx, lam, mu, warm), 0.0, false};
    if (mu == mu0) {
      e.J_boundary = boundary_energy(s.p(), s.gamma(), lam, mu0, m0);
      e.active = e.r.boundary_active || e.J_boundary <= e.r.J_value;
    } else {
      e.J_boundary = 0.0;
      e.active = e.r.boundary_active;
    }
    return e;
  };
  auto record = [&](double lam, const Eval& e) {
    BranchPoint bp = lift_to_fiber(s, lam, e.r.v.values(), ctx.opt.newton);
    bp.kind = BranchKind::local_min;
    bp.mu_used = std::min(mu0, lam);
    bp.boundary_active = e.active;
    tab.points.push_back(std::move(bp));
  };

  // below lambda*: descend from the lambda* minimizer
  Vector warm = sel.at_lambda_star.v.values();
  std::vector<double> below, above;
  for (double lam : grid) (lam < ls ? below : above).push_back(lam);
  std::reverse(below.begin(), below.end());
  for (double lam : below) {
    if (std::min(mu0, lam) <= ctx.lambda1()) {
      tab.skipped.push_back(lam);
      continue;
    }
    try {
      const Eval e = eval(lam, warm);
      warm = e.r.v.values();
      record(lam, e);
    } catch (const std::exception& ex) {
      tab.errors.emplace_back(lam, ex.what());
    }
  }
  std::reverse(tab.points.begin(), tab.points.end());

  // above lambda*: ascend until the minimizer becomes boundary-active
  warm = sel.at_lambda_star.v.values();
  double last_ok = ls;
  Vector last_ok_v = warm;
  std::optional<double> first_active;
  std::size_t k = 0;
  for (; k < above.size(); ++k) {
    const double lam = above[k];
    Eval e;
    try {
      e = eval(lam, warm);
    } catch (const std::exception& ex) {
      tab.errors.emplace_back(lam, ex.what());
      continue;
    }
    if (e.active) {
      first_active = lam;
      tab.Lambda_reason = e.r.boundary_active ? "boundary" : "boundary-value";
      break;
    }
    warm = e.r.v.values();
    last_ok = lam;
    last_ok_v = warm;
    try {
      record(lam, e);
    } catch (const std::exception& ex) {
      tab.errors.emplace_back(lam, ex.what());
    }
  }
  for (std::size_t j = k; j < above.size(); ++j) tab.skipped.push_back(above[j]);
  if (!first_active) {
    // extend past the grid
    double step = above.size() >= 2 ? above.back() - above[above.size() - 2] : 0.05 * ls;
    step = std::max(step, 1e-3 * ls);
    double lam = last_ok;
    for (int it = 0; it < 200 && lam < 10.0 * ls; ++it) {
      lam = last_ok + step;
      const Eval e = eval(lam, last_ok_v);
      if (e.active) {
        first_active = lam;
        tab.Lambda_reason = e.r.boundary_active ? "boundary" : "boundary-value";
        break;
      }
      last_ok = lam;
      last_ok_v = e.r.v.values();
      step *= 1.5;
    }
  }
  if (first_active) {
    double lo = last_ok, hi = *first_active;
    Vector vlo = last_ok_v;
    while (hi - lo > ctx.opt.lambda_rtol * ls) {
      const double mid = 0.5 * (lo + hi);
      const Eval e = eval(mid, vlo);
      if (e.active) {
        hi = mid;
        tab.Lambda_reason = e.r.boundary_active ? "boundary" : "boundary-value";
      } else {
        lo = mid;
        vlo = e.r.v.values();
      }
    }
    tab.Lambda = 0.5 * (lo + hi);
    tab.Lambda_detected = true;
  }
  std::sort(tab.skipped.begin(), tab.skipped.end());
  return tab;
}

struct MuProfilePoint {
  double mu = 0.0;
  double J = 0.0;  // inf of J+_lambda over {H_mu <= 0, F < 0}
  double J_interior = 0.0;
  double J_boundary = 0.0;
  bool boundary_active = false;
};

/// mu -> J^+_lambda(mu) on a list of mu values, warm-started along the list.
inline std::vector<MuProfilePoint> mu_profile(const BranchContext& ctx, double lambda, const std::vector<double>& mus,
                                              const Vector& warm) {
  std::vector<MuProfilePoint> out;
  Vector w = warm;
  std::optional<BoundarySolution> bwarm;
  for (double mu : mus) {
    BoundarySolution bd = boundary_minimize(ctx, mu);
    if (bwarm) {
      BoundarySolution cont = boundary_minimize(ctx, mu, &*bwarm);
      if (cont.m > bd.m) bd = std::move(cont);
    }
    const ConstrainedInfimum ci = constrained_infimum(ctx, lambda, mu, w, &bd);
    out.push_back({mu, ci.J, ci.interior.J_value, ci.J_boundary, ci.boundary_active});
    w = ci.interior.v.values();
    bwarm = bd;
  }
  return out;
}

struct MuStability {
  bool stable = false;
  double J0 = 0.0, J_minus = 0.0, J_plus = 0.0;
  double distance = 0.0;  // max K-distance of the perturbed minimizers to the one at mu0
  std::string diagnostic;
};

/// Re-solves at mu0 - delta and mu0 + delta and compares value and
/// minimizer with those at mu0.
inline MuStability stability_under_mu(const BranchContext& ctx, double lambda, double mu0, double delta_mu,
                                      const Vector& warm, double tol = 1e-8) {
  if (!(mu0 - delta_mu > ctx.lambda1() && mu0 + delta_mu < ctx.lambda_star()))
    throw InvalidArgument("stability_under_mu: mu0 +- delta_mu must stay in (lambda1, lambda*)");
  if (!(mu0 + delta_mu <= lambda)) throw InvalidArgument("stability_under_mu: requires mu0 + delta_mu <= lambda");
  const auto& P = ctx.spec.preconditioner();
  MuStability out;
  const ConstrainedInfimum c0 = constrained_infimum(ctx, lambda, mu0, warm);
  out.J0 = c0.J;
  if (c0.boundary_active) {
    out.diagnostic = "minimizer at mu0 is boundary-active; local independence of mu does not apply";
    return out;
  }
  const Vector v0 = c0.interior.v.values();
  const ConstrainedInfimum cm = constrained_infimum(ctx, lambda, mu0 - delta_mu, v0);
  const ConstrainedInfimum cp = constrained_infimum(ctx, lambda, mu0 + delta_mu, v0);
  out.J_minus = cm.J;
  out.J_plus = cp.J;
  const double n0 = P.energy_norm(v0);
  out.distance = std::max(P.energy_norm(cm.interior.v.values() - v0), P.energy_norm(cp.interior.v.values() - v0)) / n0;
  const double jt = tol * std::max(1.0, std::abs(out.J0));
  out.stable = !cm.boundary_active && !cp.boundary_active && std::abs(out.J_minus - out.J0) <= jt &&
               std::abs(out.J_plus - out.J0) <= jt && out.distance <= std::sqrt(tol);
  if (!out.stable) out.diagnostic = "value or minimizer changed under the mu perturbation";
  return out;
}

}  // namespace plap
