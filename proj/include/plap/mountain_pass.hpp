#pragma once

// Second branch: mu^lambda and a boundary minimizer w, the p-convex initial
// path from u_lambda to w, polyline mountain-pass deformation, and Newton
// polish of the max node.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "plap/branch.hpp"

namespace plap {

struct MuLambdaResult {
  double mu_lambda = 0.0;
  NodalFunction w;          // ||w||_p = 1, w >= 0, R(w) = mu_lambda
  double J_mu0 = 0.0;       // J^+_lambda(mu0), attained in the interior
  double J_mu_lambda = 0.0; // J^+_lambda(mu_lambda)
  double J_boundary = 0.0;  // J+_lambda(w)
  double delta_J = 0.0;
  double H_mu_lambda = 0.0; // H_{mu_lambda}(w)
  double H_mu0 = 0.0;       // H_{mu0}(w) > 0
  std::vector<std::pair<double, double>> scan;  // (mu, boundary value)
  std::vector<double> multistart_m;  // F~ maxima from each boundary start at mu_lambda
  double multistart_spread = 0.0;    // max - min of multistart_m
};

struct MuLambdaOptions {
  double tol = 1e-10;
  int scan_points = 16;
};

/// mu^lambda = sup { mu in (mu0, lambda*) : J^+_lambda(mu) = J^+_lambda(mu0) }.
/// The boundary value j(mu) = -c (lambda - mu)^{gamma/(gamma-p)} / |m(mu)|^{p/(gamma-p)}
/// decreases to -inf as mu -> lambda*; mu^lambda is where it meets J^+_lambda(mu0).
inline MuLambdaResult find_mu_lambda(const BranchContext& ctx, double lambda, double mu0, double J_mu0,
                                     const MuLambdaOptions& opt = {}) {
  const ProblemSpec& s = ctx.spec;
  const double ls = ctx.lambda_star();
  if (!(lambda > ls)) throw InvalidArgument("find_mu_lambda: requires lambda > lambda*");
  if (!(mu0 > ctx.lambda1() && mu0 < ls)) throw InvalidArgument("find_mu_lambda: requires lambda1 < mu0 < lambda*");
  MuLambdaResult out;
  out.J_mu0 = J_mu0;
  out.delta_J = std::max(opt.tol, 1e-8 * std::abs(J_mu0));
  const double dJ = out.delta_J;
  std::optional<BoundarySolution> warm;
  // continuation in mu; the full multi-start runs at the first point and
  // again at the returned mu^lambda
  auto eval = [&](double mu, bool fresh = false) {
    BoundarySolution b = (fresh || !warm) ? boundary_minimize(ctx, mu) : boundary_minimize(ctx, mu, &*warm);
    if (fresh && warm) {
      BoundarySolution c = boundary_minimize(ctx, mu, &*warm);
      if (c.m > b.m) b = std::move(c);
    }
    warm = b;
    // J+ evaluated at the computed direction, so the residual slack in R = mu
    // does not enter
    return std::make_pair(detail::j_plus(s, b.v.values(), lambda), std::move(b));
  };
  // predicate: J^+(mu) = min(J(mu0), j(mu)) <= J(mu0) - delta_J
  double lo = mu0, hi = 0.0;
  std::optional<BoundarySolution> blo;
  bool found = false;
  const int K = std::max(opt.scan_points, 2);
  std::vector<double> mus;
  for (int k = 1; k < K; ++k) mus.push_back(mu0 + (ls - mu0) * k / K);
  for (int j = 1; j <= 30; ++j) mus.push_back(ls - (ls - mu0) / K * std::ldexp(1.0, -j));
  for (double mu : mus) {
    auto [j, b] = eval(mu);
    out.scan.emplace_back(mu, j);
    if (j <= J_mu0 - dJ) {
      hi = mu;
      found = true;
      break;
    }
    lo = mu;
    blo = std::move(b);
  }
  if (!found)
    throw SolverFailure("predicate-never-true",
                        "find_mu_lambda: J^+(mu) never drops below J^+(mu0); lambda may be >= Lambda");
  double jlo = blo ? detail::j_plus(s, blo->v.values(), lambda) : 0.0;
  for (int it = 0; it < 200 && !(blo && std::abs(jlo - J_mu0) <= dJ); ++it) {
    if (hi - lo <= 1e-15 * ls) break;
    const double mid = 0.5 * (lo + hi);
    auto [j, b] = eval(mid);
    if (j <= J_mu0 - dJ) {
      hi = mid;
    } else {
      lo = mid, jlo = j;
      blo = std::move(b);
    }
  }
  if (blo) {
    auto [j, b] = eval(lo, true);
    if (j < jlo) jlo = j, blo = std::move(b);
  }
  if (!blo || std::abs(jlo - J_mu0) > dJ)
    throw SolverFailure("boundary-minimizer-not-found",
                        "find_mu_lambda: no boundary minimizer with J+ = J^+(mu0) at mu = " + num(lo) +
                            " (J+ = " + num(jlo) + ", target " + num(J_mu0) + ", delta_J " + num(dJ) + ")");
  Vector w = normalize_lp(s, blo->v.values().cwiseAbs());
  const Moments m = detail::moments(s, w);
  out.mu_lambda = m.G / m.L;
  lo = out.mu_lambda;
  out.w = NodalFunction(s.mesh_ptr(), std::move(w));
  out.J_boundary = detail::j_plus_from(s.p(), s.gamma(), m.H(lambda), m.F);
  out.J_mu_lambda = std::min(J_mu0, out.J_boundary);
  out.H_mu_lambda = m.H(lo);
  out.H_mu0 = m.H(mu0);
  if (std::abs(out.H_mu_lambda) > 1e-8 * lo)
    throw SolverFailure("boundary-minimizer-not-found", "find_mu_lambda: |H_mu(w)| = " +
                                                            num(std::abs(out.H_mu_lambda)) +
                                                            " exceeds tolerance");
  // the boundary minimizer need not be unique; record how far the starts disagree
  for (const auto& st : boundary_starts(ctx, lo)) {
    try {
      out.multistart_m.push_back(boundary_solve(ctx, lo, st, 0.0).m);
    } catch (const std::exception&) {
    }
  }
  if (!out.multistart_m.empty()) {
    const auto [a, b] = std::minmax_element(out.multistart_m.begin(), out.multistart_m.end());
    out.multistart_spread = *b - *a;
  }
  return out;
}

struct PathPolyline {
  std::vector<NodalFunction> nodes;  // M + 1 nodes, nodes.front() = u, nodes.back() = w
  std::vector<double> energies;

  int M() const noexcept { return static_cast<int>(nodes.size()) - 1; }
  const NodalFunction& endpoint_lo() const { return nodes.front(); }
  const NodalFunction& endpoint_hi() const { return nodes.back(); }
};

/// nodes[k] = [(1 - t_k) u^p + t_k w^p]^{1/p} nodally, t_k = k / M.
inline PathPolyline initial_path(const NodalFunction& u, const NodalFunction& w, int M, double p) {
  require_same_mesh(u.mesh(), w.mesh(), "initial_path");
  if (M < 8) throw InvalidArgument("initial_path: requires M >= 8");
  if (!(p > 1.0)) throw InvalidArgument("initial_path: requires p > 1");
  if (!(u.values().minCoeff() > 0.0))
    throw InvalidArgument("violated-positivity: u has a nonpositive interior node");
  if (w.values().minCoeff() < 0.0) throw InvalidArgument("violated-positivity: w has a negative interior node");
  PathPolyline path;
  const Vector up = u.values().array().pow(p).matrix();
  const Vector wp = w.values().array().pow(p).matrix();
  for (int k = 0; k <= M; ++k) {
    if (k == 0) {
      path.nodes.push_back(u);
    } else if (k == M) {
      path.nodes.push_back(w);
    } else {
      const double t = static_cast<double>(k) / M;
      Vector v = ((1.0 - t) * up + t * wp).array().pow(1.0 / p).matrix();
      path.nodes.emplace_back(u.mesh_ptr(), std::move(v));
    }
  }
  return path;
}

struct DeformOptions {
  double mu0 = 0.0;
  double J_mu0 = 0.0;       // lower end of the sandwich
  double tol = 1e-9;        // relative residual of the max node to hand over to Newton
  double switch_tol = 1e-3; // relative perpendicular residual ending the descent stage
  int max_iter = 20000;
  int window = 2;           // nodes k* - window .. k* + window move
  int max_M = 257;
  bool project_to_fiber = true;
  NewtonOptions newton{};
};

struct CrossingRecord {
  bool sign_change = false;
  double min_energy = 0.0;
  double max_energy = 0.0;
};

struct MountainPassResult {
  double c_lambda = 0.0;
  NodalFunction u_bar;
  double residual = 0.0;
  PathPolyline path_final;
  double crossing_energy = 0.0;      // max of Phi over the H_mu0 = 0 crossings of the final path
  double crossing_energy_min = 0.0;  // min over those crossings
  int iterations = 0;
  bool converged = false;
  std::string status;
  bool sign_change_every_iteration = true;
  double min_crossing_energy_all = std::numeric_limits<double>::infinity();  // over all iterations
  std::vector<double> max_energy_history;
  double max_node_norm_min = 0.0;  // ||u_n||_K along the max-node sequence
  double max_node_norm_max = 0.0;
  int refinements = 0;
  int max_index = 0;
};

namespace detail {

inline CrossingRecord path_crossings(const ProblemSpec& s, double lambda, double mu0, const std::vector<Vector>& X) {
  CrossingRecord rec;
  rec.min_energy = std::numeric_limits<double>::infinity();
  rec.max_energy = -std::numeric_limits<double>::infinity();
  auto Hm = [&](const Vector& v) { return moments(s, v).H(mu0); };
  double h_prev = Hm(X[0]);
  for (std::size_t k = 0; k + 1 < X.size(); ++k) {
    const double h_next = Hm(X[k + 1]);
    if ((h_prev < 0.0) != (h_next < 0.0)) {
      rec.sign_change = true;
      double a = 0.0, b = 1.0, ha = h_prev;
      for (int it = 0; it < 60; ++it) {
        const double t = 0.5 * (a + b);
        const double ht = Hm((1.0 - t) * X[k] + t * X[k + 1]);
        if ((ht < 0.0) == (ha < 0.0))
          a = t, ha = ht;
        else
          b = t;
      }
      const double t = 0.5 * (a + b);
      const double e = energy(s, (1.0 - t) * X[k] + t * X[k + 1], lambda);
      rec.min_energy = std::min(rec.min_energy, e);
      rec.max_energy = std::max(rec.max_energy, e);
    }
    h_prev = h_next;
  }
  return rec;
}

/// Equal K-arclength redistribution of X[lo..hi] keeping X[lo], X[hi].
inline void redistribute(const StiffnessPreconditioner& P, std::vector<Vector>& X, int lo, int hi) {
  if (hi - lo < 2) return;
  std::vector<double> arc{0.0};
  for (int k = lo; k < hi; ++k) arc.push_back(arc.back() + P.energy_norm(X[k + 1] - X[k]));
  const double total = arc.back();
  if (!(total > 0.0)) return;
  std::vector<Vector> Y(X.begin() + lo, X.begin() + hi + 1);
  std::size_t seg = 0;
  for (int k = lo + 1; k < hi; ++k) {
    const double target = total * (k - lo) / (hi - lo);
    while (seg + 2 < arc.size() && arc[seg + 1] < target) ++seg;
    const double len = arc[seg + 1] - arc[seg];
    const double t = len > 0.0 ? std::clamp((target - arc[seg]) / len, 0.0, 1.0) : 0.0;
    X[k] = (1.0 - t) * Y[seg] + t * Y[seg + 1];
  }
}

inline std::vector<Vector> refine_path(const std::vector<Vector>& X) {
  std::vector<Vector> Y;
  for (std::size_t k = 0; k + 1 < X.size(); ++k) {
    Y.push_back(X[k]);
    Y.push_back(0.5 * (X[k] + X[k + 1]));
  }
  Y.push_back(X.back());
  return Y;
}

}  // namespace detail

/// Polyline mountain-pass deformation: window nodes around the max descend
/// along the residual component orthogonal to the path, nodes are clamped at
/// zero and redistributed by equal K-arclength on either side of the max.
/// Once the orthogonal residual at the max is small, a climbing-image stage
/// and Newton's method finish the saddle point.
inline MountainPassResult mountain_pass_deform(const ProblemSpec& s, double lambda, const PathPolyline& path,
                                               const DeformOptions& opt) {
  const int M0 = path.M();
  if (M0 < 2) throw InvalidArgument("mountain_pass_deform: path needs at least 3 nodes");
  for (const auto& n : path.nodes) {
    s.require_on_mesh(n, "mountain_pass_deform");
    if (n.values().minCoeff() < 0.0) throw InvalidArgument("mountain_pass_deform: path nodes must be nonnegative");
  }
  const auto& P = s.preconditioner();
  std::vector<Vector> X;
  for (const auto& n : path.nodes) X.push_back(n.values());
  const Vector x_lo = X.front(), x_hi = X.back();
  MountainPassResult res;

  auto on_fiber = [&](Vector& v) {
    const Moments m = detail::moments(s, v);
    const double H = m.H(lambda);
    if (H < 0.0 && m.F < 0.0) v *= std::pow(H / m.F, 1.0 / (s.gamma() - s.p()));
  };
  if (opt.project_to_fiber)
    for (int k = 1; k < M0; ++k) on_fiber(X[k]);

  std::vector<double> E(X.size());
  auto energies = [&] {
    E.resize(X.size());
    for (std::size_t k = 0; k < X.size(); ++k) E[k] = detail::energy(s, X[k], lambda);
  };
  auto argmax = [&] {
    int k = 0;
    for (int i = 1; i < static_cast<int>(E.size()); ++i)
      if (E[i] > E[k]) k = i;
    return k;
  };
  auto tangent = [&](int k) {
    Vector t = X[k + 1] - X[k - 1];
    const double n = P.energy_norm(t);
    return n > 0.0 ? Vector(t / n) : t;
  };
  auto check_crossings = [&] {
    const CrossingRecord cr = detail::path_crossings(s, lambda, opt.mu0, X);
    if (!cr.sign_change) res.sign_change_every_iteration = false;
    else res.min_crossing_energy_all = std::min(res.min_crossing_energy_all, cr.min_energy);
    return cr;
  };

  energies();
  check_crossings();
  std::vector<double> step(X.size(), 0.5);
  res.max_node_norm_min = std::numeric_limits<double>::infinity();
  int it = 0;
  int kstar = argmax();
  bool stage1_done = false;
  for (; it < opt.max_iter; ++it) {
    const int M = static_cast<int>(X.size()) - 1;
    kstar = argmax();
    res.max_energy_history.push_back(E[kstar]);
    if (kstar == 0 || kstar == M) {
      res.status = "path-collapse";
      break;
    }
    const double nk = P.energy_norm(X[kstar]);
    res.max_node_norm_min = std::min(res.max_node_norm_min, nk);
    res.max_node_norm_max = std::max(res.max_node_norm_max, nk);
    // perpendicular residual at the max
    Vector g;
    detail::energy(s, X[kstar], lambda, &g);
    const Vector tk = tangent(kstar);
    const Vector z = P.apply(g);
    const Vector zperp = z - g.dot(tk) * tk;
    const double rperp = P.energy_norm(zperp) / std::max(1.0, nk);
    if (rperp <= opt.switch_tol) {
      const bool flat = std::abs(E[kstar - 1] - E[kstar]) <= 2.0 * opt.tol * std::max(1.0, std::abs(E[kstar])) ||
                        std::abs(E[kstar + 1] - E[kstar]) <= 2.0 * opt.tol * std::max(1.0, std::abs(E[kstar]));
      if (flat && 2 * M <= opt.max_M) {
        X = detail::refine_path(X);
        step.assign(X.size(), 0.5);
        energies();
        ++res.refinements;
        continue;
      }
      stage1_done = true;
      break;
    }
    const int lo = std::max(1, kstar - opt.window), hi = std::min(M - 1, kstar + opt.window);
    for (int k = lo; k <= hi; ++k) {
      Vector gk;
      const double ek = detail::energy(s, X[k], lambda, &gk);
      const Vector t = tangent(k);
      const Vector zk = P.apply(gk);
      const Vector d = -(zk - gk.dot(t) * t);
      const double slope = gk.dot(d);
      if (!(slope < 0.0)) continue;
      double a = step[k];
      bool ok = false;
      for (int ls = 0; ls < 30; ++ls) {
        Vector xn = (X[k] + a * d).cwiseMax(0.0);
        const double en = detail::energy(s, xn, lambda);
        if (std::isfinite(en) && en <= ek + 1e-4 * a * slope) {
          X[k] = std::move(xn);
          E[k] = en;
          ok = true;
          break;
        }
        a *= 0.5;
      }
      step[k] = ok ? std::min(1.0, 1.5 * a) : a;
    }
    kstar = argmax();
    detail::redistribute(P, X, 0, kstar);
    detail::redistribute(P, X, kstar, M);
    X.front() = x_lo;
    X.back() = x_hi;
    energies();
    check_crossings();
  }
  res.iterations = it;
  res.max_index = kstar;
  if (!stage1_done && res.status.empty()) res.status = "non-convergence";
  if (stage1_done) {
    // climbing image at the max node: ascend along the path tangent, descend
    // orthogonally; the neighbours stay fixed.
    const int k = kstar;
    Vector x = X[k];
    double a = 0.5;
    const Vector t = tangent(k);
    for (int c = 0; c < 2000; ++c) {
      Vector g;
      detail::energy(s, x, lambda, &g);
      const double r0 = P.dual_norm(g);
      if (r0 <= opt.tol * std::max(1.0, P.energy_norm(x))) break;
      const Vector z = P.apply(g);
      const Vector d = -(z - 2.0 * g.dot(t) * t);
      bool ok = false;
      for (int ls = 0; ls < 30; ++ls) {
        Vector xn = (x + a * d).cwiseMax(0.0), gn;
        detail::energy(s, xn, lambda, &gn);
        if (P.dual_norm(gn) < r0) {
          x = std::move(xn);
          ok = true;
          break;
        }
        a *= 0.5;
      }
      if (!ok) break;
      a = std::min(1.0, 1.5 * a);
      Vector gg;
      detail::energy(s, x, lambda, &gg);
      if (P.dual_norm(gg) <= 1e-6 * std::max(1.0, P.energy_norm(x))) break;
    }
    X[k] = x;
    energies();
    res.converged = true;
    res.status = "converged";
  }
  const CrossingRecord fin = check_crossings();
  res.crossing_energy = fin.max_energy;
  res.crossing_energy_min = fin.min_energy;
  kstar = argmax();
  res.max_index = kstar;
  res.c_lambda = E[kstar];
  Vector g;
  detail::energy(s, X[kstar], lambda, &g);
  res.residual = P.dual_norm(g);
  res.u_bar = NodalFunction(s.mesh_ptr(), X[kstar]);
  for (const auto& x : X) res.path_final.nodes.emplace_back(s.mesh_ptr(), x);
  res.path_final.energies = E;
  return res;
}

/// Newton polish of a near-critical point. Fails when the iteration lands
/// on zero or on the local minimizer `u_min`.
inline BranchPoint polish_critical_point(const ProblemSpec& s, double lambda, const NodalFunction& u0,
                                         const NodalFunction* u_min = nullptr, const NewtonOptions& opt = {}) {
  s.require_on_mesh(u0, "polish_critical_point");
  const auto& P = s.preconditioner();
  const double n0 = P.energy_norm(u0.values());
  NewtonResult nr = newton_polish(s, lambda, u0.values(), opt);
  const double n1 = P.energy_norm(nr.u);
  if (n1 <= 1e-6 * std::max(n0, 1e-300))
    throw SolverFailure("converged-to-zero", "polish_critical_point: iterate collapsed to zero (||u||_K = " +
                                                 num(n1) + ")");
  if (u_min) {
    const double d = P.energy_norm(nr.u - u_min->values());
    if (d <= 1e-6 * P.energy_norm(u_min->values()))
      throw SolverFailure("converged-to-local-min",
                          "polish_critical_point: converged to the local minimizer (distance " + num(d) +
                              ")");
  }
  if (!nr.converged)
    throw ConvergenceError("polish_critical_point: Newton did not converge (residual " +
                           num(nr.residual) + ", " + nr.status + ")");
  BranchPoint bp;
  bp.lambda = lambda;
  bp.kind = BranchKind::mountain_pass;
  bp.residual = nr.residual;
  bp.u = NodalFunction(s.mesh_ptr(), std::move(nr.u));
  const Moments m = detail::moments(s, bp.u.values());
  bp.energy = m.H(lambda) / s.p() - m.F / s.gamma();
  bp.fiber_dd = (s.p() - 1.0) * m.H(lambda) - (s.gamma() - 1.0) * m.F;
  bp.min_u = bp.u.min_interior();
  bp.R = m.G / m.L;
  return bp;
}

}  // namespace plap
