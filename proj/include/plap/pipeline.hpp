#pragma once

// End-to-end run: support classification, eigenpair, hypothesis checks,
// lambda*, mu0, the local-minimum branch and the mountain-pass branch.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plap/config.hpp"
#include "plap/mountain_pass.hpp"
#include "plap/weights.hpp"

namespace plap {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;   // measured quantity (margin, max error, ...)
  double threshold = 0.0;  // bound it is compared against
  std::string detail;
};

struct MountainPassRow {
  double lambda = 0.0;
  bool converged = false;
  std::string error;  // empty on success
  double mu_lambda = 0.0;
  double J_mu0 = 0.0;
  double H_mu0_w = 0.0;
  double boundary_multistart_spread = 0.0;
  double c_lambda = 0.0;
  double crossing_energy = 0.0;
  double crossing_energy_min = 0.0;
  double deform_residual = 0.0;
  int iterations = 0;
  int refinements = 0;
  int path_nodes = 0;
  bool sign_change_every_iteration = false;
  double norm_min = 0.0, norm_max = 0.0;
  double max_energy_increase = 0.0;  // largest rise of the path max between iterations
  BranchPoint point;                 // the polished critical point
};

struct SolverReport {
  RunConfig config;
  SupportClassification support;
  double lambda1 = 0.0;
  double eigen_residual = 0.0;
  double F_phi1 = 0.0;
  F1Check f1;
  bool has_extreme = false;
  ExtremeValueResult extreme;
  bool has_mu0 = false;
  Mu0Selection mu0;
  bool has_branch = false;
  BranchTable branch;
  std::vector<double> lambda_grid;
  std::vector<MountainPassRow> mountain_pass;
  std::vector<CheckResult> checks;
  std::map<std::string, double> timings;  // seconds; kept out of report.json
};

enum class Stage { check, eig, lambda_star, branch, mountain_pass, all };

/// Builds the discrete problem from the config.
inline ProblemSpec make_problem(const RunConfig& cfg) {
  const auto& pr = cfg.problem;
  MeshPtr mesh = build_mesh(pr.a, pr.b, cfg.mesh.n, cfg.mesh.quad_order);
  const auto& w = pr.weight;
  std::optional<WeightField> f;
  if (w.name == "cos2pi") f = cos2pi_weight(mesh, w.amplitude);
  else if (w.name == "step3") f = step3_weight(mesh, w.plus, w.minus);
  else if (w.name == "constant") f = constant_weight(mesh, w.value);
  else if (w.name == "custom") f = load_weight_samples(mesh, w.file);
  else throw ConfigValidationError("problem.weight", "unknown weight profile '" + w.name + "'");
  return ProblemSpec(pr.p, pr.gamma, std::move(*f), pr.support_threshold);
}

/// Lambda grid for the branch. In auto mode the interior points need Lambda
/// and are added by run_pipeline once it is known.
inline std::vector<double> base_lambda_grid(const RunConfig& cfg, double lambda1, double lambda_star) {
  const auto& g = cfg.lambda_grid;
  std::vector<double> out;
  switch (g.mode) {
    case GridMode::list: out = g.values; break;
    case GridMode::range:
      for (int k = 0; k < g.count; ++k)
        out.push_back(g.count == 1 ? g.start : g.start + (g.stop - g.start) * k / (g.count - 1));
      break;
    case GridMode::automatic:
      out.push_back(lambda_star);
      for (int k = 0; k < g.near_count; ++k) out.push_back(lambda_star * (1.0 + g.near_offset * std::ldexp(1.0, -k)));
      for (int k = 1; k <= g.below_count; ++k)
        out.push_back(lambda1 + (lambda_star - lambda1) * k / (g.below_count + 1));
      break;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline MountainPassRow run_mountain_pass(const BranchContext& ctx, const Mu0Selection& sel, const BranchPoint& bp,
                                         const RunConfig& cfg) {
  const ProblemSpec& s = ctx.spec;
  MountainPassRow row;
  row.lambda = bp.lambda;
  try {
    MuLambdaOptions mo;
    mo.tol = cfg.solver.mp_tol;
    const MuLambdaResult ml = find_mu_lambda(ctx, bp.lambda, sel.mu0, bp.J_reduced, mo);
    row.mu_lambda = ml.mu_lambda;
    row.J_mu0 = ml.J_mu0;
    row.H_mu0_w = ml.H_mu0;
    row.boundary_multistart_spread = ml.multistart_spread;
    const FiberPoint fw = fiber_s_plus(s, ml.w, bp.lambda);
    const PathPolyline path = initial_path(bp.u, ml.w.scaled(fw.s_plus), cfg.path.nodes - 1, s.p());
    DeformOptions d;
    d.mu0 = sel.mu0;
    d.J_mu0 = ml.J_mu0;
    d.tol = cfg.solver.mp_tol;
    d.window = cfg.path.window;
    d.max_iter = cfg.path.max_iter;
    const MountainPassResult mp = mountain_pass_deform(s, bp.lambda, path, d);
    row.crossing_energy = mp.crossing_energy;
    row.crossing_energy_min = mp.min_crossing_energy_all;
    row.deform_residual = mp.residual;
    row.iterations = mp.iterations;
    row.refinements = mp.refinements;
    row.path_nodes = mp.path_final.M() + 1;
    row.sign_change_every_iteration = mp.sign_change_every_iteration;
    row.norm_min = mp.max_node_norm_min;
    row.norm_max = mp.max_node_norm_max;
    for (std::size_t i = 1; i < mp.max_energy_history.size(); ++i)
      row.max_energy_increase =
          std::max(row.max_energy_increase, mp.max_energy_history[i] - mp.max_energy_history[i - 1]);
    if (!mp.converged) throw SolverFailure(mp.status, "mountain_pass_deform: " + mp.status);
    NewtonOptions no = ctx.opt.newton;
    row.point = polish_critical_point(s, bp.lambda, mp.u_bar, &bp.u, no);
    row.point.mu_used = ml.mu_lambda;
    row.c_lambda = row.point.energy;
    row.converged = true;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

namespace detail {

inline void add_check(SolverReport& r, std::string name, bool ok, double measured, double threshold,
                      std::string detail = {}) {
  r.checks.push_back({std::move(name), ok, measured, threshold, std::move(detail)});
}

inline void invariant_checks(SolverReport& r, const ProblemSpec& s) {
  if (r.has_extreme) {
    const auto& x = r.extreme;
    const double upper = x.certificate.upper_bound;
    add_check(r, "lambda_star_above_lambda1", x.lambda_star > r.lambda1, x.lambda_star - r.lambda1, 0.0);
    if (std::isfinite(upper))
      add_check(r, "lambda_star_below_zero_plus_bound", x.lambda_star < upper + r.config.solver.lstar_tol * upper,
                upper - x.lambda_star, 0.0);
    const double scale = std::max(1.0, x.lambda_star);
    add_check(r, "phi1_star_F_zero", std::abs(x.F_at_min) <= 1e-6 * scale, std::abs(x.F_at_min), 1e-6 * scale);
    add_check(r, "phi1_star_H_zero", std::abs(x.H_at_min) <= 1e-6 * scale, std::abs(x.H_at_min), 1e-6 * scale);
    add_check(r, "phi1_star_positive", x.phi1_star.min_interior() > 0.0, x.phi1_star.min_interior(), 0.0);
  }
  if (!r.has_branch) return;
  double worst_res = 0.0, worst_min = std::numeric_limits<double>::infinity(), worst_nehari = 0.0, worst_dd = 1e300;
  std::vector<const BranchPoint*> above;
  for (const auto& p : r.branch.points) {
    worst_res = std::max(worst_res, p.residual);
    worst_min = std::min(worst_min, p.min_u);
    worst_dd = std::min(worst_dd, p.fiber_dd);
    const Moments m = moments(s, p.u.values());
    worst_nehari = std::max(worst_nehari, std::abs(m.H(p.lambda) - m.F) / std::max(1.0, std::abs(m.F)));
    if (p.lambda >= r.branch.lambda_star) above.push_back(&p);
  }
  if (!r.branch.points.empty()) {
    add_check(r, "local_min_residual", worst_res <= 1e-6, worst_res, 1e-6);
    add_check(r, "local_min_positive", worst_min > 0.0, worst_min, 0.0);
    add_check(r, "local_min_fiber_dd_positive", worst_dd > 0.0, worst_dd, 0.0);
    add_check(r, "local_min_nehari_identity", worst_nehari <= 1e-8, worst_nehari, 1e-8);
  }
  // energies non-decreasing as lambda decreases to lambda*
  double worst_rise = 0.0;
  for (std::size_t i = 1; i < above.size(); ++i)
    worst_rise = std::max(worst_rise, above[i]->energy - above[i - 1]->energy);
  if (above.size() >= 2) add_check(r, "local_min_monotone_in_lambda", worst_rise <= 1e-8, worst_rise, 1e-8);
  double worst_gap = std::numeric_limits<double>::infinity();
  bool all_sign = true;
  int converged = 0;
  for (const auto& row : r.mountain_pass) {
    if (!row.converged) continue;
    ++converged;
    worst_gap = std::min({worst_gap, row.c_lambda - row.J_mu0, -row.c_lambda});
    all_sign = all_sign && row.sign_change_every_iteration;
  }
  if (converged > 0) {
    add_check(r, "mountain_pass_sandwich", worst_gap > 0.0, worst_gap, 0.0, "min over rows of c - J(mu0) and -c");
    add_check(r, "mountain_pass_crossing_every_iteration", all_sign, all_sign ? 1.0 : 0.0, 1.0);
  }
}

}  // namespace detail

/// Runs the stages up to `stop`. Hypothesis failures throw HypothesisError;
/// per-lambda failures are recorded and the run continues.
inline SolverReport run_pipeline(const RunConfig& cfg, Stage stop = Stage::all) {
  using clock = std::chrono::steady_clock;
  SolverReport r;
  r.config = cfg;
  auto t0 = clock::now();
  auto lap = [&](const char* name) {
    const auto t = clock::now();
    r.timings[name] = std::chrono::duration<double>(t - t0).count();
    t0 = t;
  };
  const ProblemSpec s = make_problem(cfg);
  r.support = s.support();
  EigenOptions eo;
  eo.tol = cfg.solver.eigen_tol;
  eo.seed = cfg.run.seed;
  EigenResult eig = first_eigenpair(s, {}, eo);
  r.lambda1 = eig.lambda1;
  r.eigen_residual = eig.residual;
  r.F_phi1 = F_weighted(s, eig.phi1);
  lap("eig");
  if (stop == Stage::eig) return r;
  const double F_scale = detail::power_integral(s.mesh(), eig.phi1.values(), nullptr, s.gamma(), nullptr) *
                         s.weight().samples().cwiseAbs().maxCoeff();
  if (!(r.F_phi1 < -1e-8 * F_scale))
    throw HypothesisError("F_phi1_negative", "F(phi1) >= 0: existence hypotheses unmet (F(phi1) = " + num(r.F_phi1) + ")");
  r.f1 = check_f1_assumption(s, eo);
  lap("check");
  if (r.f1.status == F1Status::violated)
    throw HypothesisError("f1_spectral_gap", "(f1) fails: lambda1(int(zero u plus)) = " + num(r.f1.lambda_zero_plus) +
                                                 " is not below lambda1(int(zero)) = " + num(r.f1.lambda_zero));
  if (stop == Stage::check) return r;

  ExtremeValueOptions xo;
  xo.tol = cfg.solver.lstar_tol;
  xo.eigen = eo;
  xo.seed = cfg.run.seed;
  r.extreme = extreme_value(s, xo, &eig);
  r.has_extreme = true;
  lap("lambda_star");
  if (stop == Stage::lambda_star) {
    detail::invariant_checks(r, s);
    return r;
  }

  BranchOptions bo;
  bo.inner_tol = cfg.solver.min_tol;
  bo.boundary_margin = cfg.solver.tol_boundary;
  bo.restarts = cfg.solver.restarts;
  bo.seed = cfg.run.seed;
  const double l1 = eig.lambda1, ls = r.extreme.lambda_star;
  if (!cfg.mu_grid.values.empty()) {
    bo.mu_fractions.clear();
    for (double mu : cfg.mu_grid.values) {
      if (!(mu > l1 && mu < ls))
        throw InvalidArgument("mu_grid.values: " + num(mu) + " is outside (lambda1, lambda*) = (" + num(l1) + ", " +
                              num(ls) + ")");
      bo.mu_fractions.push_back((mu - l1) / (ls - l1));
    }
  } else {
    bo.mu_fractions = cfg.mu_grid.fractions;
  }
  BranchContext ctx{s, eig, r.extreme, bo};
  r.mu0 = select_mu0(ctx);
  r.has_mu0 = true;
  lap("mu0");
  r.lambda_grid = base_lambda_grid(cfg, l1, ls);
  r.branch = continue_branch(ctx, r.mu0, r.lambda_grid);
  if (cfg.lambda_grid.mode == GridMode::automatic && r.branch.Lambda_detected && cfg.lambda_grid.interior_count > 0) {
    const int N = cfg.lambda_grid.interior_count;
    for (int k = 1; k <= N; ++k) r.lambda_grid.push_back(ls + (r.branch.Lambda - ls) * k / (N + 1));
    std::sort(r.lambda_grid.begin(), r.lambda_grid.end());
    r.lambda_grid.erase(std::unique(r.lambda_grid.begin(), r.lambda_grid.end()), r.lambda_grid.end());
    r.branch = continue_branch(ctx, r.mu0, r.lambda_grid);
  }
  r.has_branch = true;
  lap("branch");
  if (stop == Stage::branch) {
    detail::invariant_checks(r, s);
    return r;
  }

  std::vector<const BranchPoint*> todo;
  for (const auto& p : r.branch.points)
    if (p.lambda >= ls * (1.0 + cfg.path.min_offset) && p.lambda < r.branch.Lambda && p.lambda > ls) todo.push_back(&p);
  r.mountain_pass.resize(todo.size());
  const std::size_t T = static_cast<std::size_t>(cfg.run.threads);
  for (std::size_t base = 0; base < todo.size(); base += T) {
    std::vector<std::future<MountainPassRow>> jobs;
    for (std::size_t i = base; i < std::min(todo.size(), base + T); ++i)
      jobs.push_back(std::async(T > 1 ? std::launch::async : std::launch::deferred,
                                [&, i] { return run_mountain_pass(ctx, r.mu0, *todo[i], cfg); }));
    for (std::size_t i = 0; i < jobs.size(); ++i) r.mountain_pass[base + i] = jobs[i].get();
  }
  lap("mountain_pass");
  detail::invariant_checks(r, s);
  return r;
}

}  // namespace plap
