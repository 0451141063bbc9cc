// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "plap/plap.hpp"

using namespace plap;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "!") + what;
  }
};

std::string fmt(const char* f, double a) {
  char b[96];
  std::snprintf(b, sizeof b, f, a);
  return b;
}
std::string fmt(const char* f, double a, double c) {
  char b[128];
  std::snprintf(b, sizeof b, f, a, c);
  return b;
}

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  if (!o.pass) ++failures;
  std::printf("%s criterion %2d %-28s %6.1fs  %s\n", o.pass ? "PASS" : "FAIL", id, name, seconds_since(t0),
              o.detail.c_str());
  std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), v.size()); }

const fs::path config_dir = PLAP_CONFIG_DIR;

struct DefaultRun {
  RunConfig cfg;
  SolverReport report;
  double seconds = 0.0;
};

const DefaultRun& default_run() {
  static const DefaultRun run = [] {
    DefaultRun d;
    d.cfg = load_config((config_dir / "default.ini").string());
    const auto t0 = Clock::now();
    d.report = run_pipeline(d.cfg);
    d.seconds = seconds_since(t0);
    return d;
  }();
  return run;
}

Outcome eigen_accuracy() {
  Outcome o;
  for (double p : {2.0, 3.0}) {
    const auto t0 = Clock::now();
    const ProblemSpec s(p, p + 2.0, cos2pi_weight(build_mesh(0, 1, 512)));
    const double l1 = first_eigenpair(s).lambda1;
    const double dt = seconds_since(t0);
    const double exact = oracle::lambda1_closed(p);
    const double rel = std::abs(l1 - exact) / exact;
    const double bound = p == 2.0 ? 1e-3 : 5e-3;
    o.require(rel <= bound && dt < 10.0,
              "p=" + fmt("%g", p) + " rel err " + fmt("%.2e", rel) + " in " + fmt("%.2fs", dt));
  }
  return o;
}

Outcome extreme_certificate() {
  Outcome o;
  auto one = [&](const std::string& label, const SolverReport& r, double tol) {
    const auto& x = r.extreme;
    const ProblemSpec s = make_problem(r.config);
    const double ls = x.lambda_star;
    const double bound = x.certificate.upper_bound;
    const bool whole = !std::isfinite(bound);
    const Moments m = detail::moments(s, x.phi1_star.values());
    const double Fm = m.F, Hm = m.H(ls);
    o.require(r.lambda1 + 10 * tol < ls, label + " lambda*-lambda1 " + fmt("%.3e", ls - r.lambda1));
    o.require(whole || ls < bound + tol, label + " bound-lambda* " + fmt("%.3e", bound - ls));
    o.require(std::abs(Fm) <= 1e-6 && std::abs(Hm) <= 1e-6,
              label + " |F|,|H| " + fmt("%.1e,%.1e", std::abs(Fm), std::abs(Hm)));
    o.require(x.phi1_star.min_interior() > 0.0, label + " min phi1* " + fmt("%.2e", x.phi1_star.min_interior()));
  };
  const auto& d = default_run();
  one("default", d.report, d.cfg.solver.lstar_tol);
  RunConfig sec = load_config((config_dir / "secondary.ini").string());
  one("secondary", run_pipeline(sec, Stage::lambda_star), sec.solver.lstar_tol);
  return o;
}

Outcome fibering_identities() {
  Outcome o;
  const double p = 2.0, gamma = 4.0;
  const ProblemSpec s(p, gamma, cos2pi_weight(build_mesh(0, 1, 256)));
  const double l1 = first_eigenpair(s).lambda1;
  auto g = oracle::rng(2024);
  std::uniform_real_distribution<double> Lam(1.05 * l1, 30.0), A(0.05, 20.0), Sc(0.1, 10.0);
  double homog = 0, nehari = 0, stat = 0, dd_err = 0, dd_min = std::numeric_limits<double>::infinity();
  int count = 0;
  while (count < 1000) {
    const double lam = Lam(g);
    const Vector shape = to_vector(oracle::random_sine_series(g, 256, 0.6));
    const NodalFunction v(s.mesh_ptr(), shape * A(g));
    const Moments mv = detail::moments(s, v.values());
    if (!(mv.H(lam) < 0 && mv.F < 0)) continue;
    ++count;
    const FiberPoint fp = fiber_s_plus(s, v, lam);
    const double J2 = fiber_s_plus(s, v.scaled(Sc(g)), lam).J_plus;
    homog = std::max(homog, std::abs(J2 - fp.J_plus) / std::abs(fp.J_plus));
    const NodalFunction u = v.scaled(fp.s_plus);
    const Moments mu = detail::moments(s, u.values());
    nehari = std::max(nehari, std::abs(mu.H(lam) - mu.F) / std::max(1.0, std::abs(mu.F)));
    // d/ds Phi(s v) = s^{p-1} H(v) - s^{gamma-1} F(v) at s+
    const double sp = fp.s_plus, H = mv.H(lam), F = mv.F;
    const double d1 = std::pow(sp, p - 1) * H - std::pow(sp, gamma - 1) * F;
    stat = std::max(stat, std::abs(d1) / std::abs(std::pow(sp, p - 1) * H));
    const double dd = fiber_second_derivative(s, v, lam);
    const double closed = (p - gamma) * std::pow(sp, p - 2) * H;
    dd_err = std::max(dd_err, std::abs(dd - closed) / std::abs(closed));
    dd_min = std::min(dd_min, closed);
  }
  o.require(homog <= 1e-12, "homogeneity " + fmt("%.1e", homog));
  o.require(nehari <= 1e-10, "Nehari " + fmt("%.1e", nehari));
  o.require(stat <= 1e-12, "stationarity " + fmt("%.1e", stat));
  o.require(dd_err <= 1e-12 && dd_min > 0.0, "second derivative err " + fmt("%.1e", dd_err));
  return o;
}

Outcome branch_points() {
  Outcome o;
  const auto& d = default_run();
  const auto& r = d.report;
  const double tol = std::max(d.cfg.solver.min_tol, d.cfg.solver.mp_tol);
  const double ls = r.extreme.lambda_star, Lam = r.branch.Lambda;
  int good = 0, total = 0;
  std::string bad;
  for (const auto& row : r.mountain_pass) {
    ++total;
    if (!(row.lambda > ls && row.lambda < Lam)) continue;
    const BranchPoint* lm = nullptr;
    for (const auto& p : r.branch.points)
      if (p.lambda == row.lambda) lm = &p;
    bool ok = row.converged && lm;
    if (ok) {
      const double phi_u = lm->energy, c = row.c_lambda;
      ok = lm->residual <= 1e-6 && row.point.residual <= 1e-6 && lm->min_u > 0 && row.point.min_u > 0 &&
           std::abs(row.J_mu0 - phi_u) <= 1e-8 * std::abs(phi_u) && c - phi_u > 10 * tol && -c > 10 * tol;
    }
    if (ok) ++good;
    else bad += " " + fmt("%.4f", row.lambda);
  }
  o.require(good >= 5, std::to_string(good) + "/" + std::to_string(total) + " lambdas in (lambda*, Lambda)" +
                           (bad.empty() ? "" : " failing:" + bad));
  o.require(d.seconds < 300.0, "pipeline " + fmt("%.1fs", d.seconds) + " at n=" + std::to_string(d.cfg.mesh.n));
  return o;
}

Outcome monotone_limit() {
  Outcome o;
  const auto& r = default_run().report;
  const double ls = r.extreme.lambda_star;
  std::vector<const BranchPoint*> pts;
  const BranchPoint* at_star = nullptr;
  for (const auto& p : r.branch.points) {
    if (p.lambda > ls) pts.push_back(&p);
    if (p.lambda == ls) at_star = &p;
  }
  int violations = 0;
  double worst = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const double rise = pts[k]->energy - pts[k - 1]->energy;  // lambda increases with k
    worst = std::max(worst, rise);
    if (rise > 1e-8) ++violations;
  }
  o.require(pts.size() >= 8, std::to_string(pts.size()) + " points above lambda*");
  o.require(violations == 0, "max rise as lambda grows " + fmt("%.1e", worst));
  o.require(at_star != nullptr, "point at lambda*");
  if (at_star && !pts.empty()) {
    const double gap = std::abs(pts.front()->energy - at_star->energy);
    o.require(gap <= 1e-4, "limit gap " + fmt("%.1e", gap) + " at offset " + fmt("%.1e", pts.front()->lambda - ls));
  }
  return o;
}

Outcome sandwich() {
  Outcome o;
  const auto& r = default_run().report;
  int conv = 0, ok = 0, crossing = 0;
  double margin_lo = std::numeric_limits<double>::infinity(), margin_hi = margin_lo;
  for (const auto& row : r.mountain_pass) {
    if (!row.converged) continue;
    ++conv;
    margin_lo = std::min(margin_lo, row.c_lambda - row.J_mu0);
    margin_hi = std::min(margin_hi, -row.c_lambda);
    if (row.J_mu0 < row.c_lambda && row.c_lambda < 0) ++ok;
    if (row.sign_change_every_iteration) ++crossing;
  }
  o.require(conv > 0 && ok == conv, std::to_string(ok) + "/" + std::to_string(conv) + " in sandwich, margins " +
                                        fmt("%.3g, %.3g", margin_lo, margin_hi));
  o.require(conv > 0 && crossing == conv, std::to_string(crossing) + "/" + std::to_string(conv) + " crossing every iteration");
  return o;
}

Outcome path_convexity() {
  Outcome o;
  const int n = 128;
  auto mesh = build_mesh(0, 1, n);
  const oracle::P1 ref{0, 1, n};
  for (double p : {1.5, 2.0, 3.0}) {
    auto g = oracle::rng(77 + static_cast<int>(10 * p));
    long violations = 0, checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto a = oracle::random_positive(g, n), b = oracle::random_positive(g, n);
      const auto path = initial_path(NodalFunction(mesh, to_vector(a)), NodalFunction(mesh, to_vector(b)), 32, p);
      const auto ua = ref.full(a), wb = ref.full(b);
      for (int k = 0; k <= path.M(); ++k) {
        const double t = double(k) / path.M();
        const Vector& e = path.nodes[k].values();
        const auto ev = ref.full(std::vector<double>(e.data(), e.data() + e.size()));
        for (int el = 0; el < n; ++el, ++checked) {
          const double lhs = std::pow(std::abs(ev[el + 1] - ev[el]), p);
          const double rhs = (1 - t) * std::pow(std::abs(ua[el + 1] - ua[el]), p) +
                             t * std::pow(std::abs(wb[el + 1] - wb[el]), p);
          if (lhs > rhs * (1 + 1e-12)) ++violations;
        }
      }
    }
    o.require(violations == 0, "p=" + fmt("%g", p) + " " + std::to_string(violations) + " of " +
                                   std::to_string(checked) + " violated");
  }
  return o;
}

Outcome mu_continuity() {
  Outcome o;
  const auto& d = default_run();
  const ProblemSpec s = make_problem(d.cfg);
  const auto& r = d.report;
  BranchContext ctx{s, first_eigenpair(s), r.extreme, BranchOptions{}};
  const double lam = 22.0, l1 = ctx.lambda1();
  const auto interior = constrained_minimize(ctx, lam, r.mu0.mu0, {});
  const double span = interior.R - l1;
  double worst = 0.0;
  for (double frac : {0.25, 0.5, 0.7}) {
    const double mu = l1 + frac * span;
    const double J0 = constrained_infimum(ctx, lam, mu, {}).J;
    double prev = 0.0;
    for (int level = 0; level < 4; ++level) {
      const double delta = 0.2 * span * std::ldexp(1.0, -level);
      const double diff = std::abs(constrained_infimum(ctx, lam, mu + delta, {}).J - J0);
      if (level > 0) {
        const double ratio = diff / prev;
        worst = std::max(worst, std::isfinite(ratio) ? ratio : 1e300);
      }
      prev = diff;
    }
  }
  o.require(worst <= 0.75, "worst ratio " + fmt("%.4f", worst) + " at lambda=22, 3 mu in (lambda1, R(v_lambda))");
  return o;
}

Outcome gradient_check() {
  Outcome o;
  for (double p : {2.0, 3.0}) {
    const ProblemSpec s(p, p + 2.0, cos2pi_weight(build_mesh(0, 1, 256)));
    auto g = oracle::rng(9 + static_cast<int>(p));
    std::uniform_real_distribution<double> Lam(5.0, 40.0), A(0.2, 5.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Vector shape = to_vector(oracle::random_sine_series(g, 256, 0.8));
      const NodalFunction u(s.mesh_ptr(), shape * A(g));
      // white-noise directions at p = 2, smooth random directions otherwise
      const Vector eta = p == 2.0 ? to_vector(oracle::random_vector(g, 255))
                                  : to_vector(oracle::random_sine_series(g, 256, 2.0, 12));
      const double lam = Lam(g), t = 1e-5;
      const double fd = (detail::energy(s, u.values() + t * eta, lam) - detail::energy(s, u.values() - t * eta, lam)) /
                        (2 * t);
      const double an = energy_residual(s, u, lam).vector.values().dot(eta);
      worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1.0));
    }
    o.require(worst <= 1e-6, "p=" + fmt("%g", p) + " max rel err " + fmt("%.1e", worst));
  }
  return o;
}

Outcome determinism() {
  Outcome o;
  const auto& d = default_run();
  const SolverReport again = run_pipeline(d.cfg);
  const fs::path base = fs::temp_directory_path() / "plap_acceptance";
  fs::remove_all(base);
  emit_outputs(d.report, base / "a");
  emit_outputs(again, base / "b");
  o.require(slurp(base / "a" / "report.json") == slurp(base / "b" / "report.json"), "report.json identical");
  const auto rows = read_branch_csv(base / "a" / "branch.csv");
  const auto pts = all_points(d.report);
  bool exact = rows.size() == pts.size() && !rows.empty();
  for (std::size_t i = 0; exact && i < rows.size(); ++i)
    exact = rows[i].energy == pts[i]->energy && rows[i].lambda == pts[i]->lambda;
  o.require(exact, std::to_string(rows.size()) + " branch.csv rows round-trip exactly");
  fs::remove_all(base);
  return o;
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  report(1, "eigen accuracy", eigen_accuracy);
  report(2, "extreme-value certificate", extreme_certificate);
  report(3, "fibering identities", fibering_identities);
  report(4, "both branches", branch_points);
  report(5, "limit at lambda*", monotone_limit);
  report(6, "mountain-pass sandwich", sandwich);
  report(7, "path convexity", path_convexity);
  report(8, "mu-continuity", mu_continuity);
  report(9, "gradient correctness", gradient_check);
  report(10, "determinism and round-trip", determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
