#pragma once

// Output files of a run: report.json, branch.csv, solutions/, diagram.csv,
// timings.json, and an SVG rendering of the bifurcation diagram.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "plap/pipeline.hpp"

namespace plap {

using Json = nlohmann::json;

namespace detail {

inline Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json intervals_json(const IntervalList& list) {
  Json a = Json::array();
  for (const auto& iv : list) a.push_back({iv.lo, iv.hi});
  return a;
}

inline std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline Json point_json(const BranchPoint& p) {
  return {{"lambda", p.lambda},     {"kind", to_string(p.kind)}, {"energy", p.energy},
          {"fiber_dd", p.fiber_dd}, {"residual", p.residual},    {"min_u", p.min_u},
          {"mu_used", p.mu_used},   {"R", p.R},                  {"boundary_active", p.boundary_active}};
}

inline Json config_json(const RunConfig& c) {
  const auto& w = c.problem.weight;
  Json weight = {{"name", w.name}};
  if (w.name == "cos2pi") weight["amplitude"] = w.amplitude;
  if (w.name == "step3") weight["plus"] = w.plus, weight["minus"] = w.minus;
  if (w.name == "constant") weight["value"] = w.value;
  if (w.name == "custom") weight["file"] = w.file;
  return {{"problem",
           {{"p", c.problem.p},
            {"gamma", c.problem.gamma},
            {"a", c.problem.a},
            {"b", c.problem.b},
            {"weight", weight},
            {"support_threshold", c.problem.support_threshold}}},
          {"mesh", {{"n", c.mesh.n}, {"quad_order", c.mesh.quad_order}}},
          {"solver",
           {{"eigen_tol", c.solver.eigen_tol},
            {"lstar_tol", c.solver.lstar_tol},
            {"min_tol", c.solver.min_tol},
            {"mp_tol", c.solver.mp_tol},
            {"tol_boundary", c.solver.tol_boundary},
            {"restarts", c.solver.restarts}}},
          {"lambda_grid", {{"mode", to_string(c.lambda_grid.mode)}}},
          {"path", {{"nodes", c.path.nodes}, {"min_offset", c.path.min_offset}, {"window", c.path.window}}},
          {"run", {{"seed", c.run.seed}, {"threads", c.run.threads}}}};
}

}  // namespace detail

/// Every local-min and mountain-pass point, sorted by (lambda, kind).
inline std::vector<const BranchPoint*> all_points(const SolverReport& r) {
  std::vector<const BranchPoint*> out;
  if (r.has_branch)
    for (const auto& p : r.branch.points) out.push_back(&p);
  for (const auto& row : r.mountain_pass)
    if (row.converged) out.push_back(&row.point);
  std::stable_sort(out.begin(), out.end(), [](const BranchPoint* x, const BranchPoint* y) {
    return x->lambda != y->lambda ? x->lambda < y->lambda : x->kind < y->kind;
  });
  return out;
}

inline Json report_json(const SolverReport& r) {
  using detail::finite_or_null;
  Json j;
  j["config"] = detail::config_json(r.config);
  j["support"] = {{"plus", detail::intervals_json(r.support.plus)},
                  {"minus", detail::intervals_json(r.support.minus)},
                  {"zero", detail::intervals_json(r.support.zero)}};
  j["eigen"] = {{"lambda1", r.lambda1}, {"residual", r.eigen_residual}, {"F_phi1", r.F_phi1}};
  j["f1"] = {{"status", to_string(r.f1.status)},
             {"lambda_zero_plus", finite_or_null(r.f1.lambda_zero_plus)},
             {"lambda_zero", finite_or_null(r.f1.lambda_zero)}};
  if (r.has_extreme) {
    const auto& x = r.extreme;
    const auto& c = x.certificate;
    Json br = Json::array();
    for (const auto& b : c.bracket) br.push_back({b.lo, b.hi, b.g_lo, b.g_hi});
    j["lambda_star"] = {{"value", x.lambda_star},
                        {"F_at_min", x.F_at_min},
                        {"H_at_min", x.H_at_min},
                        {"method", x.method == ExtremeMethod::bisection ? "bisection" : "direct"},
                        {"upper_bound", finite_or_null(c.upper_bound)},
                        {"bracket", br},
                        {"bracket_maintained", c.bracket_maintained},
                        {"multiplier", c.multiplier},
                        {"scaled_residual", c.scaled_residual},
                        {"polished_residual", c.polished_residual},
                        {"scale_factor", c.scale_factor},
                        {"start_values", c.start_values}};
  }
  if (r.has_mu0) {
    Json tried = Json::array();
    for (const auto& t : r.mu0.tried)
      tried.push_back({{"theta", t.theta}, {"mu", t.mu}, {"J", t.J}, {"R", t.R},
                       {"J_boundary", finite_or_null(t.J_boundary)}, {"admissible", t.admissible}});
    j["mu0"] = {{"value", r.mu0.mu0}, {"theta", r.mu0.theta}, {"tried", tried}, {"restarts", r.mu0.restarts}};
  }
  if (r.has_branch) {
    const auto& b = r.branch;
    Json errs = Json::array();
    for (const auto& [lam, msg] : b.errors) errs.push_back({{"lambda", lam}, {"error", msg}});
    j["branch"] = {{"Lambda", finite_or_null(b.Lambda)},
                   {"Lambda_detected", b.Lambda_detected},
                   {"Lambda_reason", b.Lambda_reason},
                   {"skipped", b.skipped},
                   {"errors", errs},
                   {"lambda_grid", r.lambda_grid}};
  }
  Json mp = Json::array();
  for (const auto& row : r.mountain_pass) {
    Json e = {{"lambda", row.lambda}, {"converged", row.converged}};
    if (!row.error.empty()) e["error"] = row.error;
    e["mu_lambda"] = row.mu_lambda;
    e["J_mu0"] = row.J_mu0;
    e["H_mu0_w"] = row.H_mu0_w;
    e["boundary_multistart_spread"] = row.boundary_multistart_spread;
    e["iterations"] = row.iterations;
    e["refinements"] = row.refinements;
    e["path_nodes"] = row.path_nodes;
    e["sign_change_every_iteration"] = row.sign_change_every_iteration;
    e["crossing_energy"] = finite_or_null(row.crossing_energy);
    e["crossing_energy_min"] = finite_or_null(row.crossing_energy_min);
    e["max_energy_increase"] = row.max_energy_increase;
    e["max_node_norm"] = {row.norm_min, row.norm_max};
    if (row.converged) e["c_lambda"] = row.c_lambda, e["residual"] = row.point.residual;
    mp.push_back(e);
  }
  j["mountain_pass"] = mp;
  Json pts = Json::array();
  for (const BranchPoint* p : all_points(r)) pts.push_back(detail::point_json(*p));
  j["points"] = pts;
  Json checks = Json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"measured", finite_or_null(c.measured)},
                      {"threshold", c.threshold}, {"detail", c.detail}});
  j["checks"] = checks;
  return j;
}

inline const char* branch_csv_header() { return "lambda,kind,energy,fiber_dd,residual,min_u,mu_used"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Nodal profile `x u(x)` including the two boundary zeros.
inline std::string profile_text(const NodalFunction& u) {
  std::string s;
  const Mesh& m = u.mesh();
  for (int i = 0; i <= m.elements(); ++i) s += detail::g17(m.node(i)) + " " + detail::g17(u.at_node(i)) + "\n";
  return s;
}

inline std::string branch_csv_text(const SolverReport& r) {
  std::string s = std::string(branch_csv_header()) + "\n";
  for (const BranchPoint* p : all_points(r)) {
    s += detail::g17(p->lambda) + "," + to_string(p->kind) + "," + detail::g17(p->energy) + "," +
         detail::g17(p->fiber_dd) + "," + detail::g17(p->residual) + "," + detail::g17(p->min_u) + "," +
         detail::g17(p->mu_used) + "\n";
  }
  return s;
}

inline std::string diagram_csv_text(const SolverReport& r) {
  std::string s = "kind,lambda,energy\n";
  for (const BranchPoint* p : all_points(r))
    s += std::string(to_string(p->kind)) + "," + detail::g17(p->lambda) + "," + detail::g17(p->energy) + "\n";
  return s;
}

inline std::string timings_text(const SolverReport& r) {
  Json t = Json::object();
  for (const auto& [k, v] : r.timings) t[k] = v;
  return t.dump(2) + "\n";
}

/// Writes all outputs into `dir`, creating it. Solution files are named
/// solutions/<index>_<kind>.dat with the row index of branch.csv.
inline void emit_outputs(const SolverReport& r, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "solutions");
  write_text(dir / "report.json", report_json(r).dump(2) + "\n");
  write_text(dir / "branch.csv", branch_csv_text(r));
  write_text(dir / "diagram.csv", diagram_csv_text(r));
  write_text(dir / "timings.json", timings_text(r));
  const auto pts = all_points(r);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%03zu_%s.dat", i, to_string(pts[i]->kind));
    write_text(dir / "solutions" / name, profile_text(pts[i]->u));
  }
}

struct BranchCsvRow {
  double lambda = 0.0;
  std::string kind;
  double energy = 0.0, fiber_dd = 0.0, residual = 0.0, min_u = 0.0, mu_used = 0.0;
};

inline std::vector<BranchCsvRow> parse_branch_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line) || line != branch_csv_header())
    throw InvalidArgument(source + ": expected header '" + branch_csv_header() + "'");
  std::vector<BranchCsvRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw InvalidArgument(source + ":" + std::to_string(lineno) + ": expected 7 fields");
    auto d = [&](const std::string& t) {
      char* end = nullptr;
      const double v = std::strtod(t.c_str(), &end);
      if (end == t.c_str() || *end != '\0')
        throw InvalidArgument(source + ":" + std::to_string(lineno) + ": bad number '" + t + "'");
      return v;
    };
    rows.push_back({d(f[0]), f[1], d(f[2]), d(f[3]), d(f[4]), d(f[5]), d(f[6])});
  }
  return rows;
}

inline std::vector<BranchCsvRow> read_branch_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  return parse_branch_csv(in, path.string());
}

/// Energy versus lambda, one polyline per kind, from diagram.csv.
inline std::string diagram_svg(const std::filesystem::path& diagram_csv) {
  std::ifstream in(diagram_csv);
  if (!in) throw InvalidArgument("cannot open " + diagram_csv.string());
  std::string line;
  std::getline(in, line);
  if (line != "kind,lambda,energy") throw InvalidArgument(diagram_csv.string() + ": expected header 'kind,lambda,energy'");
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw InvalidArgument("malformed row: " + line);
    series[line.substr(0, c1)].push_back({std::stod(line.substr(c1 + 1, c2 - c1 - 1)), std::stod(line.substr(c2 + 1))});
  }
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (auto& [k, v] : series) {
    std::sort(v.begin(), v.end());
    for (auto [x, y] : v) x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
  }
  if (series.empty()) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  const double W = 640, H = 420, L = 70, B = 50, T = 20, Rm = 20;
  auto X = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - Rm); };
  auto Y = [&](double y) { return T + (y1 - y) / (y1 - y0) * (H - T - B); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - Rm << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  char buf[64];
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    std::snprintf(buf, sizeof buf, "%.4g", xv);
    s << "<text x=\"" << X(xv) << "\" y=\"" << H - B + 18 << "\" font-size=\"11\" text-anchor=\"middle\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.4g", yv);
    s << "<text x=\"" << L - 6 << "\" y=\"" << Y(yv) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  s << "<text x=\"" << (L + W - Rm) / 2 << "\" y=\"" << H - 10 << "\" font-size=\"13\" text-anchor=\"middle\">lambda</text>\n";
  s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 " << (T + H - B) / 2
    << ")\" text-anchor=\"middle\">energy</text>\n";
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  int ci = 0;
  for (const auto& [kind, v] : series) {
    const char* col = colors[ci++ % 4];
    s << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : v) s << X(x) << "," << Y(y) << " ";
    s << "\"/>\n";
    for (auto [x, y] : v) s << "<circle cx=\"" << X(x) << "\" cy=\"" << Y(y) << "\" r=\"2.5\" fill=\"" << col << "\"/>\n";
    s << "<text x=\"" << W - Rm - 110 << "\" y=\"" << T + 16 * ci << "\" font-size=\"12\" fill=\"" << col << "\">" << kind
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace plap
