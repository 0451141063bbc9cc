#pragma once

// Run configuration: INI-style "key = value" file with sections.
//
//   [problem]     p, gamma, a, b, weight, weight_amplitude, weight_plus,
//                 weight_minus, weight_value, weight_file, support_threshold
//   [mesh]        n, quad_order
//   [solver]      eigen_tol, lstar_tol, min_tol, mp_tol, tol_boundary, restarts
//   [lambda_grid] mode (auto | range | list), start, stop, count, values,
//                 near_count, near_offset, interior_count, below_count
//   [mu_grid]     fractions or values
//   [path]        nodes, min_offset, window, max_iter
//   [run]         seed, output, threads

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "plap/errors.hpp"

namespace plap {

/// Config file could not be parsed; carries the offending line.
class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(const std::string& file, unsigned long line, const std::string& msg)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  unsigned long line() const noexcept { return line_; }

 private:
  unsigned long line_;
};

/// A field failed validation; field() is "section.key".
class ConfigValidationError : public InvalidArgument {
 public:
  ConfigValidationError(std::string field, const std::string& msg)
      : InvalidArgument(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct WeightConfig {
  std::string name;  // cos2pi | step3 | constant | custom
  double amplitude = 1.0;
  double plus = 1.0;
  double minus = 1.0;
  double value = 0.0;
  std::string file;
};

struct ProblemConfig {
  double p = 2.0;
  double gamma = 4.0;
  double a = 0.0;
  double b = 1.0;
  WeightConfig weight;
  double support_threshold = 0.0;
};

struct MeshConfig {
  int n = 256;
  int quad_order = 2;
};

struct SolverConfig {
  double eigen_tol = 1e-10;
  double lstar_tol = 1e-10;
  double min_tol = 1e-10;
  double mp_tol = 1e-9;
  double tol_boundary = 1e-6;
  int restarts = 8;
};

enum class GridMode { automatic, range, list };

inline const char* to_string(GridMode m) {
  switch (m) {
    case GridMode::automatic: return "auto";
    case GridMode::range: return "range";
    default: return "list";
  }
}

struct LambdaGridConfig {
  GridMode mode = GridMode::automatic;
  double start = 0.0, stop = 0.0;
  int count = 0;
  std::vector<double> values;
  // auto mode: lambda* + near_offset lambda* 2^-k (k < near_count),
  // interior_count points evenly inside (lambda*, Lambda), below_count
  // points evenly inside (lambda1, lambda*)
  int near_count = 20;
  double near_offset = 0.05;
  int interior_count = 6;
  int below_count = 4;
};

struct MuGridConfig {
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> values;  // absolute mu values; overrides fractions when set
};

struct PathConfig {
  int nodes = 33;            // M + 1
  double min_offset = 0.02;  // mountain pass only for lambda - lambda* >= min_offset lambda*
  int window = 2;
  int max_iter = 20000;
};

struct RunSection {
  std::uint64_t seed = 1;
  std::string output = "out";
  int threads = 1;
};

struct RunConfig {
  ProblemConfig problem;
  MeshConfig mesh;
  SolverConfig solver;
  LambdaGridConfig lambda_grid;
  MuGridConfig mu_grid;
  PathConfig path;
  RunSection run;
  std::string source;  // path of the config file, for messages
};

namespace detail {

inline std::vector<double> parse_list(const std::string& field, const std::string& text) {
  std::vector<double> out;
  std::string t = text;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream is(t);
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigValidationError(field, "not a number: '" + tok + "'");
    }
  }
  return out;
}

inline void validate(RunConfig& c) {
  auto need = [](bool ok, const char* field, const std::string& msg) {
    if (!ok) throw ConfigValidationError(field, msg);
  };
  const auto& pr = c.problem;
  need(pr.p > 1.0, "problem.p", "requires p > 1");
  need(pr.gamma > pr.p, "problem.gamma", "requires p < gamma");
  need(pr.b > pr.a, "problem.b", "requires a < b");
  need(!pr.weight.name.empty(), "problem.weight", "missing weight profile (cos2pi, step3, constant or custom)");
  static const std::set<std::string> known{"cos2pi", "step3", "constant", "custom"};
  need(known.count(pr.weight.name) == 1, "problem.weight", "unknown weight profile '" + pr.weight.name + "'");
  if (pr.weight.name == "custom") need(!pr.weight.file.empty(), "problem.weight_file", "custom weight needs a file");
  need(pr.support_threshold >= 0.0, "problem.support_threshold", "must be >= 0");
  need(c.mesh.n >= 2, "mesh.n", "requires n >= 2");
  need(c.mesh.quad_order == 1 || c.mesh.quad_order == 2, "mesh.quad_order", "must be 1 or 2");
  const auto& s = c.solver;
  need(s.eigen_tol > 0.0, "solver.eigen_tol", "tolerance must be > 0");
  need(s.lstar_tol > 0.0, "solver.lstar_tol", "tolerance must be > 0");
  need(s.min_tol > 0.0, "solver.min_tol", "tolerance must be > 0");
  need(s.mp_tol > 0.0, "solver.mp_tol", "tolerance must be > 0");
  need(s.tol_boundary > 0.0, "solver.tol_boundary", "tolerance must be > 0");
  need(s.restarts >= 0, "solver.restarts", "must be >= 0");
  auto& g = c.lambda_grid;
  if (g.mode == GridMode::range) {
    need(g.count >= 1, "lambda_grid.count", "range mode needs count >= 1");
    need(g.stop >= g.start, "lambda_grid.stop", "requires start <= stop");
  }
  if (g.mode == GridMode::list) {
    need(!g.values.empty(), "lambda_grid.values", "list mode needs values");
    need(std::is_sorted(g.values.begin(), g.values.end()), "lambda_grid.values", "grid must be sorted");
  }
  need(g.near_count >= 0 && g.interior_count >= 0 && g.below_count >= 0, "lambda_grid.near_count",
       "counts must be >= 0");
  need(g.near_offset > 0.0, "lambda_grid.near_offset", "must be > 0");
  auto& m = c.mu_grid;
  need(std::is_sorted(m.fractions.begin(), m.fractions.end()), "mu_grid.fractions", "grid must be sorted");
  for (double f : m.fractions) need(f > 0.0 && f < 1.0, "mu_grid.fractions", "fractions must lie in (0, 1)");
  need(std::is_sorted(m.values.begin(), m.values.end()), "mu_grid.values", "grid must be sorted");
  need(!m.fractions.empty() || !m.values.empty(), "mu_grid.fractions", "empty mu grid");
  need(c.path.nodes >= 9, "path.nodes", "requires at least 9 nodes (M >= 8)");
  need(c.path.min_offset >= 0.0, "path.min_offset", "must be >= 0");
  need(c.path.window >= 1, "path.window", "must be >= 1");
  need(c.path.max_iter >= 1, "path.max_iter", "must be >= 1");
  need(c.run.threads >= 1, "run.threads", "must be >= 1");
}

}  // namespace detail

/// Parses INI text. Unknown sections or keys are rejected.
inline RunConfig parse_config(const std::string& text, const std::string& source = "<string>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigParseError(source, e.line(), e.message());
  }
  RunConfig c;
  c.source = source;
  using Setter = std::function<void(const std::string& field, const std::string& v)>;
  auto num = [](const std::string& field, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigValidationError(field, "not a number: '" + v + "'");
    }
  };
  auto integer = [&](const std::string& field, const std::string& v) {
    const double d = num(field, v);
    if (d != std::floor(d)) throw ConfigValidationError(field, "not an integer: '" + v + "'");
    return static_cast<long long>(d);
  };
  auto D = [&](double& x) { return Setter([&, px = &x](const std::string& f, const std::string& v) { *px = num(f, v); }); };
  auto I = [&](int& x) {
    return Setter([&, px = &x](const std::string& f, const std::string& v) { *px = static_cast<int>(integer(f, v)); });
  };
  auto S = [](std::string& x) { return Setter([px = &x](const std::string&, const std::string& v) { *px = v; }); };
  auto L = [](std::vector<double>& x) {
    return Setter([px = &x](const std::string& f, const std::string& v) { *px = detail::parse_list(f, v); });
  };
  std::map<std::string, std::map<std::string, Setter>> schema;
  auto& pr = c.problem;
  schema["problem"] = {{"p", D(pr.p)},
                       {"gamma", D(pr.gamma)},
                       {"a", D(pr.a)},
                       {"b", D(pr.b)},
                       {"weight", S(pr.weight.name)},
                       {"weight_amplitude", D(pr.weight.amplitude)},
                       {"weight_plus", D(pr.weight.plus)},
                       {"weight_minus", D(pr.weight.minus)},
                       {"weight_value", D(pr.weight.value)},
                       {"weight_file", S(pr.weight.file)},
                       {"support_threshold", D(pr.support_threshold)}};
  schema["mesh"] = {{"n", I(c.mesh.n)}, {"quad_order", I(c.mesh.quad_order)}};
  auto& so = c.solver;
  schema["solver"] = {{"eigen_tol", D(so.eigen_tol)}, {"lstar_tol", D(so.lstar_tol)},
                      {"min_tol", D(so.min_tol)},     {"mp_tol", D(so.mp_tol)},
                      {"tol_boundary", D(so.tol_boundary)}, {"restarts", I(so.restarts)}};
  auto& g = c.lambda_grid;
  schema["lambda_grid"] = {
      {"mode", Setter([&](const std::string& f, const std::string& v) {
         if (v == "auto") g.mode = GridMode::automatic;
         else if (v == "range") g.mode = GridMode::range;
         else if (v == "list") g.mode = GridMode::list;
         else throw ConfigValidationError(f, "mode must be auto, range or list");
       })},
      {"start", D(g.start)},
      {"stop", D(g.stop)},
      {"count", I(g.count)},
      {"values", L(g.values)},
      {"near_count", I(g.near_count)},
      {"near_offset", D(g.near_offset)},
      {"interior_count", I(g.interior_count)},
      {"below_count", I(g.below_count)}};
  schema["mu_grid"] = {{"fractions", L(c.mu_grid.fractions)}, {"values", L(c.mu_grid.values)}};
  schema["path"] = {{"nodes", I(c.path.nodes)},
                    {"min_offset", D(c.path.min_offset)},
                    {"window", I(c.path.window)},
                    {"max_iter", I(c.path.max_iter)}};
  schema["run"] = {{"seed", Setter([&](const std::string& f, const std::string& v) {
                      const long long s = integer(f, v);
                      if (s < 0) throw ConfigValidationError(f, "seed must be >= 0");
                      c.run.seed = static_cast<std::uint64_t>(s);
                    })},
                   {"output", S(c.run.output)},
                   {"threads", I(c.run.threads)}};
  for (const auto& [sec, sub] : tree) {
    if (sub.empty() && !sub.data().empty())
      throw ConfigValidationError(sec, "key outside of a section");
    auto it = schema.find(sec);
    if (it == schema.end()) throw ConfigValidationError(sec, "unknown section");
    for (const auto& [key, val] : sub) {
      const std::string field = sec + "." + key;
      auto kt = it->second.find(key);
      if (kt == it->second.end()) throw ConfigValidationError(field, "unknown key");
      kt->second(field, val.data());
    }
  }
  if (!tree.get_child_optional("mu_grid.fractions") && tree.get_child_optional("mu_grid.values"))
    c.mu_grid.fractions.clear();
  detail::validate(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("load_config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse_config(ss.str(), path);
  // a relative custom weight file is resolved against the config location
  if (!c.problem.weight.file.empty() && std::filesystem::path(c.problem.weight.file).is_relative())
    c.problem.weight.file = (std::filesystem::path(path).parent_path() / c.problem.weight.file).string();
  return c;
}

}  // namespace plap
