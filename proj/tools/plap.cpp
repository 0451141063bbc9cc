// Command-line driver: plap <subcommand> --config <file> [--out dir] [--seed s] [--n elements]

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "plap/plap.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> n;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "configuration file (INI)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "output directory (default: run.output)");
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--n", c.n, "number of elements");
}

plap::RunConfig resolve(const Common& c) {
  plap::RunConfig cfg = plap::load_config(c.config);
  if (c.seed) cfg.run.seed = *c.seed;
  if (c.n) cfg.mesh.n = *c.n;
  if (!c.out.empty()) cfg.run.output = c.out;
  plap::detail::validate(cfg);
  return cfg;
}

void summary(const plap::SolverReport& r) {
  std::printf("lambda1     %.12g\n", r.lambda1);
  std::printf("F(phi1)     %.6g\n", r.F_phi1);
  std::printf("(f1)        %s\n", plap::to_string(r.f1.status));
  if (r.has_extreme) std::printf("lambda*     %.12g\n", r.extreme.lambda_star);
  if (r.has_mu0) std::printf("mu0         %.12g (theta %.2f)\n", r.mu0.mu0, r.mu0.theta);
  if (r.has_branch) {
    if (r.branch.Lambda_detected)
      std::printf("Lambda      %.8g (%s)\n", r.branch.Lambda, r.branch.Lambda_reason.c_str());
    else
      std::printf("Lambda      not reached\n");
    std::printf("local_min   %zu points, %zu errors\n", r.branch.points.size(), r.branch.errors.size());
  }
  int ok = 0;
  for (const auto& row : r.mountain_pass) {
    if (row.converged) {
      ++ok;
      std::printf("mp  lambda %.10g  c %.12g  residual %.2e\n", row.lambda, row.c_lambda, row.point.residual);
    } else {
      std::printf("mp  lambda %.10g  failed: %s\n", row.lambda, row.error.c_str());
    }
  }
  for (const auto& c : r.checks)
    std::printf("check %-40s %s  (%.3e vs %.3e)\n", c.name.c_str(), c.passed ? "ok" : "FAILED", c.measured, c.threshold);
}

int run(const Common& c, plap::Stage stage, std::optional<double> lambda = {}) {
  plap::RunConfig cfg = resolve(c);
  if (lambda) {
    cfg.lambda_grid.mode = plap::GridMode::list;
    cfg.lambda_grid.values = {*lambda};
    cfg.path.min_offset = 0.0;
  }
  const plap::SolverReport r = plap::run_pipeline(cfg, stage);
  plap::emit_outputs(r, cfg.run.output);
  summary(r);
  std::printf("outputs in %s\n", cfg.run.output.c_str());
  bool ok = true;
  for (const auto& k : r.checks) ok = ok && k.passed;
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational solver for -Delta_p u = lambda |u|^{p-2} u + f |u|^{gamma-2} u on an interval"};
  app.require_subcommand(1);
  Common common;
  double lambda = 0.0;
  std::string svg_in, svg_out;
  struct Sub {
    const char* name;
    const char* help;
    plap::Stage stage;
  };
  const Sub subs[] = {{"eig", "first Dirichlet eigenpair", plap::Stage::eig},
                      {"check", "hypothesis validation only", plap::Stage::check},
                      {"lambda-star", "extreme value lambda* with certificate", plap::Stage::lambda_star},
                      {"branch", "local-minimum branch", plap::Stage::branch},
                      {"run", "full pipeline", plap::Stage::all}};
  std::vector<std::pair<CLI::App*, plap::Stage>> stages;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, common);
    stages.push_back({sub, s.stage});
  }
  CLI::App* mp = app.add_subcommand("mountain-pass", "both branch points at a single lambda");
  add_common(mp, common);
  mp->add_option("--lambda", lambda, "lambda in (lambda*, Lambda)")->required();
  CLI::App* svg = app.add_subcommand("svg", "render diagram.csv as SVG");
  svg->add_option("input", svg_in, "diagram.csv")->required()->check(CLI::ExistingFile);
  svg->add_option("-o,--output", svg_out, "output file (default: input with .svg)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (svg->parsed()) {
      if (svg_out.empty()) svg_out = std::filesystem::path(svg_in).replace_extension(".svg").string();
      plap::write_text(svg_out, plap::diagram_svg(svg_in));
      std::printf("wrote %s\n", svg_out.c_str());
      return 0;
    }
    if (mp->parsed()) return run(common, plap::Stage::all, lambda);
    for (auto& [sub, stage] : stages)
      if (sub->parsed()) return run(common, stage);
  } catch (const plap::HypothesisError& e) {
    std::fprintf(stderr, "hypothesis failed: %s\n", e.what());
    return 3;
  } catch (const plap::ConfigParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const plap::InvalidArgument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
