// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <CLI11.hpp>

#include "perhom/cli.hpp"

namespace {

using namespace perhom;
namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<int> paths;
  std::optional<std::string> regime;
};

void add_common(CLI::App* app, Common& c, bool paths) {
  app->add_option("config", c.config, "config file (JSON)")->required();
  app->add_option("-o,--out", c.out, "output directory")->capture_default_str();
  app->add_option("--seed", c.seed, "override run.seed");
  app->add_option("--workers", c.workers, "override run.workers")->check(CLI::PositiveNumber);
  app->add_option("--regime", c.regime, "override run.regime");
  if (paths) app->add_option("--paths", c.paths, "override run.paths")->check(CLI::PositiveNumber);
}

cli::Context make_context(const Common& c) {
  cli::Context ctx;
  ctx.config = load_config(c.config);
  ctx.source = c.config;
  ctx.out = c.out;
  fs::create_directories(ctx.out);
  auto& run = ctx.config.run;
  if (c.seed) {
    run.seed = *c.seed;
    ctx.set("/run/seed", *c.seed, "--seed");
  }
  if (c.workers) {
    run.workers = *c.workers;
    ctx.set("/run/workers", *c.workers, "--workers");
  }
  if (c.paths) {
    run.paths = *c.paths;
    ctx.set("/run/paths", *c.paths, "--paths");
  }
  if (c.regime) {
    try {
      (void)regime_from_string(*c.regime);
    } catch (const ConfigError&) {
      throw ConfigError("--regime", "unknown regime '" + *c.regime + "'");
    }
    run.regime = *c.regime;
    ctx.set("/run/regime", *c.regime, "--regime");
  }
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homogenization of Lévy-type jump processes in periodic media"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kVersion);

  std::string fixture_name, fixture_out;
  auto* fx = app.add_subcommand("fixture", "write a built-in fixture config");
  fx->add_option("name", fixture_name, "fixture name")->required()->check(CLI::IsMember(fixtures::names()));
  fx->add_option("-o,--out", fixture_out, "output file (default: <name>.json)");

  Common val, eff, cor, sim, ver;
  auto* v = app.add_subcommand("validate", "check a config against the model assumptions");
  add_common(v, val, false);

  cli::EffectiveFlags eflags;
  auto* e = app.add_subcommand("effective", "drift averages, effective kernel, invariant measure, mixing");
  add_common(e, eff, false);
  e->add_flag("!--no-mixing", eflags.mixing, "skip the mixing-rate estimate");
  e->add_option("--mixing-paths", eflags.mixing_paths, "paths per start for the mixing estimate")
      ->check(CLI::PositiveNumber);

  std::optional<std::string> method;
  auto* c = app.add_subcommand("corrector", "solve the corrector equation and the covariance");
  add_common(c, cor, false);
  c->add_option("--method", method, "grid, fourier or feynman_kac");

  std::optional<double> eps;
  bool no_binary = false;
  auto* s = app.add_subcommand("simulate", "simulate a batch of rescaled endpoints");
  add_common(s, sim, true);
  s->add_option("--eps", eps, "scale parameter (default: smallest on the ladder)")->check(CLI::Range(0.0, 1.0));
  s->add_flag("--no-binary", no_binary, "write only the CSV batch");

  std::vector<double> ladder;
  auto* w = app.add_subcommand("verify", "check the scaling limit along an eps ladder");
  add_common(w, ver, true);
  w->add_option("--ladder", ladder, "eps values")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : cli::kConfigFailure;
  }

  return cli::guarded([&]() -> int {
    if (fx->parsed()) {
      const fs::path out = fixture_out.empty() ? fs::path(fixture_name + ".json") : fs::path(fixture_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      return cli::cmd_fixture(fixture_name, out);
    }
    if (v->parsed()) return cli::cmd_validate(make_context(val));
    if (e->parsed()) return cli::cmd_effective(make_context(eff), eflags);
    if (c->parsed()) {
      auto ctx = make_context(cor);
      if (method) {
        (void)corrector_method_from_string(*method);
        ctx.config.run.corrector_method = *method;
        ctx.set("/run/corrector_method", *method, "--method");
      }
      return cli::cmd_corrector(ctx);
    }
    if (s->parsed()) {
      auto ctx = make_context(sim);
      const auto& lad = ctx.config.run.eps_ladder;
      double e_run = lad.empty() ? 0.125 : *std::min_element(lad.begin(), lad.end());
      if (eps) e_run = *eps;
      return cli::cmd_simulate(ctx, e_run, !no_binary);
    }
    auto ctx = make_context(ver);
    if (!ladder.empty()) {
      ctx.config.run.eps_ladder = ladder;
      ctx.set("/run/eps_ladder", ladder, "--ladder");
    }
    return cli::cmd_verify(ctx);
  });
}
