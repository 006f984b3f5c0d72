// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "perhom/config.hpp"
#include "perhom/corrector.hpp"
#include "perhom/ergodic.hpp"
#include "perhom/fixtures.hpp"
#include "perhom/limits.hpp"
#include "perhom/verify.hpp"

namespace perhom::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kManifestVersion = 1;

enum ExitCode : int { kOk = 0, kFailure = 1, kValidationFailure = 2, kVerifyFail = 3, kConfigFailure = 4 };

// A flag that replaced a config value.
struct Override {
  std::string key;  // JSON pointer into the config, e.g. /run/seed
  json value;
  std::string flag;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string config_source;
  std::uint64_t seed = 0;
  std::string regime;
  std::vector<std::pair<std::string, std::string>> artifacts;  // role, file name
  std::vector<Override> overrides;
  json parameters = json::object();  // command arguments that are not config keys

  json to_json() const {
    json j;
    j["format"] = "perhom-manifest";
    j["version"] = kManifestVersion;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["config_source"] = config_source;
    j["seed"] = seed;
    j["regime"] = regime;
    j["library_version"] = kVersion;
    j["module_versions"] = {{"config", kConfigVersion}, {"batch", 1}, {"report", 1}, {"manifest", kManifestVersion}};
    json a = json::object();
    for (const auto& [role, file] : artifacts) a[role] = file;
    j["artifacts"] = a;
    json o = json::array();
    for (const auto& ov : overrides) o.push_back({{"key", ov.key}, {"value", ov.value}, {"flag", ov.flag}});
    j["overrides"] = o;
    j["parameters"] = parameters;
    return j;
  }
};

// Everything a command needs: the effective config (after flag overrides),
// where to write, and what was overridden.
struct Context {
  Config config;
  std::string source;
  std::filesystem::path out = ".";
  std::vector<Override> overrides;
  std::ostream* log = &std::cerr;

  void set(const std::string& key, const json& value, const std::string& flag) {
    overrides.push_back({key, value, flag});
  }
  Regime regime() const {
    const Regime r = config.run.regime.empty() ? infer_regime(config.spec) : regime_from_string(config.run.regime);
    check_regime(config.spec, r);
    return r;
  }
  RunManifest manifest(const std::string& command) const {
    RunManifest m;
    m.command = command;
    m.config_hash = config_hash(config);
    m.config_source = source;
    m.seed = config.run.seed;
    m.overrides = overrides;
    return m;
  }
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

inline void write_json(const std::filesystem::path& p, const json& j) {
  auto f = open_out(p);
  f << j.dump(2) << '\n';
}

inline void write_manifest(const Context& ctx, RunManifest m, std::string file = "") {
  if (m.regime.empty()) {
    try {
      m.regime = to_string(ctx.regime());
    } catch (const Error&) {
    }
  }
  if (file.empty()) file = m.command + ".manifest.json";
  write_json(ctx.out / file, m.to_json());
}

inline json vec_json(const Vec& v, int d) { return std::vector<double>(v.c, v.c + d); }

inline ErgodicOptions ergodic_options(const Config& c) {
  ErgodicOptions e;
  e.paths = c.run.ergodic_paths;
  e.horizon = c.run.ergodic_horizon;
  e.burn_in = c.run.burn_in;
  e.grid = c.run.histogram_grid;
  e.seed = c.run.seed;
  e.workers = c.run.workers;
  e.delta = c.run.delta;
  e.dt = c.run.dt;
  return e;
}

inline CheckOptions check_options(const Config& c) {
  CheckOptions o;
  o.ergodic = ergodic_options(c);
  o.horizon = c.run.horizon;
  o.delta = c.run.delta;
  o.dt = c.run.dt;
  o.rmax = c.run.rmax;
  o.delta_limit = c.run.delta_limit;
  o.workers = c.run.workers;
  o.grid = c.run.grid > 0 ? c.run.grid : c.run.histogram_grid;
  o.predict.workers = c.run.workers;
  o.predict.corrector.n = c.run.grid;
  o.predict.corrector.seed = c.run.seed;
  o.predict.corrector.delta = c.run.delta;
  o.predict.corrector.dt = c.run.dt;
  return o;
}

struct MeasureChoice {
  TorusMeasure mu;
  std::string source;
  std::vector<std::string> notes;
};

// Uniform when nothing depends on x; otherwise the same choice the checks use.
inline MeasureChoice invariant_measure(const Config& c) {
  const int d = c.spec.dim;
  if (c.spec.kernel.x_independent() && c.spec.drift.x_independent()) {
    const int n = c.run.histogram_grid > 0 ? c.run.histogram_grid : default_histogram_grid(d);
    return {TorusMeasure::uniform(d, n), "uniform", {"x-independent coefficients: μ is Lebesgue measure"}};
  }
  MeasureChoice m;
  m.mu = check_measure(c.spec, check_options(c), &m.notes);
  m.source = d == 1 ? "generator" : "occupation";
  return m;
}

inline double tv_to_uniform(const TorusMeasure& mu) {
  const double u = 1.0 / static_cast<double>(mu.cells());
  double s = 0.0;
  for (std::size_t i = 0; i < mu.cells(); ++i) s += std::abs(mu.weight(i) - u);
  return 0.5 * s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands. Each returns an exit code and writes its artifacts plus a
// manifest into ctx.out.

inline int cmd_fixture(const std::string& name, const std::filesystem::path& path, std::ostream& log = std::cerr) {
  const Config c = fixtures::by_name(name);
  {
    auto f = detail::open_out(path);
    f << dump_config(c) << '\n';
  }
  Context ctx;
  ctx.config = c;
  ctx.source = "fixture:" + name;
  ctx.out = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  RunManifest m = ctx.manifest("fixture");
  m.artifacts.push_back({"config", path.filename().string()});
  detail::write_manifest(ctx, m, path.stem().string() + ".manifest.json");
  log << "wrote " << path.string() << '\n';
  return kOk;
}

inline int cmd_validate(const Context& ctx) {
  json j;
  j["format"] = "perhom-validation";
  j["version"] = 1;
  bool ok = true;
  try {
    const ValidationReport rep = validate(ctx.config.spec);
    json checks = json::array();
    for (const auto& c : rep.checks)
      checks.push_back({{"name", c.name}, {"passed", c.passed}, {"measured", c.measured}, {"detail", c.detail}});
    j["checks"] = checks;
    j["measured_kmin"] = rep.measured_kmin;
    j["measured_kmax"] = rep.measured_kmax;
    ok = rep.ok();
    try {
      j["regime"] = to_string(ctx.regime());
    } catch (const Error& e) {
      j["regime_error"] = e.what();
      ok = false;
    }
  } catch (const ValidationError& e) {
    j["error"] = e.what();
    ok = false;
  }
  j["ok"] = ok;
  detail::write_json(ctx.out / "validation.json", j);
  RunManifest m = ctx.manifest("validate");
  m.artifacts.push_back({"report", "validation.json"});
  detail::write_manifest(ctx, m);
  *ctx.log << (ok ? "validation passed" : "validation failed") << '\n';
  return ok ? kOk : kValidationFailure;
}

struct EffectiveFlags {
  bool mixing = true;
  int mixing_paths = 200;
};

inline int cmd_effective(const Context& ctx, const EffectiveFlags& fl = {}) {
  const Config& c = ctx.config;
  const JumpSpec& s = c.spec;
  const int d = s.dim;
  const Regime r = ctx.regime();
  RunManifest m = ctx.manifest("effective");

  auto mc = detail::invariant_measure(c);
  const TorusMeasure& mu = mc.mu;
  json j;
  j["format"] = "perhom-effective";
  j["version"] = 1;
  j["regime"] = to_string(r);
  const DriftAverages avg = drift_averages(s, mu);
  j["bbar"] = detail::vec_json(avg.bbar, d);
  j["bbar_inf"] = avg.bbar_inf ? detail::vec_json(*avg.bbar_inf, d) : json(nullptr);
  json ladder = json::array();
  if (s.large) {
    std::vector<double> radii{2.0, 4.0, 16.0, 64.0, 256.0};
    for (double e : c.run.eps_ladder) radii.push_back(1.0 / e);
    std::sort(radii.begin(), radii.end());
    radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
    for (double R : radii) ladder.push_back({{"R", R}, {"bbar_R", detail::vec_json(avg.bbar_trunc(R), d)}});
  }
  j["bbar_R"] = ladder;
  json ts = json::array();
  for (double e : c.run.eps_ladder) ts.push_back({{"eps", e}, {"time_scale", time_scale(s, r, e)}});
  j["time_scales"] = ts;

  if (s.large) {
    const auto table = effective_kernel_table(s, mu, 0, c.run.workers);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : table.kbar0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    j["kbar0"] = {{"nodes", table.nodes.size()}, {"weighted_mean", table.weighted_mean()}, {"min", lo}, {"max", hi}};
    auto f = detail::open_out(ctx.out / "kbar0.csv");
    f << "# perhom-kbar0 v1\n";
    table.write_csv(f);
    m.artifacts.push_back({"kbar0", "kbar0.csv"});
    const auto k0 = estimate_k0(s, mu);
    j["k0"] = {{"value", k0.value}, {"radii", k0.radii}, {"values", k0.values}, {"settled", k0.cauchy}};
  } else {
    j["kbar0"] = nullptr;
    j["k0"] = nullptr;
  }

  double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
  for (std::size_t i = 0; i < mu.cells(); ++i) {
    wmin = std::min(wmin, mu.weight(i));
    wmax = std::max(wmax, mu.weight(i));
  }
  j["mu"] = {{"source", mc.source},
             {"grid", mu.resolution()},
             {"cells", mu.cells()},
             {"tv_to_uniform", detail::tv_to_uniform(mu)},
             {"min_weight", wmin},
             {"max_weight", wmax},
             {"notes", mc.notes}};
  {
    auto f = detail::open_out(ctx.out / "mu.csv");
    f << "# perhom-measure v1\n";
    mu.write_csv(f);
    m.artifacts.push_back({"mu", "mu.csv"});
  }

  if (fl.mixing) {
    std::vector<TrigPoly> fs;
    for (int i = 0; i < d; ++i) {
      Freq p{};
      p[i] = 1;
      fs.push_back(TrigPoly::cos_x(d, p, 1.0));
    }
    MixingOptions mo;
    mo.starts_per_axis = d == 1 ? 8 : 4;
    mo.paths_per_start = fl.mixing_paths;
    mo.seed = c.run.seed;
    mo.workers = c.run.workers;
    mo.delta = c.run.delta;
    mo.dt = c.run.dt;
    j["mixing"] = mixing_rate(s, mu, fs, mo).to_json();
  } else {
    j["mixing"] = nullptr;
  }

  detail::write_json(ctx.out / "effective.json", j);
  m.artifacts.push_back({"report", "effective.json"});
  m.regime = to_string(r);
  detail::write_manifest(ctx, m);
  *ctx.log << "effective coefficients written to " << ctx.out.string() << '\n';
  return kOk;
}

inline int cmd_corrector(const Context& ctx) {
  const Config& c = ctx.config;
  const JumpSpec& s = c.spec;
  const Regime r = ctx.regime();
  RunManifest m = ctx.manifest("corrector");
  m.regime = to_string(r);
  const CorrectorMethod method = corrector_method_from_string(c.run.corrector_method);
  CheckOptions co = detail::check_options(c);
  json j;
  j["format"] = "perhom-covariance";
  j["version"] = 1;
  j["regime"] = to_string(r);
  j["method"] = to_string(method);

  std::optional<CorrectorField> field;
  if (r == Regime::Diffusive) {
    auto mc = detail::invariant_measure(c);
    PredictOptions po = co.predict;
    if (method != CorrectorMethod::Grid || s.dim == 3) {
      CorrectorOptions o = po.corrector;
      o.workers = c.run.workers;
      if (o.n <= 0) o.n = default_corrector_grid(s.dim);
      const auto rhs = corrector_rhs(s, mc.mu, r);
      o.center_rhs = method != CorrectorMethod::FeynmanKac;
      field = solve_poisson(s, rhs, method, o, mc.mu);
      j["A"] = covariance_matrix(s, mc.mu, &*field, o).to_json();
      j["A_without_corrector"] = covariance_matrix(s, mc.mu, nullptr, o).to_json();
    } else {
      auto p = predicted_limit(s, mc.mu, r, po);
      field = std::move(p.corrector);
      j["A"] = to_json(p.law)["covariance"];
      j["A_without_corrector"] = p.uncorrected->to_json();
      j["notes"] = p.notes;
    }
  } else if (r == Regime::CriticalLog) {
    auto mc = detail::invariant_measure(c);
    const auto cc = critical_covariance(s, mc.mu, co.predict.critical_ladder);
    j["A"] = cc.extrapolated.to_json();
    json lad = json::array();
    for (std::size_t i = 0; i < cc.ladder.size(); ++i)
      lad.push_back({{"eps", cc.ladder[i]}, {"A", cc.values[i].to_json()}});
    j["ladder"] = lad;
    j["closed_form"] = cc.closed_form ? cc.closed_form->to_json() : json(nullptr);
    j["k0"] = cc.k0;
    j["converged"] = cc.converged;
    j["notes"] = {"the corrector does not enter the critical covariance"};
  } else if (r == Regime::StableNoCenter) {
    throw PreconditionError("no corrector equation in the stable_no_center regime");
  } else {
    // Stable with centering: the corrector of the centered drift; Π has no
    // second moment, so there is no covariance.
    auto mc = detail::invariant_measure(c);
    CorrectorOptions o = co.predict.corrector;
    o.workers = c.run.workers;
    if (o.n <= 0) o.n = default_corrector_grid(s.dim);
    o.center_rhs = method != CorrectorMethod::FeynmanKac;
    std::optional<double> R;
    if (r == Regime::CauchyCenter) R = 1.0 / *std::min_element(c.run.eps_ladder.begin(), c.run.eps_ladder.end());
    field = solve_poisson(s, corrector_rhs(s, mc.mu, r, R), method, o, mc.mu);
    j["A"] = nullptr;
    j["notes"] = {"infinite second moment: no covariance"};
  }
  if (field) {
    j["corrector"] = {{"grid", field->n}, {"sup_psi", field->sup_psi()}, {"sup_grad", field->sup_grad()},
                      {"residual", field->residual}};
    auto f = detail::open_out(ctx.out / "corrector.csv");
    f << "# perhom-corrector v1\n";
    field->write_csv(f);
    m.artifacts.push_back({"corrector", "corrector.csv"});
  }
  detail::write_json(ctx.out / "covariance.json", j);
  m.artifacts.push_back({"covariance", "covariance.json"});
  detail::write_manifest(ctx, m);
  *ctx.log << "corrector output written to " << ctx.out.string() << '\n';
  return kOk;
}

inline int cmd_simulate(const Context& ctx, double eps, bool binary = true) {
  const Config& c = ctx.config;
  const Regime r = ctx.regime();
  SimConfig sc;
  sc.paths = c.run.paths;
  sc.horizon = c.run.horizon;
  sc.dt = c.run.dt;
  sc.delta = c.run.delta;
  sc.rmax = c.run.rmax;
  sc.seed = c.run.seed;
  sc.eps = eps;
  sc.regime = r;
  sc.workers = c.run.workers;
  std::optional<DriftAverages> avg;
  if (needs_centering(r)) avg = drift_averages(c.spec, detail::invariant_measure(c).mu);
  const EndpointBatch b = scaled_endpoint_batch(c.spec, sc, avg);
  RunManifest m = ctx.manifest("simulate");
  m.regime = to_string(r);
  m.parameters["eps"] = eps;
  {
    auto f = detail::open_out(ctx.out / "batch.csv");
    b.write_csv(f);
    m.artifacts.push_back({"batch_csv", "batch.csv"});
  }
  if (binary) {
    std::ofstream f(ctx.out / "batch.bin", std::ios::binary);
    if (!f) throw Error("cannot write batch.bin");
    b.write_binary(f);
    m.artifacts.push_back({"batch_binary", "batch.bin"});
  }
  detail::write_manifest(ctx, m);
  *ctx.log << b.size() << " endpoints at eps = " << eps << " written to " << ctx.out.string() << '\n';
  return kOk;
}

inline int cmd_verify(const Context& ctx) {
  const Config& c = ctx.config;
  const Regime r = ctx.regime();
  CheckOptions o = detail::check_options(c);
  if (c.spec.kernel.x_independent() && c.spec.drift.x_independent()) o.mu = detail::invariant_measure(c).mu;
  const auto rep = theorem_check(c.spec, r, c.run.eps_ladder, static_cast<std::size_t>(c.run.paths), c.run.seed, o);
  RunManifest m = ctx.manifest("verify");
  m.regime = to_string(r);
  detail::write_json(ctx.out / "report.json", rep.to_json());
  {
    auto f = detail::open_out(ctx.out / "report.csv");
    f << "# perhom-convergence v1\n";
    rep.write_csv(f);
  }
  m.artifacts.push_back({"report", "report.json"});
  m.artifacts.push_back({"curve", "report.csv"});
  detail::write_manifest(ctx, m);
  for (const auto& row : rep.rows)
    *ctx.log << "eps " << row.eps << "  ks_max " << row.ks_max << "  ecf_max_z " << row.ecf_max_z
             << (row.error.empty() ? "" : "  error: " + row.error) << '\n';
  *ctx.log << (rep.pass ? "PASS" : "FAIL") << '\n';
  return rep.pass ? kOk : kVerifyFail;
}

// Maps library exceptions onto exit codes.
template <class F>
int guarded(F&& f, std::ostream& err = std::cerr) {
  try {
    return f();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace perhom::cli
