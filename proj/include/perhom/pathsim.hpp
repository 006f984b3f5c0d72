// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "perhom/engine.hpp"
#include "perhom/regime.hpp"

namespace perhom {

inline constexpr double kTruncationBudget = 1e-6;

struct SimConfig {
  int paths = 5000;
  double horizon = 1.0;  // scaled time t for batches, unscaled for single paths
  double dt = 0.0;       // 0: min(0.01, δ^{α₀}/10)
  double delta = 0.25;
  double rmax = 0.0;     // 0: chosen from the truncation budget
  std::uint64_t seed = 1;
  double eps = 0.125;
  std::optional<Regime> regime;  // empty: inferred
  int workers = 1;
  Vec x0;
};

inline double default_dt(const JumpSpec& s, double delta) {
  if (const auto* st = std::get_if<SmallStable>(&s.small)) return std::min(0.01, std::pow(delta, st->alpha0) / 10.0);
  return 0.01;
}

// Smallest decade-refined R with Π(|z|>R)·T·kmax <= budget.
inline double budget_rmax(const JumpSpec& s, double T, double budget = kTruncationBudget) {
  if (!s.large) return 1.0;
  const double k = s.kernel.dominating_bound();
  auto excess = [&](double R) { return large_tail_mass(s, R) * T * k; };
  double lo = 1.0, hi = 10.0;
  while (excess(hi) > budget) {
    lo = hi;
    hi *= 10.0;
    if (hi > 1e300) throw ConfigError("/run/rmax", "no finite Rmax meets the truncation budget");
  }
  for (int i = 0; i < 60 && hi / lo > 1.0 + 1e-6; ++i) {
    const double mid = std::sqrt(lo * hi);
    (excess(mid) > budget ? lo : hi) = mid;
  }
  return hi;
}

inline double resolve_rmax(const JumpSpec& s, const SimConfig& c, double T) {
  if (c.rmax <= 0.0) return budget_rmax(s, T);
  if (s.large) {
    const double ex = large_tail_mass(s, c.rmax) * T * s.kernel.dominating_bound();
    if (ex > kTruncationBudget)
      throw ConfigError("/run/rmax", "truncation budget exceeded: Π(|z|>Rmax)·t·kmax = " + std::to_string(ex));
  }
  return c.rmax;
}

inline ProcessModel model_for(const JumpSpec& s, const SimConfig& c, double T) {
  ModelOptions mo;
  mo.delta = c.delta;
  mo.rmax = resolve_rmax(s, c, T);
  return build_process_model(s, mo);
}

inline Regime resolve_regime(const JumpSpec& s, const SimConfig& c) {
  const Regime r = c.regime ? *c.regime : infer_regime(s);
  check_regime(s, r);
  return r;
}

inline std::uint64_t path_seed(std::uint64_t seed) { return mix_seed(seed, 0x70617468ull); }

// ---------------------------------------------------------------------------
// Single paths

struct PathEvent {
  double t;
  Vec x_before;
  Vec z;
  bool accepted;
};

struct PathRecord {
  std::vector<PathEvent> events;
  Vec x0;
  Vec x_end;
  double horizon = 0.0;
};

namespace detail {
struct EventRecorder {
  std::vector<PathEvent>* out;
  void interval(const Vec&, double, double) {}
  void jump(double t, const Vec& x, const Vec& z, bool acc) { out->push_back({t, x, z, acc}); }
};
}  // namespace detail

// Unscaled path on [0, config.horizon]: jump events plus the endpoint.
inline PathRecord sample_path(const JumpSpec& s, const SimConfig& c, const Vec& x0, std::uint64_t path_index = 0) {
  const ProcessModel m = model_for(s, c, c.horizon);
  PathRunOptions po;
  po.dt = c.dt > 0.0 ? c.dt : default_dt(s, c.delta);
  Rng rng(path_seed(c.seed), path_index);
  PathRecord rec;
  rec.x0 = x0;
  rec.horizon = c.horizon;
  detail::EventRecorder obs{&rec.events};
  rec.x_end = run_path(m, x0, c.horizon, rng, obs, po);
  return rec;
}

// Same path reduced mod 1 componentwise.
inline PathRecord quotient_path(const JumpSpec& s, const SimConfig& c, const Vec& x0, std::uint64_t path_index = 0) {
  PathRecord r = sample_path(s, c, x0, path_index);
  const int d = s.dim;
  r.x0 = wrap(r.x0, d);
  r.x_end = wrap(r.x_end, d);
  for (auto& e : r.events) e.x_before = wrap(e.x_before, d);
  return r;
}

// ---------------------------------------------------------------------------
// Endpoint batches

struct EndpointBatch {
  int dim = 1;
  std::vector<Vec> samples;
  std::string regime;
  std::string source = "process";  // or "limit"
  double eps = 0.0;
  std::uint64_t seed = 0;
  double horizon = 1.0;           // scaled time t
  double unscaled_horizon = 0.0;  // ρ·t
  double wall_seconds = 0.0;

  std::size_t size() const { return samples.size(); }
  std::vector<double> projection(const Vec& dir) const {
    std::vector<double> p(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) p[i] = dot(samples[i], dir);
    return p;
  }
  bool same_samples(const EndpointBatch& o) const {
    if (o.dim != dim || o.samples.size() != samples.size()) return false;
    for (std::size_t i = 0; i < samples.size(); ++i)
      for (int k = 0; k < dim; ++k)
      {
        const double a = samples[i][k], b = o.samples[i][k];
        if (std::memcmp(&a, &b, sizeof(double)) != 0) return false;
      }
    return true;
  }

  void write_csv(std::ostream& os) const {
    os << "# perhom-batch v1 regime=" << regime << " source=" << source << " eps=" << eps << " seed=" << seed
       << " t=" << horizon << '\n';
    os << "path";
    for (int k = 0; k < dim; ++k) os << ",y" << k + 1;
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      os << i;
      for (int k = 0; k < dim; ++k) os << ',' << samples[i][k];
      os << '\n';
    }
  }

  // Binary layout (little-endian): "PHBATCH\0", u32 version, u32 dim, u64 N,
  // f64 eps, u64 seed, f64 t, f64 ρ·t, u32 len + regime, u32 len + source,
  // then N·dim f64 samples, row-major.
  static constexpr std::uint32_t kBinaryVersion = 1;
  void write_binary(std::ostream& os) const {
    auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    auto put_str = [&](const std::string& s) {
      put(static_cast<std::uint32_t>(s.size()));
      os.write(s.data(), static_cast<std::streamsize>(s.size()));
    };
    os.write("PHBATCH\0", 8);
    put(kBinaryVersion);
    put(static_cast<std::uint32_t>(dim));
    put(static_cast<std::uint64_t>(samples.size()));
    put(eps);
    put(seed);
    put(horizon);
    put(unscaled_horizon);
    put_str(regime);
    put_str(source);
    for (const auto& v : samples)
      for (int k = 0; k < dim; ++k) put(v[k]);
  }
  static EndpointBatch read_binary(std::istream& is) {
    auto get = [&](auto& v) {
      if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) throw Error("truncated batch file");
    };
    auto get_str = [&] {
      std::uint32_t n = 0;
      get(n);
      if (n > (1u << 20)) throw Error("corrupt batch file");
      std::string s(n, '\0');
      if (!is.read(s.data(), n)) throw Error("truncated batch file");
      return s;
    };
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, "PHBATCH\0", 8) != 0) throw Error("not a perhom batch file");
    std::uint32_t ver = 0, d = 0;
    std::uint64_t n = 0;
    get(ver);
    if (ver != kBinaryVersion) throw Error("unsupported batch version " + std::to_string(ver));
    EndpointBatch b;
    get(d);
    if (d < 1 || d > 3) throw Error("corrupt batch file");
    b.dim = static_cast<int>(d);
    get(n);
    get(b.eps);
    get(b.seed);
    get(b.horizon);
    get(b.unscaled_horizon);
    b.regime = get_str();
    b.source = get_str();
    b.samples.resize(n);
    for (auto& v : b.samples)
      for (int k = 0; k < b.dim; ++k) get(v[k]);
    return b;
  }
};

// Runs `n` independent paths of `m` from x0 over [0,T]; sample i is f(X_T of path i).
template <class Map>
std::vector<Vec> run_batch(const ProcessModel& m, const Vec& x0, double T, std::size_t n, std::uint64_t seed,
                           const PathRunOptions& po, int workers, Map&& f) {
  std::vector<Vec> out(n);
  const std::uint64_t ps = path_seed(seed);
  parallel_for(n, workers, [&](std::size_t i) {
    Rng rng(ps, i);
    out[i] = f(run_path(m, x0, T, rng, po));
  });
  return out;
}

// N samples of Y^ε_t = εX_{ρt} − ε·ρ·v(ε)·t with ρ from the regime table.
inline EndpointBatch scaled_endpoint_batch(const JumpSpec& s, const SimConfig& c,
                                           const std::optional<DriftAverages>& avg = std::nullopt) {
  const auto t0 = std::chrono::steady_clock::now();
  const Regime r = resolve_regime(s, c);
  const double eps = c.eps;
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("ε must lie in (0,1)");
  const double rho = time_scale(s, r, eps);
  const double T = rho * c.horizon;
  Vec v;
  if (needs_centering(r)) {
    if (!avg) throw PreconditionError("regime " + to_string(r) + " needs drift averages for centering");
    v = centering_velocity(r, *avg, eps);
  }
  const ProcessModel m = model_for(s, c, T);
  PathRunOptions po;
  po.dt = c.dt > 0.0 ? c.dt : default_dt(s, c.delta);
  const Vec shift = v * (eps * rho * c.horizon);
  EndpointBatch b;
  b.dim = s.dim;
  b.regime = to_string(r);
  b.eps = eps;
  b.seed = c.seed;
  b.horizon = c.horizon;
  b.unscaled_horizon = T;
  b.samples = run_batch(m, c.x0, T, static_cast<std::size_t>(c.paths), c.seed, po, c.workers,
                        [&](const Vec& x) { return x * eps - shift; });
  b.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return b;
}

}  // namespace perhom
