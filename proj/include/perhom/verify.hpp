// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perhom/ergodic.hpp"
#include "perhom/limits.hpp"
#include "perhom/pathsim.hpp"
#include "perhom/stats.hpp"

namespace perhom {

inline constexpr double kFinalKsThreshold = 0.05;
inline constexpr double kMonotoneSlack = 0.02;
inline constexpr const char* kHonestyClause =
    "Only fixed-time marginals are compared; agreement does not establish convergence in Skorohod space.";

inline double ks_projection(const EndpointBatch& a, const EndpointBatch& b, const Vec& dir) {
  if (a.size() == 0 || b.size() == 0) throw PreconditionError("KS needs nonempty batches");
  return ks_two_sample(a.projection(dir), b.projection(dir));
}

// The d axes followed by 2d random unit vectors drawn from the seed.
inline std::vector<Vec> projection_directions(int d, std::uint64_t seed) {
  std::vector<Vec> out;
  for (int i = 0; i < d; ++i) out.push_back(unit(i));
  if (d == 1) return out;
  const std::uint64_t ps = mix_seed(seed, 0x64697273ULL);
  for (int k = 0; k < 2 * d; ++k) {
    Rng rng(ps, static_cast<std::uint64_t>(k));
    out.push_back(SphericalMeasure::uniform_direction(rng, d));
  }
  return out;
}

struct EcfComparison {
  std::vector<Vec> freqs;
  std::vector<double> diff;
  std::vector<double> se;
  double distance = 0.0;  // max |φ̂ − φ|
  double max_z = 0.0;     // max |φ̂ − φ|/se

  int within(double k) const {
    int n = 0;
    for (std::size_t i = 0; i < diff.size(); ++i)
      if (diff[i] <= k * se[i]) ++n;
    return n;
  }
};

inline EcfComparison ecf_distance(const EndpointBatch& b, const LimitLaw& law, const std::vector<Vec>& freqs,
                                  double t = 1.0) {
  if (freqs.size() > 100) throw PreconditionError("at most 100 frequencies");
  EcfComparison out;
  out.freqs = freqs;
  for (const auto& u : freqs) {
    const auto e = empirical_cf(b.samples, u);
    const double d = std::abs(e.value - char_fn(law, u, t));
    out.diff.push_back(d);
    out.se.push_back(e.se);
    out.distance = std::max(out.distance, d);
    if (e.se > 0.0) out.max_z = std::max(out.max_z, d / e.se);
    else if (d > 1e-12) out.max_z = std::numeric_limits<double>::infinity();
  }
  return out;
}

// Frequencies along each direction at which |Re η| runs from ~0.1 to ~3, where
// the characteristic function is informative.
inline std::vector<Vec> frequency_grid(const LimitLaw& law, const std::vector<Vec>& dirs, int per_dir = 5) {
  std::vector<Vec> out;
  for (const auto& th : dirs) {
    auto level = [&](double s) { return -limit_exponent(law, th * s).real(); };
    double lo = 1e-6, hi = 1.0;
    while (level(hi) < 1.0 && hi < 1e6) hi *= 2.0;
    if (level(hi) < 1.0) continue;  // degenerate along θ
    for (int it = 0; it < 100; ++it) {
      const double mid = std::sqrt(lo * hi);
      (level(mid) < 1.0 ? lo : hi) = mid;
    }
    for (int k = 0; k < per_dir; ++k) {
      const double f = 0.1 * std::pow(30.0, static_cast<double>(k) / std::max(1, per_dir - 1));
      double a = 1e-8, b = hi * 64.0;
      for (int it = 0; it < 100; ++it) {
        const double mid = std::sqrt(a * b);
        (level(mid) < f ? a : b) = mid;
      }
      out.push_back(th * b);
    }
  }
  if (out.size() > 100) out.resize(100);
  return out;
}

// ---------------------------------------------------------------------------
// Convergence checks

struct ConvergenceRow {
  double eps = 0.0;
  std::size_t n = 0;
  std::vector<double> ks;  // per direction
  double ks_max = 0.0;
  double ks_critical = 0.0;
  double ecf = 0.0;
  double ecf_max_z = 0.0;
  double time_scale = 0.0;
  double wall_seconds = 0.0;
  std::string error;
};

struct ConvergenceReport {
  std::string regime;
  std::vector<Vec> directions;
  std::vector<ConvergenceRow> rows;  // decreasing ε
  double threshold = kFinalKsThreshold;
  double slack = kMonotoneSlack;
  bool final_ok = false;
  bool monotone = false;
  bool pass = false;
  std::vector<std::string> notes;
  nlohmann::ordered_json law;
  std::vector<EndpointBatch> batches;  // filled when CheckOptions::keep_batches

  // Wall time is left out so that reruns produce identical reports.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["regime"] = regime;
    j["statistic"] = "fixed-time marginal at t = 1";
    j["honesty"] = kHonestyClause;
    j["thresholds"] = {{"final_ks", threshold}, {"monotone_slack", slack}};
    nlohmann::ordered_json dirs = nlohmann::ordered_json::array();
    for (const auto& d : directions) dirs.push_back(std::vector<double>(d.c, d.c + kMaxDim));
    j["directions"] = dirs;
    nlohmann::ordered_json rs = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json x;
      x["eps"] = r.eps;
      x["n"] = r.n;
      x["ks"] = r.ks;
      x["ks_max"] = r.ks_max;
      x["ks_critical_1pct"] = r.ks_critical;
      x["ecf_distance"] = r.ecf;
      x["ecf_max_z"] = r.ecf_max_z;
      x["time_scale"] = r.time_scale;
      if (!r.error.empty()) x["error"] = r.error;
      rs.push_back(x);
    }
    j["rows"] = rs;
    j["final_ok"] = final_ok;
    j["monotone"] = monotone;
    j["verdict"] = pass ? "PASS" : "FAIL";
    j["notes"] = notes;
    j["limit_law"] = law;
    return j;
  }

  void write_csv(std::ostream& os) const {
    os << "eps,n,ks_max,ks_critical_1pct,ecf_distance,ecf_max_z\n";
    os.precision(10);
    for (const auto& r : rows)
      os << r.eps << ',' << r.n << ',' << r.ks_max << ',' << r.ks_critical << ',' << r.ecf << ',' << r.ecf_max_z
         << '\n';
  }
};

inline void decide(ConvergenceReport& rep) {
  rep.monotone = true;
  rep.final_ok = false;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    if (!rep.rows[i].error.empty()) {
      rep.monotone = false;
      continue;
    }
    if (i > 0 && rep.rows[i].ks_max > rep.rows[i - 1].ks_max + rep.slack) rep.monotone = false;
  }
  if (!rep.rows.empty() && rep.rows.back().error.empty()) rep.final_ok = rep.rows.back().ks_max <= rep.threshold;
  rep.pass = rep.final_ok && rep.monotone;
}

struct CheckOptions {
  std::optional<TorusMeasure> mu;       // supplied invariant measure
  std::optional<LimitLaw> law;          // override of the predicted limit
  ErgodicOptions ergodic;               // used when μ must be estimated
  PredictOptions predict;
  double horizon = 1.0;
  double delta = 0.25;
  double dt = 0.0;
  double rmax = 0.0;
  double delta_limit = 0.02;
  std::size_t reference_paths = 0;  // 0: same as N
  int workers = 1;
  int grid = 0;  // invariant-measure grid; 0: 128 (d=1) or the ergodic default
  bool keep_batches = false;
};

// Invariant measure used by the checks: the discrete operator's null vector in
// d = 1 (exact centering matters at scale 1/ε), the occupation estimate otherwise.
inline TorusMeasure check_measure(const JumpSpec& s, const CheckOptions& o, std::vector<std::string>* notes = nullptr) {
  if (o.mu) return *o.mu;
  if (s.dim == 1) {
    CorrectorOptions co = o.predict.corrector;
    co.n = o.grid > 0 ? o.grid : 128;
    co.workers = o.workers;
    const GridPoissonSolver sol(assemble_operator(s, co));
    if (notes) notes->push_back("invariant measure from the discretized generator, n = " + std::to_string(co.n));
    return sol.invariant_measure();
  }
  ErgodicOptions eo = o.ergodic;
  eo.workers = o.workers;
  if (o.grid > 0) eo.grid = o.grid;
  auto est = estimate_invariant_measure(s, eo);
  if (notes) {
    notes->push_back("invariant measure from occupation times, " + std::to_string(eo.paths) + " paths");
    for (auto& w : est.warnings) notes->push_back(w);
  }
  return est.mu;
}

namespace detail {
inline void score(ConvergenceRow& row, const EndpointBatch& b, const EndpointBatch& ref, const LimitLaw& law,
                  const std::vector<Vec>& dirs, const std::vector<Vec>& freqs, double horizon) {
  row.ks.clear();
  row.ks_max = 0.0;
  for (const auto& d : dirs) {
    row.ks.push_back(ks_projection(b, ref, d));
    row.ks_max = std::max(row.ks_max, row.ks.back());
  }
  row.ks_critical = ks_critical_1pct(b.size(), ref.size());
  const auto e = ecf_distance(b, law, freqs, horizon);
  row.ecf = e.distance;
  row.ecf_max_z = e.max_z;
}
}  // namespace detail

inline ConvergenceReport theorem_check(const JumpSpec& s, Regime r, std::vector<double> ladder, std::size_t N,
                                       std::uint64_t seed, const CheckOptions& o = {}) {
  check_regime(s, r);
  if (ladder.empty()) throw PreconditionError("ε ladder is empty");
  std::sort(ladder.begin(), ladder.end(), std::greater<>());
  ConvergenceReport rep;
  rep.regime = to_string(r);
  rep.directions = projection_directions(s.dim, seed);
  const TorusMeasure mu = check_measure(s, o, &rep.notes);
  LimitLaw law;
  std::optional<TorusMeasure> centering_mu;
  if (o.law) {
    law = *o.law;
    rep.notes.push_back("limit law supplied by the caller");
  } else {
    PredictOptions po = o.predict;
    po.workers = o.workers;
    auto p = predicted_limit(s, mu, r, po);
    law = p.law;
    centering_mu = p.corrector_mu;
    for (auto& n : p.notes) rep.notes.push_back(n);
  }
  rep.law = to_json(law);
  std::optional<DriftAverages> avg;
  if (needs_centering(r)) avg = drift_averages(s, centering_mu ? *centering_mu : mu);

  LimitSampling ls;
  ls.delta = o.delta_limit;
  ls.workers = o.workers;
  const std::size_t NR = o.reference_paths > 0 ? o.reference_paths : N;
  const EndpointBatch ref = sample_limit(law, o.horizon, NR, mix_seed(seed, 0x726566ULL), ls);
  const auto freqs = frequency_grid(law, rep.directions, 4);

  for (double eps : ladder) {
    ConvergenceRow row;
    row.eps = eps;
    row.n = N;
    try {
      SimConfig c;
      c.paths = static_cast<int>(N);
      c.horizon = o.horizon;
      c.delta = o.delta;
      c.dt = o.dt;
      c.rmax = o.rmax;
      c.seed = seed;
      c.eps = eps;
      c.regime = r;
      c.workers = o.workers;
      row.time_scale = time_scale(s, r, eps);
      const EndpointBatch b = scaled_endpoint_batch(s, c, avg);
      row.wall_seconds = b.wall_seconds;
      detail::score(row, b, ref, law, rep.directions, freqs, o.horizon);
      if (o.keep_batches) rep.batches.push_back(b);
    } catch (const Error& e) {
      row.error = e.what();
    }
    rep.rows.push_back(row);
  }
  decide(rep);
  return rep;
}

// Scores the batches kept by an earlier check against another law, e.g. a
// deliberately wrong one. The reference is drawn exactly as theorem_check does.
inline ConvergenceReport rescore(const ConvergenceReport& base, const LimitLaw& law, std::uint64_t seed,
                                 const CheckOptions& o = {}) {
  if (base.batches.size() != base.rows.size()) throw PreconditionError("rescore needs a report with kept batches");
  ConvergenceReport rep;
  rep.regime = base.regime;
  rep.directions = base.directions;
  rep.law = to_json(law);
  rep.notes.push_back("rescored against a supplied law");
  LimitSampling ls;
  ls.delta = o.delta_limit;
  ls.workers = o.workers;
  const std::size_t NR = o.reference_paths > 0 ? o.reference_paths : base.batches.front().size();
  const EndpointBatch ref = sample_limit(law, o.horizon, NR, mix_seed(seed, 0x726566ULL), ls);
  const auto freqs = frequency_grid(law, rep.directions, 4);
  for (std::size_t i = 0; i < base.rows.size(); ++i) {
    ConvergenceRow row = base.rows[i];
    detail::score(row, base.batches[i], ref, law, rep.directions, freqs, o.horizon);
    rep.rows.push_back(row);
  }
  decide(rep);
  return rep;
}

// ---------------------------------------------------------------------------
// Tail index

struct TailIndexEstimate {
  double alpha = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t k = 0;
  bool beyond_two = false;  // consistent with a light (non-stable) tail
};

// Hill estimator over the top 5% of |Y|, 95% percentile bootstrap interval.
inline TailIndexEstimate tail_index(const std::vector<double>& ys, std::uint64_t seed = 1, int bootstrap = 200) {
  if (ys.size() < 1000) throw PreconditionError("tail index needs at least 1000 samples");
  std::vector<double> a(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) a[i] = std::abs(ys[i]);
  const std::size_t k = std::max<std::size_t>(10, ys.size() / 20);
  auto hill = [k](std::vector<double> v) {
    std::nth_element(v.begin(), v.end() - static_cast<std::ptrdiff_t>(k + 1), v.end());
    const double thr = *(v.end() - static_cast<std::ptrdiff_t>(k + 1));
    if (!(thr > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    std::size_t m = 0;
    for (double x : v)
      if (x > thr) {
        s += std::log(x / thr);
        ++m;
      }
    if (m == 0 || s <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(m) / s;
  };
  TailIndexEstimate out;
  out.k = k;
  out.alpha = hill(a);
  if (!std::isfinite(out.alpha)) throw PreconditionError("tail index undefined for a (nearly) constant batch");
  std::vector<double> boots;
  const std::uint64_t ps = mix_seed(seed, 0x68696c6cULL);
  for (int b = 0; b < bootstrap; ++b) {
    Rng rng(ps, static_cast<std::uint64_t>(b));
    std::vector<double> r(a.size());
    for (auto& x : r) x = a[static_cast<std::size_t>(rng.uniform() * a.size()) % a.size()];
    const double h = hill(std::move(r));
    if (std::isfinite(h)) boots.push_back(h);
  }
  if (!boots.empty()) {
    out.ci_lo = quantile(boots, 0.025);
    out.ci_hi = quantile(boots, 0.975);
  }
  out.beyond_two = out.alpha > 2.0;
  return out;
}

}  // namespace perhom
