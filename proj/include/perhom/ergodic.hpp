// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perhom/pathsim.hpp"
#include "perhom/regime.hpp"
#include "perhom/stats.hpp"
#include "perhom/torus.hpp"

namespace perhom {

struct ErgodicOptions {
  int paths = 200;
  double horizon = 200.0;
  double burn_in = -1.0;  // negative: 20% of the horizon
  int grid = 0;           // 0: 64 per axis for d <= 2, 32 for d = 3
  std::uint64_t seed = 1;
  int workers = 1;
  double delta = 0.25;
  double dt = 0.0;  // 0: default_dt
};

inline int default_histogram_grid(int d) { return d <= 2 ? 64 : 32; }

struct InvariantEstimate {
  TorusMeasure mu;
  double half_tv = 0.0;  // TV between the two antithetic halves
  std::vector<std::string> warnings;
};

namespace detail {

struct OccupationObserver {
  const TorusMeasure* grid;
  std::vector<double>* hist;
  double burn;
  void interval(const Vec& x, double t0, double t1) {
    const double w = t1 - std::max(t0, burn);
    if (w > 0.0) (*hist)[grid->cell_of(x)] += w;
  }
  void jump(double, const Vec&, const Vec&, bool) {}
};

inline SimConfig sim_config(const ErgodicOptions& o) {
  SimConfig c;
  c.delta = o.delta;
  c.dt = o.dt;
  c.seed = o.seed;
  return c;
}

}  // namespace detail

// Occupation histogram of X_t mod 1 over [burn-in, T], pooled over paths.
// Path i < N/2 starts at a uniform point u_i and path N/2 + i at −u_i.
inline InvariantEstimate estimate_invariant_measure(const JumpSpec& s, const ErgodicOptions& o) {
  if (o.paths < 2) throw PreconditionError("invariant-measure estimation needs at least two paths");
  const int d = s.dim;
  const double T = o.horizon;
  const double burn = o.burn_in < 0.0 ? 0.2 * T : o.burn_in;
  if (!(burn < T)) throw PreconditionError("burn-in must be shorter than the horizon");
  const int n = o.grid > 0 ? o.grid : default_histogram_grid(d);
  const TorusMeasure grid = TorusMeasure::uniform(d, n);
  const ProcessModel m = model_for(s, detail::sim_config(o), T);
  PathRunOptions po;
  po.dt = o.dt > 0.0 ? o.dt : default_dt(s, o.delta);
  po.fine = true;
  const std::size_t N = static_cast<std::size_t>(o.paths), half = N / 2;
  std::vector<std::vector<double>> per(N);
  const std::uint64_t ps = mix_seed(o.seed, 0x6572676fULL), ss = mix_seed(o.seed, 0x73746172ULL);
  parallel_for(N, o.workers, [&](std::size_t i) {
    const std::size_t base = i < half ? i : i - half;
    Rng sr(ss, base);
    Vec x0;
    for (int k = 0; k < d; ++k) x0[k] = sr.uniform();
    if (i >= half) x0 = wrap(x0 * -1.0, d);
    per[i].assign(grid.cells(), 0.0);
    detail::OccupationObserver obs{&grid, &per[i], burn};
    Rng rng(ps, i);
    run_path(m, x0, T, rng, obs, po);
  });
  std::vector<double> all(grid.cells(), 0.0), a(grid.cells(), 0.0), b(grid.cells(), 0.0);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t c = 0; c < all.size(); ++c) (i < half ? a : b)[c] += per[i][c];
  for (std::size_t c = 0; c < all.size(); ++c) all[c] = a[c] + b[c];
  InvariantEstimate out{TorusMeasure(d, n, all), 0.0, {}};
  out.half_tv = total_variation(TorusMeasure(d, n, a), TorusMeasure(d, n, b));
  if (out.half_tv > 0.1)
    out.warnings.push_back("antithetic halves disagree: TV = " + std::to_string(out.half_tv) +
                           " > 0.1; the chain may not have converged");
  return out;
}

// Σ μ(cell) g(center).
template <class G>
auto mu_average(const TorusMeasure& mu, G&& g) {
  return mu.average(std::forward<G>(g));
}

// b̄, b̄_∞ (when defined) and R ↦ b̄_R under μ.
inline DriftAverages drift_averages(const JumpSpec& s, const TorusMeasure& mu) {
  auto sp = std::make_shared<const JumpSpec>(s);
  auto mp = std::make_shared<const TorusMeasure>(mu);
  DriftAverages out;
  out.bbar = mu.average([&](const Vec& x) { return s.drift(x); });
  if (!s.large || s.large->phi.index() > 1.0) {
    if (s.large) {
      const DriftEvaluator ev(*sp, std::numeric_limits<double>::infinity());
      out.bbar_inf = mu.average([&](const Vec& x) { return ev(x); });
    } else {
      out.bbar_inf = Vec{};
    }
  }
  out.bbar_trunc = [sp, mp](double R) {
    if (!sp->large) return Vec{};
    const DriftEvaluator ev(*sp, R);
    return mp->average([&](const Vec& x) { return ev(x); });
  };
  return out;
}

// k₀ = lim_{|z|→∞} ∫k(x,z)μ(dx), probed at |z| = r along the ϱ₀ nodes.
struct K0Estimate {
  std::vector<double> radii;
  std::vector<double> values;
  double value = 0.0;
  bool cauchy = true;
};

inline K0Estimate estimate_k0(const JumpSpec& s, const TorusMeasure& mu,
                              std::vector<double> radii = {1e2, 1e3, 1e4}, int angular_res = 64) {
  if (!s.large) throw PreconditionError("k₀ needs a large-jump part");
  const auto nodes = s.large->rho0.nodes(s.dim, angular_res);
  double wsum = 0.0;
  for (const auto& n : nodes) wsum += n.weight;
  K0Estimate out;
  out.radii = radii;
  for (double r : radii) {
    double v = 0.0;
    for (const auto& n : nodes) v += n.weight * mu.average([&](const Vec& x) { return s.kernel(x, n.theta * r); });
    out.values.push_back(v / wsum);
  }
  out.value = out.values.back();
  const double scale = std::max(1e-12, std::abs(out.value));
  for (std::size_t i = 1; i < out.values.size(); ++i)
    if (std::abs(out.values[i] - out.values[i - 1]) > 0.05 * scale) out.cauchy = false;
  return out;
}

// ---------------------------------------------------------------------------
// Mixing rate

struct MixingEstimate {
  double lambda = 0.0;    // λ̂₁
  double prefactor = 0.0; // Ĉ₀
  double residual = 0.0;  // RMS of the log-linear fit
  bool ok = false;
  std::string note;
  std::vector<double> times;
  std::vector<double> sup_dev;  // sup_x |Ê_x f(X_t) − μ̂(f)|
  std::vector<double> se;       // standard error at the maximizing start

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["lambda1"] = lambda;
    j["C0"] = prefactor;
    j["fit_residual"] = residual;
    j["ok"] = ok;
    if (!note.empty()) j["note"] = note;
    j["times"] = times;
    j["sup_deviation"] = sup_dev;
    j["standard_error"] = se;
    return j;
  }
};

struct MixingOptions {
  std::vector<double> times{0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
  int starts_per_axis = 8;
  int paths_per_start = 2000;
  std::uint64_t seed = 1;
  int workers = 1;
  double delta = 0.25;
  double dt = 0.0;
};

// Least-squares fit of log sup_x|Ê_x f(X_t) − μ̂(f)| = log C₀ − λ₁t over the
// times where the deviation exceeds three standard errors.
inline MixingEstimate mixing_rate(const JumpSpec& s, const TorusMeasure& mu, const std::vector<TrigPoly>& fs,
                                  const MixingOptions& o) {
  MixingEstimate out;
  out.times = o.times;
  const int d = s.dim;
  std::vector<TrigPoly> live;
  for (const auto& f : fs)
    if (f.sup_norm_bound() > 0.0) live.push_back(f);
  if (live.empty()) {
    out.note = "all test functions vanish; skipped";
    return out;
  }
  for (std::size_t j = 1; j < o.times.size(); ++j)
    if (!(o.times[j] > o.times[j - 1])) throw PreconditionError("mixing time grid must be increasing");
  SimConfig sc;
  sc.delta = o.delta;
  const double Tmax = o.times.back();
  const ProcessModel m = model_for(s, sc, Tmax);
  PathRunOptions po;
  po.dt = o.dt > 0.0 ? o.dt : default_dt(s, o.delta);
  const TorusMeasure starts = TorusMeasure::uniform(d, o.starts_per_axis);
  const std::size_t S = starts.cells(), P = static_cast<std::size_t>(o.paths_per_start), K = o.times.size();
  const std::size_t F = live.size();
  // sums[(start·F + f)·K + k] and squares.
  std::vector<double> sum(S * F * K, 0.0), sq(S * F * K, 0.0);
  const std::uint64_t ps = mix_seed(o.seed, 0x6d6978ULL);
  std::vector<std::vector<double>> vals(S * P);
  parallel_for(S * P, o.workers, [&](std::size_t idx) {
    const std::size_t st = idx / P;
    Rng rng(ps, idx);
    Vec x = starts.center(st);
    double t = 0.0;
    auto& v = vals[idx];
    v.resize(F * K);
    for (std::size_t k = 0; k < K; ++k) {
      x = run_path(m, x, o.times[k] - t, rng, po);
      t = o.times[k];
      for (std::size_t f = 0; f < F; ++f) v[f * K + k] = live[f].eval_x(x);
    }
  });
  for (std::size_t idx = 0; idx < S * P; ++idx) {
    const std::size_t st = idx / P;
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t k = 0; k < K; ++k) {
        const double v = vals[idx][f * K + k];
        sum[(st * F + f) * K + k] += v;
        sq[(st * F + f) * K + k] += v * v;
      }
  }
  std::vector<double> target(F);
  for (std::size_t f = 0; f < F; ++f) target[f] = mu.integrate(live[f]);
  out.sup_dev.assign(K, 0.0);
  out.se.assign(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t st = 0; st < S; ++st)
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t i = (st * F + f) * K + k;
        const double mean = sum[i] / P;
        const double var = std::max(0.0, sq[i] / P - mean * mean);
        const double dev = std::abs(mean - target[f]) / live[f].sup_norm_bound();
        if (dev > out.sup_dev[k]) {
          out.sup_dev[k] = dev;
          out.se[k] = std::sqrt(var / (P - 1.0)) / live[f].sup_norm_bound();
        }
      }
  }
  std::vector<double> tt, yy;
  for (std::size_t k = 0; k < K; ++k)
    if (out.sup_dev[k] > 3.0 * out.se[k] && out.sup_dev[k] > 0.0) {
      tt.push_back(o.times[k]);
      yy.push_back(std::log(out.sup_dev[k]));
    }
  if (tt.size() < 2) {
    out.note = "fewer than two time points above the noise floor; fit failed";
    return out;
  }
  const double tm = sample_mean(tt), ym = sample_mean(yy);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < tt.size(); ++i) {
    sxy += (tt[i] - tm) * (yy[i] - ym);
    sxx += (tt[i] - tm) * (tt[i] - tm);
  }
  const double slope = sxy / sxx;
  const double icpt = ym - slope * tm;
  double rss = 0.0;
  for (std::size_t i = 0; i < tt.size(); ++i) rss += std::pow(yy[i] - icpt - slope * tt[i], 2);
  out.lambda = -slope;
  out.prefactor = std::exp(icpt);
  out.residual = std::sqrt(rss / tt.size());
  out.ok = out.lambda > 0.0;
  if (!out.ok) out.note = "fitted rate is not positive";
  return out;
}

// ---------------------------------------------------------------------------
// Decay of ergodic averages: E|∫_s^t f(X^ε_r/ε) dr|² against 1/φ(1/ε)

struct DecayRow {
  double eps = 0.0;
  double rho = 0.0;
  double moment = 0.0;
  double se = 0.0;
  double scaled = 0.0;  // moment·ρ
};

struct DecayTable {
  std::vector<DecayRow> rows;
  double spread = 0.0;  // max(scaled)/min(scaled)
  bool bounded = false; // spread <= factor
  double factor = 4.0;
};

struct DecayOptions {
  int paths = 2000;
  double s = 0.0;
  double t = 1.0;
  std::uint64_t seed = 1;
  int workers = 1;
  double delta = 0.25;
  double dt = 0.0;
  double factor = 4.0;
};

namespace detail {
struct IntegralObserver {
  const TrigPoly* f;
  double lo;
  double acc = 0.0;
  void interval(const Vec& x, double t0, double t1) {
    const double w = t1 - std::max(t0, lo);
    if (w > 0.0) acc += w * f->eval_x(x);
  }
  void jump(double, const Vec&, const Vec&, bool) {}
};
}  // namespace detail

// Starts are drawn from μ (piecewise-constant density) so the process is
// stationary; the time integral uses the left-point rule on the path's steps.
inline DecayTable ergodic_average_decay(const JumpSpec& s, const TorusMeasure& mu, const TrigPoly& f,
                                        const std::vector<double>& ladder, const DecayOptions& o) {
  if (std::abs(mu.integrate(f)) > 1e-8 * std::max(1.0, f.sup_norm_bound()))
    throw PreconditionError("ergodic-average decay needs μ(f) = 0");
  DecayTable out;
  out.factor = o.factor;
  const int d = s.dim;
  const bool zero = f.sup_norm_bound() == 0.0;
  for (double eps : ladder) {
    DecayRow row;
    row.eps = eps;
    row.rho = s.large ? s.large->phi(1.0 / eps) : std::pow(eps, -2.0);
    if (!zero) {
      const double T0 = row.rho * o.s, T1 = row.rho * o.t;
      SimConfig sc;
      sc.delta = o.delta;
      const ProcessModel m = model_for(s, sc, T1);
      PathRunOptions po;
      po.dt = o.dt > 0.0 ? o.dt : default_dt(s, o.delta);
      po.fine = true;
      std::vector<double> v(static_cast<std::size_t>(o.paths));
      const std::uint64_t ps = mix_seed(o.seed, 0x64656361ULL + static_cast<std::uint64_t>(1.0 / eps));
      parallel_for(v.size(), o.workers, [&](std::size_t i) {
        Rng rng(ps, i);
        // Cell by weight, then uniform inside it.
        double u = rng.uniform();
        std::size_t c = 0;
        while (c + 1 < mu.cells() && u >= mu.weight(c)) u -= mu.weight(c++);
        Vec x0 = mu.center(c);
        for (int k = 0; k < d; ++k) x0[k] += (rng.uniform() - 0.5) * mu.cell_width();
        detail::IntegralObserver obs{&f, T0};
        run_path(m, x0, T1, rng, obs, po);
        const double I = obs.acc / row.rho;
        v[i] = I * I;
      });
      row.moment = sample_mean(v);
      row.se = std::sqrt(sample_variance(v) / v.size());
    }
    row.scaled = row.moment * row.rho;
    out.rows.push_back(row);
  }
  if (zero) {
    out.spread = 1.0;
    out.bounded = true;
    return out;
  }
  double lo = out.rows.front().scaled, hi = lo;
  for (const auto& r : out.rows) {
    lo = std::min(lo, r.scaled);
    hi = std::max(hi, r.scaled);
  }
  out.spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  out.bounded = out.spread <= o.factor;
  return out;
}

// ---------------------------------------------------------------------------
// Stationarity residual: |Ê_μ[g(X_Δ)] − μ(g)| in units of the MC standard error

struct StationarityRow {
  std::string name;
  double empirical = 0.0;
  double target = 0.0;
  double se = 0.0;
  double z = 0.0;
};

struct StationarityOptions {
  int starts = 20000;
  double lag = 1.0;
  std::uint64_t seed = 1;
  int workers = 1;
  double delta = 0.25;
  double dt = 0.0;
};

inline std::vector<StationarityRow> stationarity_residual(const JumpSpec& s, const TorusMeasure& mu,
                                                          const std::vector<std::pair<std::string, TrigPoly>>& gs,
                                                          const StationarityOptions& o) {
  const int d = s.dim;
  SimConfig sc;
  sc.delta = o.delta;
  const ProcessModel m = model_for(s, sc, o.lag);
  PathRunOptions po;
  po.dt = o.dt > 0.0 ? o.dt : default_dt(s, o.delta);
  std::vector<Vec> ends(static_cast<std::size_t>(o.starts));
  const std::uint64_t ps = mix_seed(o.seed, 0x73746174ULL);
  parallel_for(ends.size(), o.workers, [&](std::size_t i) {
    Rng rng(ps, i);
    double u = rng.uniform();
    std::size_t c = 0;
    while (c + 1 < mu.cells() && u >= mu.weight(c)) u -= mu.weight(c++);
    Vec x0 = mu.center(c);
    for (int k = 0; k < d; ++k) x0[k] += (rng.uniform() - 0.5) * mu.cell_width();
    ends[i] = run_path(m, x0, o.lag, rng, po);
  });
  std::vector<StationarityRow> rows;
  for (const auto& [name, g] : gs) {
    std::vector<double> v(ends.size());
    for (std::size_t i = 0; i < ends.size(); ++i) v[i] = g.eval_x(ends[i]);
    StationarityRow r;
    r.name = name;
    r.empirical = sample_mean(v);
    r.target = mu.integrate(g);
    r.se = std::sqrt(sample_variance(v) / v.size());
    r.z = r.se > 0.0 ? std::abs(r.empirical - r.target) / r.se : (r.empirical == r.target ? 0.0 : 1e300);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace perhom
