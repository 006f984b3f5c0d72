// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "perhom/averaging.hpp"
#include "perhom/corrector.hpp"
#include "perhom/engine.hpp"
#include "perhom/pathsim.hpp"

namespace perhom {

enum class Compensation { NoCompensation, UnitBall, Full };

inline std::string to_string(Compensation c) {
  switch (c) {
    case Compensation::NoCompensation: return "none";
    case Compensation::UnitBall: return "unit_ball";
    default: return "full";
  }
}

inline Compensation compensation_for(double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw PreconditionError("stable index must lie in (0,2)");
  if (std::abs(alpha - 1.0) < 1e-12) return Compensation::UnitBall;
  return alpha < 1.0 ? Compensation::NoCompensation : Compensation::Full;
}

// α-stable law with Lévy measure k̄₀(θ) ϱ₀(dθ) r^{-1-α} dr. k̄₀ lives on the
// table nodes; directions in between use the nearest node.
struct StableLaw {
  int dim = 1;
  double alpha = 1.0;
  SphericalMeasure rho0;
  EffectiveKernelTable table;
  Compensation convention = Compensation::UnitBall;
  Vec drift;

  double kmax() const {
    double m = 0.0;
    for (double v : table.kbar0) m = std::max(m, v);
    return m;
  }
  // ∫ θ k̄₀ ϱ₀(dθ) and ∫ θθᵀ k̄₀ ϱ₀(dθ) on the nodes.
  Vec first_moment() const {
    Vec v;
    for (std::size_t i = 0; i < table.nodes.size(); ++i) v += table.nodes[i].theta * (table.nodes[i].weight * table.kbar0[i]);
    return v;
  }
  Mat3 second_moment() const {
    Mat3 m = Mat3::Zero();
    for (std::size_t i = 0; i < table.nodes.size(); ++i) {
      const auto& n = table.nodes[i];
      for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) m(a, b) += n.weight * table.kbar0[i] * n.theta[a] * n.theta[b];
    }
    return m;
  }
  double mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < table.nodes.size(); ++i) m += table.nodes[i].weight * table.kbar0[i];
    return m;
  }
};

struct GaussianLaw {
  int dim = 1;
  Mat3 A = Mat3::Zero();
  Vec mean;
};

using LimitLaw = std::variant<StableLaw, GaussianLaw>;

inline int law_dim(const LimitLaw& l) {
  return std::visit([](const auto& x) { return x.dim; }, l);
}

inline StableLaw make_stable_law(int d, double alpha, SphericalMeasure rho0, EffectiveKernelTable table) {
  StableLaw s;
  s.dim = d;
  s.alpha = alpha;
  s.convention = compensation_for(alpha);
  s.rho0 = std::move(rho0);
  s.table = std::move(table);
  for (double v : s.table.kbar0)
    if (v < 0.0) throw PreconditionError("k̄₀ must be nonnegative");
  return s;
}

// Stable law with constant k̄₀ on the nodes of ϱ₀.
inline StableLaw make_stable_law(int d, double alpha, const SphericalMeasure& rho0, double kbar0, int resolution = 64) {
  EffectiveKernelTable t;
  t.dim = d;
  t.nodes = rho0.nodes(d, resolution);
  t.kbar0.assign(t.nodes.size(), kbar0);
  return make_stable_law(d, alpha, rho0, std::move(t));
}

// ∫_0^∞ (e^{iar} − 1 − iar·c(r)) r^{-1-α} dr for the convention's c.
inline cplx radial_stable_exponent(double alpha, Compensation c, double a) {
  if (a == 0.0) return 0.0;
  if (c == Compensation::UnitBall) {
    constexpr double kEulerGamma = 0.57721566490153286061;
    return cplx(-0.5 * kPi * std::abs(a), a * (1.0 - kEulerGamma - std::log(std::abs(a))));
  }
  const double sg = a > 0.0 ? 1.0 : -1.0;
  return std::tgamma(-alpha) * std::pow(std::abs(a), alpha) * std::exp(cplx(0.0, -0.5 * kPi * alpha * sg));
}

// Lévy exponent η(u) with E e^{i⟨u,Y_t⟩} = e^{tη(u)}.
inline cplx limit_exponent(const LimitLaw& law, const Vec& u) {
  if (const auto* g = std::get_if<GaussianLaw>(&law)) {
    double q = 0.0;
    for (int a = 0; a < g->dim; ++a)
      for (int b = 0; b < g->dim; ++b) q += u[a] * g->A(a, b) * u[b];
    return cplx(-0.5 * q, dot(u, g->mean));
  }
  const auto& s = std::get<StableLaw>(law);
  cplx eta(0.0, dot(u, s.drift));
  for (std::size_t i = 0; i < s.table.nodes.size(); ++i) {
    const double w = s.table.nodes[i].weight * s.table.kbar0[i];
    if (w != 0.0) eta += w * radial_stable_exponent(s.alpha, s.convention, dot(u, s.table.nodes[i].theta));
  }
  return eta;
}

inline cplx char_fn(const LimitLaw& law, const Vec& u, double t) { return std::exp(t * limit_exponent(law, u)); }

// ---------------------------------------------------------------------------
// Sampling

struct LimitSampling {
  double delta = 0.02;  // Gaussian substitution radius
  int workers = 1;
  double budget = kTruncationBudget;
};

// Process model of the stable law with the same engine as the periodic
// process: jumps in (δ, R] by candidate + thinning, the rest by a Gaussian
// and a constant drift.
inline ProcessModel stable_limit_model(const StableLaw& s, double t, const LimitSampling& o) {
  const int d = s.dim;
  const double delta = o.delta;
  const double a = s.alpha;
  const double kmax = s.kmax();
  ProcessModel m;
  m.dim = d;
  const double rho_mass = s.rho0.total_mass(d);
  const double rmax = std::max(1.0, std::pow(rho_mass * t * std::max(kmax, 1e-300) / (a * o.budget), 1.0 / a));
  if (kmax > 0.0) {
    m.kdom = kmax;
    const auto sampler = std::make_shared<RadialSampler>(RadialSampler::power(a, delta, rmax));
    const auto rho0 = std::make_shared<SphericalMeasure>(s.rho0);
    CandidateSource src;
    src.mass = rho_mass * sampler->mass();
    src.draw = [sampler, rho0, d](Rng& rng) { return rho0->sample(rng, d) * sampler->draw(rng); };
    m.sources.push_back(std::move(src));
    const bool flat = std::all_of(s.table.kbar0.begin(), s.table.kbar0.end(), [&](double v) { return v == kmax; });
    if (!flat) {
      const auto table = std::make_shared<EffectiveKernelTable>(s.table);
      m.kernel = [table](const Vec&, const Vec& z) { return table->at(z * (1.0 / norm(z))); };
    }
  }
  const Vec m1 = s.first_moment();
  Vec drift = s.drift;
  switch (s.convention) {
    case Compensation::NoCompensation: drift += m1 * (std::pow(delta, 1.0 - a) / (1.0 - a)); break;
    case Compensation::UnitBall: drift -= m1 * std::log(1.0 / delta); break;
    case Compensation::Full: drift -= m1 * (std::pow(delta, 1.0 - a) / (a - 1.0)); break;
  }
  const Mat3 cov = s.second_moment() * (std::pow(delta, 2.0 - a) / (2.0 - a));
  CoefficientField& cf = m.coef;
  cf.dim = d;
  cf.const_drift = drift;
  cf.x_independent = true;
  cf.has_cov = cov.cwiseAbs().maxCoeff() > 0.0;
  if (cf.has_cov) {
    CoefficientField::Group g;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) g.m[i][j] = cov(i, j);
    cf.groups.push_back(g);
  }
  cf.drift_zero = norm(drift) == 0.0;
  m.finalize();
  return m;
}

inline EndpointBatch sample_limit(const LimitLaw& law, double t, std::size_t N, std::uint64_t seed,
                                  const LimitSampling& o = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  EndpointBatch b;
  b.dim = law_dim(law);
  b.source = "limit";
  b.seed = seed;
  b.horizon = t;
  b.unscaled_horizon = t;
  b.samples.resize(N);
  const std::uint64_t ps = mix_seed(seed, 0x6c696d6974ULL);
  if (const auto* g = std::get_if<GaussianLaw>(&law)) {
    const int d = g->dim;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g->A.topLeftCorner(d, d));
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues()(0) < -1e-10 * scale) throw PreconditionError("covariance matrix is not positive semidefinite");
    const Mat3 root = psd_sqrt(g->A * t, d);
    b.regime = "gaussian";
    parallel_for(N, o.workers, [&](std::size_t i) {
      Rng rng(ps, i);
      b.samples[i] = g->mean * t + detail::mat_vec(root, detail::gaussian_vec(rng, d), d);
    });
  } else {
    const auto& s = std::get<StableLaw>(law);
    b.regime = "stable";
    const ProcessModel m = stable_limit_model(s, t, o);
    PathRunOptions po;
    parallel_for(N, o.workers, [&](std::size_t i) {
      Rng rng(ps, i);
      b.samples[i] = run_path(m, Vec{}, t, rng, po);
    });
  }
  b.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return b;
}

// Exact draws for 1-d symmetric laws (Chambers–Mallows–Stuck), used as an
// independent reference for the engine-based sampler.
inline std::vector<double> exact_symmetric_stable(const StableLaw& s, double t, std::size_t N, std::uint64_t seed) {
  if (s.dim != 1) throw PreconditionError("exact sampler is one-dimensional");
  const cplx eta1 = limit_exponent(LimitLaw{s}, Vec{1.0});
  if (std::abs(eta1.imag()) > 1e-12 * std::max(1.0, std::abs(eta1.real())))
    throw PreconditionError("exact sampler needs a symmetric law");
  const double a = s.alpha;
  const double scale = std::pow(-t * eta1.real(), 1.0 / a);
  std::vector<double> out(N);
  const std::uint64_t ps = mix_seed(seed, 0x636d73ULL);
  for (std::size_t i = 0; i < N; ++i) {
    Rng rng(ps, i);
    const double v = kPi * (rng.uniform() - 0.5);
    const double w = rng.exponential(1.0);
    double x;
    if (std::abs(a - 1.0) < 1e-12) {
      x = std::tan(v);
    } else {
      x = std::sin(a * v) / std::pow(std::cos(v), 1.0 / a) * std::pow(std::cos((1.0 - a) * v) / w, (1.0 - a) / a);
    }
    out[i] = scale * x;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predicted limits

struct PredictOptions {
  int angular_resolution = 64;
  int workers = 1;
  CorrectorOptions corrector;
  std::vector<double> critical_ladder{1e-3, 1e-6, 1e-9};
};

struct PredictedLimit {
  LimitLaw law;
  Regime regime = Regime::StableNoCenter;
  std::optional<CorrectorField> corrector;
  std::optional<CovarianceMatrix> uncorrected;  // ψ ≡ 0
  std::optional<TorusMeasure> corrector_mu;
  std::vector<std::string> notes;
};

inline PredictedLimit predicted_limit(const JumpSpec& s, const TorusMeasure& mu, Regime r, const PredictOptions& o = {}) {
  check_regime(s, r);
  PredictedLimit out;
  out.regime = r;
  if (is_stable_regime(r)) {
    const double a = s.large->phi.index();
    auto table = effective_kernel_table(s, mu, o.angular_resolution, o.workers);
    out.law = make_stable_law(s.dim, a, s.large->rho0, std::move(table));
    return out;
  }
  if (r == Regime::CriticalLog) {
    const auto cc = critical_covariance(s, mu, o.critical_ladder, o.angular_resolution);
    if (!cc.converged) out.notes.push_back("critical covariance ladder did not settle");
    out.law = GaussianLaw{s.dim, cc.extrapolated.A, Vec{}};
    return out;
  }
  // Diffusive: the grid corrector carries its own invariant measure, so the
  // right-hand side is centered exactly; d = 3 falls back to Feynman–Kac with μ.
  CorrectorOptions co = o.corrector;
  co.workers = o.workers;
  if (s.dim <= 2) {
    if (co.n <= 0) co.n = mu.resolution();
    const GridPoissonSolver sol(assemble_operator(s, co));
    TorusMeasure mug = sol.invariant_measure();
    if (sol.min_weight() < -1e-10) out.notes.push_back("discrete invariant measure had negative entries (clipped)");
    const auto rhs = corrector_rhs(s, mug, r);
    co.center_rhs = true;
    out.corrector = solve_poisson(s, rhs, CorrectorMethod::Grid, co);
    out.corrector_mu = mug;
  } else {
    if (co.n <= 0) co.n = mu.resolution();
    const auto rhs = corrector_rhs(s, mu, r);
    out.corrector = solve_poisson(s, rhs, CorrectorMethod::FeynmanKac, co, mu);
    out.corrector_mu = mu;
  }
  const auto A = covariance_matrix(s, *out.corrector_mu, &*out.corrector, co);
  out.uncorrected = covariance_matrix(s, *out.corrector_mu, nullptr, co);
  out.law = GaussianLaw{s.dim, A.A, Vec{}};
  return out;
}

inline nlohmann::ordered_json to_json(const LimitLaw& law) {
  nlohmann::ordered_json j;
  if (const auto* g = std::get_if<GaussianLaw>(&law)) {
    j["type"] = "gaussian";
    j["dim"] = g->dim;
    CovarianceMatrix c;
    c.dim = g->dim;
    c.A = g->A;
    j["covariance"] = c.to_json();
    j["mean"] = std::vector<double>(g->mean.c, g->mean.c + g->dim);
    return j;
  }
  const auto& s = std::get<StableLaw>(law);
  j["type"] = "stable";
  j["dim"] = s.dim;
  j["alpha"] = s.alpha;
  j["convention"] = to_string(s.convention);
  j["drift"] = std::vector<double>(s.drift.c, s.drift.c + s.dim);
  j["kbar0_weighted_mean"] = s.table.weighted_mean();
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < s.table.nodes.size(); ++i)
    nodes.push_back({{"theta", std::vector<double>(s.table.nodes[i].theta.c, s.table.nodes[i].theta.c + s.dim)},
                     {"rho0_weight", s.table.nodes[i].weight},
                     {"kbar0", s.table.kbar0[i]}});
  j["nodes"] = nodes;
  return j;
}

}  // namespace perhom
