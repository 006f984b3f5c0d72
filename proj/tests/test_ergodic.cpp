// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "perhom/ergodic.hpp"
#include "perhom/fixtures.hpp"
#include "perhom/symbol.hpp"

using namespace perhom;

namespace {

// Pure-jump chain whose rate is 1 + 0.5cos(2πx) and whose jump law does not
// depend on x: the invariant density is proportional to 1/k.
TorusMeasure inverse_rate_measure(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    // exact cell integral of 1/(1 + 0.5cos 2πx) is not elementary per cell;
    // fine midpoint sub-sampling is well below the MC error.
    double s = 0.0;
    for (int j = 0; j < 64; ++j) {
      const double x = (i + (j + 0.5) / 64.0) / n;
      s += 1.0 / (1.0 + 0.5 * std::cos(kTwoPi * x));
    }
    w[i] = s;
  }
  return TorusMeasure(1, n, w);
}

JumpSpec large_only_stable(double alpha) {
  JumpSpec s;
  s.dim = 1;
  s.small = SmallZero{};
  s.large = LargeJumps{fixtures::pm_atoms(1.0, 1.0), PowerPhi{alpha}, std::nullopt};
  s.kernel = fixtures::constant_kernel(1);
  s.drift = fixtures::zero_drift(1);
  return s;
}

TrigPoly cos1() { return TrigPoly::cos_x(1, {1, 0, 0}); }

}  // namespace

TEST(InvariantMeasure, TranslationInvariantSpecGivesUniform) {
  ErgodicOptions o;
  o.paths = 200;
  o.horizon = 200.0;
  const auto est = estimate_invariant_measure(fixtures::symmetric_stable_1d(1.5), o);
  EXPECT_LE(total_variation(est.mu, TorusMeasure::uniform(1, 64)), 0.05);
  EXPECT_TRUE(est.warnings.empty());
}

TEST(InvariantMeasure, InverseRateDensityAndSeedAgreement) {
  const JumpSpec s = fixtures::ex4_1_cauchy().spec;
  ErgodicOptions o;
  o.paths = 200;
  o.horizon = 200.0;
  const auto a = estimate_invariant_measure(s, o);
  o.seed = 2;
  const auto b = estimate_invariant_measure(s, o);
  EXPECT_LE(total_variation(a.mu, b.mu), 0.05);
  EXPECT_LE(total_variation(a.mu, inverse_rate_measure(64)), 0.05);
  // Cell weight at x≈1/2 (k=0.5) is three times the weight at x≈0 (k=1.5).
  const double lo = a.mu.weight(0) + a.mu.weight(63), hi = a.mu.weight(31) + a.mu.weight(32);
  EXPECT_NEAR(hi / lo, 3.0, 0.3);
}

TEST(InvariantMeasure, StationarityResidualWithinThreeSigma) {
  const JumpSpec s = fixtures::ex4_1_cauchy().spec;
  ErgodicOptions o;
  o.paths = 400;
  o.horizon = 400.0;
  const auto est = estimate_invariant_measure(s, o);
  std::vector<std::pair<std::string, TrigPoly>> gs{{"cos1", cos1()},
                                                   {"sin1", TrigPoly::sin_x(1, {1, 0, 0})},
                                                   {"cos2", TrigPoly::cos_x(1, {2, 0, 0})},
                                                   {"sin2", TrigPoly::sin_x(1, {2, 0, 0})},
                                                   {"cos3", TrigPoly::cos_x(1, {3, 0, 0})}};
  StationarityOptions so;
  so.starts = 20000;
  so.lag = 1.0;
  for (const auto& r : stationarity_residual(s, est.mu, gs, so)) EXPECT_LE(r.z, 3.0) << r.name;
}

TEST(InvariantMeasure, StationarityResidualDetectsWrongMeasure) {
  // Uniform is not invariant for the x-dependent chain: cos1 has μ-mean −0.27.
  const JumpSpec s = fixtures::ex4_1_cauchy().spec;
  StationarityOptions so;
  so.starts = 20000;
  const auto rows = stationarity_residual(s, TorusMeasure::uniform(1, 64), {{"cos1", cos1()}}, so);
  EXPECT_GT(rows[0].z, 5.0);
}

TEST(MuAverage, ConstantsAndModes) {
  const TorusMeasure u = TorusMeasure::uniform(2, 16);
  EXPECT_NEAR(mu_average(u, [](const Vec&) { return 2.5; }), 2.5, 1e-14);
  EXPECT_NEAR(mu_average(u, [](const Vec& x) { return std::cos(kTwoPi * x[0]); }), 0.0, 1e-14);
  EXPECT_NEAR(TorusMeasure::uniform(1, 16).integrate(cos1()), 0.0, 1e-14);
}

TEST(MuAverage, SymmetricFullDriftVanishes) {
  const JumpSpec s = large_only_stable(1.5);
  const auto avg = drift_averages(s, TorusMeasure::uniform(1, 32));
  ASSERT_TRUE(avg.bbar_inf.has_value());
  EXPECT_NEAR((*avg.bbar_inf)[0], 0.0, 1e-12);
  EXPECT_NEAR(avg.bbar_trunc(10.0)[0], 0.0, 1e-12);
  const auto asym = drift_averages(fixtures::ex4_1_centered().spec, TorusMeasure::uniform(1, 32));
  // ϱ₀ = δ₊ + ½δ₋, k averages to 1: b̄_∞ = ½·∫_1^∞ r^{-1.5} dr = 1.
  EXPECT_NEAR((*asym.bbar_inf)[0], 1.0, 1e-8);
}

TEST(MuAverage, K0ForZIndependentKernel) {
  const JumpSpec s = fixtures::ex4_1_critical().spec;
  const auto k0 = estimate_k0(s, TorusMeasure::uniform(2, 16));
  EXPECT_NEAR(k0.value, 1.0, 1e-12);
  EXPECT_TRUE(k0.cauchy);
}

TEST(Mixing, RateMatchesMultiplier) {
  JumpSpec s;
  s.dim = 1;
  s.small = SmallAtoms{{{Vec{0.25}, 1.0}, {Vec{-0.25}, 1.0}}};
  s.kernel = fixtures::constant_kernel(1);
  s.drift = fixtures::zero_drift(1);
  const double lambda = -fourier_multiplier(s, {1, 0, 0}).real();
  EXPECT_NEAR(lambda, 2.0, 1e-12);
  MixingOptions o;
  o.delta = 0.2;
  o.times = {0.25, 0.5, 0.75, 1.0};
  o.paths_per_start = 4000;
  const auto est = mixing_rate(s, TorusMeasure::uniform(1, 64), {cos1()}, o);
  ASSERT_TRUE(est.ok) << est.note;
  EXPECT_NEAR(est.lambda / lambda, 1.0, 0.1);
  for (std::size_t k = 1; k < est.sup_dev.size(); ++k)
    EXPECT_LE(est.sup_dev[k], est.sup_dev[k - 1] + 2.0 * est.se[k]);
  EXPECT_FALSE(mixing_rate(s, TorusMeasure::uniform(1, 8), {TrigPoly(1)}, o).ok);
  std::ostringstream os;
  os << est.to_json().dump();
  EXPECT_NE(os.str().find("lambda1"), std::string::npos);
}

TEST(ErgodicDecay, SecondMomentScalesLikeInverseTimeScale) {
  const JumpSpec s = large_only_stable(1.5);
  DecayOptions o;
  o.paths = 2000;
  const auto tab = ergodic_average_decay(s, TorusMeasure::uniform(1, 64), cos1(), {0.25, 0.125, 0.0625}, o);
  ASSERT_EQ(tab.rows.size(), 3u);
  EXPECT_TRUE(tab.bounded) << tab.spread;
  // Stationary covariance ½e^{−λu} gives moment·ρ → 1/λ.
  const double lambda = -fourier_multiplier(s, {1, 0, 0}).real();
  EXPECT_NEAR(tab.rows.back().scaled * lambda, 1.0, 0.2);
}

TEST(ErgodicDecay, ZeroFunctionAndPrecondition) {
  const JumpSpec s = large_only_stable(1.5);
  DecayOptions o;
  const auto tab = ergodic_average_decay(s, TorusMeasure::uniform(1, 8), TrigPoly(1), {0.25, 0.125}, o);
  for (const auto& r : tab.rows) EXPECT_EQ(r.moment, 0.0);
  EXPECT_THROW(ergodic_average_decay(s, TorusMeasure::uniform(1, 8), TrigPoly::constant(1, 1.0), {0.25}, o),
               PreconditionError);
}

TEST(InvariantMeasure, HistogramCsv) {
  std::ostringstream os;
  TorusMeasure::uniform(1, 4).write_csv(os);
  EXPECT_EQ(os.str().substr(0, 15), "cell,x1,weight\n");
}
