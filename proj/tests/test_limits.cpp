// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include "perhom/fixtures.hpp"
#include "perhom/limits.hpp"
#include "perhom/stats.hpp"

using namespace perhom;

namespace {

StableLaw symmetric_1d(double alpha, double kbar = 1.0) {
  return make_stable_law(1, alpha, fixtures::pm_atoms(0.5, 0.5), kbar);
}

std::vector<double> coord0(const EndpointBatch& b) { return b.projection(Vec{1.0}); }

}  // namespace

TEST(CharFn, TrivialValues) {
  const LimitLaw s = symmetric_1d(0.5);
  EXPECT_EQ(char_fn(s, Vec{0.0}, 1.0), cplx(1.0, 0.0));
  GaussianLaw g;
  g.dim = 2;
  g.A = Mat3::Identity();
  EXPECT_NEAR(std::abs(char_fn(g, Vec{1.0, 0.0}, 1.0) - std::exp(-0.5)), 0.0, 1e-15);
}

TEST(CharFn, SymmetricHalfStableMatchesQuadrature) {
  // η(u) = −|u|^{1/2}·∫_0^∞(1 − cos s)s^{-3/2}ds for ϱ₀ = ½(δ₊ + δ₋).
  // Integrating by parts, the integral is 2∫_0^∞ sin(s)s^{-1/2}ds.
  boost::math::quadrature::ooura_fourier_sin<double> sin_int;
  const double c = 2.0 * sin_int.integrate([](double s) { return 1.0 / std::sqrt(s); }, 1.0).first;
  const LimitLaw s = symmetric_1d(0.5);
  for (double u : {0.3, 1.0, 4.0}) {
    const cplx eta = limit_exponent(s, Vec{u});
    EXPECT_NEAR(eta.real(), -c * std::sqrt(u), 1e-7);
    EXPECT_NEAR(eta.imag(), 0.0, 1e-14);
  }
}

TEST(CharFn, UnitBallConventionMatchesQuadrature) {
  // Imaginary part: ∫_0^1 (sin ar − ar)/r² dr + ∫_1^∞ sin(ar)/r² dr.
  boost::math::quadrature::ooura_fourier_sin<double> sin_int;
  boost::math::quadrature::ooura_fourier_cos<double> cos_int;
  for (double a : {0.5, 2.0}) {
    const double inner = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [a](double r) { return r < 1e-4 ? -a * a * a * r / 6.0 : (std::sin(a * r) - a * r) / (r * r); }, 0.0, 1.0);
    // ∫_1^∞ sin(ar)/r² dr with r = 1 + s, split into sine and cosine transforms.
    auto g = [](double t) { return 1.0 / ((1.0 + t) * (1.0 + t)); };
    const double outer = std::cos(a) * sin_int.integrate(g, a).first + std::sin(a) * cos_int.integrate(g, a).first;
    const cplx eta = radial_stable_exponent(1.0, Compensation::UnitBall, a);
    EXPECT_NEAR(eta.imag(), inner + outer, 1e-6) << a;
    EXPECT_NEAR(eta.real(), -0.5 * kPi * a, 1e-14);
  }
}

TEST(CharFn, LevyMultiplicativity) {
  const LimitLaw laws[] = {symmetric_1d(0.5), make_stable_law(1, 1.5, fixtures::pm_atoms(1.0, 0.5), 0.8),
                           make_stable_law(2, 1.0, SphericalMeasure::uniform(1.0), 1.2),
                           GaussianLaw{1, Mat3::Identity() * 2.0, Vec{0.3}}};
  for (const auto& l : laws) {
    const Vec u = law_dim(l) == 1 ? Vec{0.7} : Vec{0.7, -0.4};
    const cplx lhs = char_fn(l, u, 0.3) * char_fn(l, u, 0.9);
    EXPECT_NEAR(std::abs(lhs - char_fn(l, u, 1.2)), 0.0, 1e-12);
  }
}

TEST(CharFn, ConventionFollowsIndex) {
  EXPECT_EQ(compensation_for(0.5), Compensation::NoCompensation);
  EXPECT_EQ(compensation_for(1.0), Compensation::UnitBall);
  EXPECT_EQ(compensation_for(1.5), Compensation::Full);
  EXPECT_THROW(compensation_for(2.0), PreconditionError);
  EXPECT_THROW(make_stable_law(1, 0.5, fixtures::pm_atoms(1, 1), -1.0), PreconditionError);
}

TEST(SampleLimit, DegenerateGaussianIsZero) {
  const auto b = sample_limit(GaussianLaw{2, Mat3::Zero(), Vec{}}, 1.0, 100, 3);
  for (const auto& x : b.samples) EXPECT_EQ(norm(x), 0.0);
  GaussianLaw bad{2, Mat3::Zero(), Vec{}};
  bad.A(0, 0) = -1.0;
  EXPECT_THROW(sample_limit(bad, 1.0, 10, 3), PreconditionError);
}

TEST(SampleLimit, GaussianCovarianceWithinFiveStandardErrors) {
  GaussianLaw g{2, Mat3::Zero(), Vec{}};
  g.A(0, 0) = 2.0;
  g.A(1, 1) = 0.5;
  g.A(0, 1) = g.A(1, 0) = 0.6;
  const std::size_t N = 100000;
  const auto b = sample_limit(g, 1.0, N, 5);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (const auto& x : b.samples) s += x[i] * x[j];
      const double se = std::sqrt((g.A(i, i) * g.A(j, j) + g.A(i, j) * g.A(i, j)) / N);
      EXPECT_NEAR(s / N, g.A(i, j), 5.0 * se) << i << j;
    }
}

TEST(SampleLimit, StableEcfMatchesCharFn) {
  const std::vector<LimitLaw> laws{symmetric_1d(0.5), make_stable_law(1, 1.0, fixtures::pm_atoms(1.0, 0.3), 1.0),
                                   make_stable_law(1, 1.5, fixtures::pm_atoms(1.0, 0.5), 0.8)};
  for (const auto& l : laws) {
    const auto b = sample_limit(l, 1.0, 10000, 7);
    int within = 0;
    for (int j = 1; j <= 20; ++j) {
      const Vec u{0.1 * j};
      const auto e = empirical_cf(b.samples, u);
      if (std::abs(e.value - char_fn(l, u, 1.0)) <= 3.0 * e.se) ++within;
    }
    EXPECT_GE(within, 19) << std::get<StableLaw>(l).alpha;
  }
}

TEST(SampleLimit, SymmetricMedianIsZero) {
  const auto xs = coord0(sample_limit(symmetric_1d(1.5), 1.0, 5000, 11));
  EXPECT_NEAR(quantile(xs, 0.5), 0.0, 0.05);
}

TEST(SampleLimit, SelfSimilarity) {
  const LimitLaw l = symmetric_1d(0.5);
  const double s = 4.0;
  auto a = coord0(sample_limit(l, 1.0, 5000, 13));
  auto b = coord0(sample_limit(l, 0.25, 5000, 17));
  for (double& x : b) x *= std::pow(s, 1.0 / 0.5);
  EXPECT_LE(ks_two_sample(a, b), 0.03);
}

TEST(SampleLimit, AgreesWithExactSampler) {
  for (double alpha : {0.5, 1.0, 1.5}) {
    const StableLaw l = symmetric_1d(alpha, 0.7);
    const auto eng = coord0(sample_limit(l, 1.0, 5000, 19));
    const auto ex = exact_symmetric_stable(l, 1.0, 5000, 23);
    EXPECT_LE(ks_two_sample(eng, ex), ks_critical_1pct(5000, 5000)) << alpha;
  }
  EXPECT_THROW(exact_symmetric_stable(make_stable_law(1, 1.5, fixtures::pm_atoms(1.0, 0.5), 1.0), 1.0, 10, 1),
               PreconditionError);
}

TEST(SampleLimit, TwoDimensionalEcf) {
  const StableLaw l = make_stable_law(2, 0.5, SphericalMeasure::uniform(1.0), 0.866);
  const auto b = sample_limit(l, 1.0, 10000, 29);
  int within = 0;
  for (int j = 1; j <= 20; ++j) {
    const double ang = 0.3 * j;
    const Vec u{0.15 * j * std::cos(ang), 0.15 * j * std::sin(ang)};
    const auto e = empirical_cf(b.samples, u);
    if (std::abs(e.value - char_fn(l, u, 1.0)) <= 3.0 * e.se) ++within;
  }
  EXPECT_GE(within, 19);
}

TEST(PredictedLimit, TranslationInvariantStable) {
  JumpSpec s;
  s.dim = 2;
  s.large = LargeJumps{SphericalMeasure::uniform(1.0), PowerPhi{0.5}, std::nullopt};
  s.kernel = fixtures::constant_kernel(2);
  s.drift = fixtures::zero_drift(2);
  const auto p = predicted_limit(s, TorusMeasure::uniform(2, 8), Regime::StableNoCenter);
  const auto& l = std::get<StableLaw>(p.law);
  EXPECT_EQ(l.convention, Compensation::NoCompensation);
  for (double v : l.table.kbar0) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(PredictedLimit, AxesFixtureHasDirectionalWeights) {
  const Config c = fixtures::ex4_0_axes();
  const auto p = predicted_limit(c.spec, TorusMeasure::uniform(2, 8), Regime::StableNoCenter);
  const auto& l = std::get<StableLaw>(p.law);
  ASSERT_EQ(l.table.nodes.size(), 2u);
  EXPECT_NEAR(l.table.at(Vec{1.0, 0.0}), 1.0, 1e-12);
  EXPECT_NEAR(l.table.at(Vec{0.0, 1.0}), 1.5, 1e-12);
  // Asymmetric atoms make the law non-symmetric.
  EXPECT_GT(std::abs(limit_exponent(p.law, Vec{1.0, 0.0}).imag()), 0.1);
}

TEST(PredictedLimit, MixedIndexUsesLargestExponent) {
  const Config c = fixtures::ex4_3_mixed();
  const auto p = predicted_limit(c.spec, TorusMeasure::uniform(1, 16), Regime::StableCenter);
  const auto& l = std::get<StableLaw>(p.law);
  EXPECT_DOUBLE_EQ(l.alpha, 1.5);
  EXPECT_EQ(l.convention, Compensation::Full);
  EXPECT_NEAR(l.table.weighted_mean(), 1.0, 1e-12);
}

TEST(PredictedLimit, CriticalIsGaussianHalfIdentity) {
  const Config c = fixtures::ex4_1_critical();
  const auto p = predicted_limit(c.spec, TorusMeasure::uniform(2, 8), Regime::CriticalLog);
  const auto& g = std::get<GaussianLaw>(p.law);
  EXPECT_NEAR(g.A(0, 0), 0.5, 1e-6);
  EXPECT_NEAR(g.A(1, 1), 0.5, 1e-6);
}

TEST(PredictedLimit, DiffusiveUsesCorrector) {
  const Config c = fixtures::ex4_1_diffusive();
  const auto p = predicted_limit(c.spec, TorusMeasure::uniform(1, 128), Regime::Diffusive);
  const auto& g = std::get<GaussianLaw>(p.law);
  ASSERT_TRUE(p.corrector && p.uncorrected);
  EXPECT_GE(p.corrector->sup_psi(), 0.1);
  EXPECT_GT(g.A(0, 0), 0.0);
  EXPECT_LT(g.A(0, 0), p.uncorrected->A(0, 0));
  EXPECT_EQ(to_json(p.law)["type"], "gaussian");
}
