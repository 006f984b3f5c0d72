// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <gtest/gtest.h>

#include "perhom/spec_model.hpp"

using namespace perhom;

namespace {

JumpSpec one_sided(double alpha) {
  JumpSpec s;
  s.dim = 1;
  s.large = LargeJumps{SphericalMeasure::atoms({{Vec{1.0}, 1.0}}), ScalingFunction::power(alpha), std::nullopt};
  s.kernel.f = TrigPoly::constant(1, 1.0);
  return s;
}

JumpSpec isotropic2d(double alpha) {
  JumpSpec s;
  s.dim = 2;
  s.small = SmallStable{1.2};
  s.large = LargeJumps{SphericalMeasure::uniform(1.0), ScalingFunction::power(alpha), std::nullopt};
  // even in z: cos(2π z1) cos(2π z2) plus an x-modulation
  s.kernel.f = TrigPoly::constant(2, 1.0) + TrigPoly::cos_x(2, {1, 0, 0}, 0.3) +
               TrigPoly::cos_z(2, {1, 0, 0}, 0.5) * TrigPoly::cos_z(2, {0, 1, 0}, 1.0);
  s.kernel.kmin = 0.2;
  s.kernel.kmax = 1.8;
  s.drift.f = std::vector<TrigPoly>{TrigPoly(2), TrigPoly(2)};
  return s;
}

}  // namespace

// b_R = ∫_1^R r · dr/(r·r^{1.5}) = 2(1 - R^{-1/2}).
TEST(TruncatedDrift, ClosedFormOneSided) {
  const auto s = one_sided(1.5);
  EXPECT_NEAR(truncated_drift(s, Vec{0.3}, 4.0)[0], 1.0, 1e-12);
  EXPECT_NEAR(truncated_drift(s, Vec{0.3}, 9.0)[0], 2.0 * (1.0 - 1.0 / 3.0), 1e-12);
  EXPECT_NEAR(full_drift(s, Vec{0.3})[0], 2.0, 1e-12);
}

TEST(TruncatedDrift, SymmetricFixturesVanish) {
  const auto s = isotropic2d(1.5);
  for (double R : {2.0, 10.0, 1e3}) {
    const Vec b = truncated_drift(s, Vec{0.17, 0.61}, R);
    EXPECT_LE(norm(b), 1e-12) << R;
  }
  EXPECT_LE(norm(full_drift(s, Vec{0.4, 0.2})), 1e-12);
  auto a = one_sided(1.5);
  a.large->rho0 = SphericalMeasure::atoms({{Vec{1.0}, 1.0}, {Vec{-1.0}, 1.0}});
  EXPECT_EQ(truncated_drift(a, Vec{0.1}, 5.0)[0], 0.0);
}

TEST(TruncatedDrift, DivergentTailRaises) {
  EXPECT_THROW(full_drift(one_sided(0.5), Vec{0.0}), IntegrabilityError);
  EXPECT_THROW(full_drift(one_sided(1.0), Vec{0.0}), IntegrabilityError);
  EXPECT_THROW(truncated_drift(one_sided(1.5), Vec{0.0}, 1.0), PreconditionError);
}

TEST(TruncatedDrift, ConvergesToFullWithinTailBound) {
  // Asymmetric, z-dependent kernel on a one-sided measure.
  auto s = one_sided(1.5);
  s.kernel.f = TrigPoly::constant(1, 1.0) + TrigPoly(1, {TrigTerm{{1}, {1}, 0.4, 0.2}});
  s.kernel.kmax = 1.45;
  s.kernel.kmin = 0.5;
  const Vec x{0.23};
  const double binf = full_drift(s, x)[0];
  double prev_gap = 1e300;
  for (double R : {2.0, 8.0, 64.0, 1024.0, 65536.0}) {
    const double bR = truncated_drift(s, x, R)[0];
    const double gap = std::abs(bR - binf);
    EXPECT_LE(gap, drift_tail_bound(s, R) + 1e-10) << R;
    EXPECT_LE(gap, prev_gap + 1e-12);
    prev_gap = gap;
  }
  // Independent route: direct adaptive quadrature of the ray integral.
  auto f = [&](double r) { return s.kernel(x, Vec{r}) * std::pow(r, -1.5); };
  double direct = 0.0;
  for (double lo = 1.0; lo < 64.0; lo += 1.0) direct += quad::adaptive(f, lo, lo + 1.0, 1e-13);
  EXPECT_NEAR(truncated_drift(s, x, 64.0)[0], direct, 1e-9);
}

TEST(TruncatedDrift, MonotoneForPositiveRays) {
  const auto s = one_sided(1.2);
  double prev = 0.0;
  for (double R : {1.5, 3.0, 10.0, 100.0}) {
    const double b = truncated_drift(s, Vec{0.0}, R)[0];
    EXPECT_GT(b, prev);
    prev = b;
  }
}

TEST(TruncatedDrift, PowerLogAndKappaAgreeWithDirectQuadrature) {
  auto s = one_sided(1.4);
  s.large->phi = PowerLogPhi{1.4};
  s.large->kappa = Kappa{PowerDecay{0.5, 1.0}, std::nullopt};
  auto f = [&](double r) { return (1.0 + 0.5 / r) / (std::pow(r, 1.4) * std::log1p(r)); };
  const double direct = quad::adaptive_decades(f, 1.0, 1e3, 1e-13);
  EXPECT_NEAR(truncated_drift(s, Vec{0.5}, 1e3)[0], direct, 1e-9);
  EXPECT_GT(full_drift(s, Vec{0.5})[0], direct);
}

TEST(Pi0, MassesAndExactScaling) {
  JumpSpec s = one_sided(1.0);
  s.large->rho0 = SphericalMeasure::uniform(1.0);
  const auto P = pi0(s);
  EXPECT_NEAR(P.mass(1.0, 2.0), 0.5, 1e-15);
  for (double a : {0.3, 0.7, 1.0, 1.5, 1.9}) {
    s.large->phi = ScalingFunction::power(a);
    const auto Q = pi0(s);
    const double m = Q.mass(1.0, 2.0), ms = Q.mass(2.0, 4.0);
    EXPECT_NEAR(ms * std::pow(2.0, a), m, 1e-12 * m);
  }
  JumpSpec t = one_sided(0.5);
  t.large->rho0 = SphericalMeasure::atoms({{Vec{1.0}, 3.0}});
  const auto R = pi0(t);
  EXPECT_NEAR(R.mass(1.0, 4.0, [](const Vec& th) { return th[0] > 0; }), R.mass(1.0, 4.0), 0.0);
  EXPECT_EQ(R.mass(1.0, 4.0, [](const Vec& th) { return th[0] < 0; }), 0.0);
  Rng rng(1, 0);
  for (int i = 0; i < 100; ++i) {
    const Vec z = R.sample(rng, 1.0, 4.0);
    EXPECT_GE(z[0], 1.0);
    EXPECT_LE(z[0], 4.0);
  }
}

TEST(ScalingProbe, PowerMixedPowerLog) {
  EXPECT_NEAR(scaling_index_probe(ScalingFunction::power(0.7)).estimate, 0.7, 1e-6);
  const auto mixed = scaling_index_probe(MixedPhi{{{0.5, 1.0}, {1.5, 1.0}}}, {2.0}, {1e4, 1e5, 1e6});
  EXPECT_NEAR(mixed.raw, 1.5, 1e-3);
  EXPECT_NEAR(mixed.estimate, 1.5, 1e-3);
  const auto pl = scaling_index_probe(PowerLogPhi{1.2}, {2.0}, {1e6, 1e7, 1e8});
  EXPECT_NEAR(pl.estimate, 1.2, 0.05);
  EXPECT_GT(pl.raw, pl.estimate);
  EXPECT_EQ(ScalingFunction(MixedPhi{{{0.5, 1.0}, {1.5, 1.0}}}).index(), 1.5);
}

TEST(Validate, ConstantCoefficientsPass) {
  JumpSpec s;
  s.dim = 2;
  s.large = LargeJumps{SphericalMeasure::uniform(1.0), ScalingFunction::power(0.5), std::nullopt};
  s.kernel.f = TrigPoly::constant(2, 1.0);
  s.drift.f = std::vector<TrigPoly>{TrigPoly(2), TrigPoly(2)};
  const auto rep = validate(s);
  for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << " " << c.measured << " " << c.detail;
}

TEST(Validate, MeasuredBoundsRefineDeclared) {
  JumpSpec s;
  s.dim = 2;
  s.large = LargeJumps{SphericalMeasure::uniform(1.0), ScalingFunction::power(0.5), std::nullopt};
  s.kernel.f = TrigPoly::constant(2, 1.0) + TrigPoly::cos_z(2, {1, 0, 0}, 0.5) * TrigPoly::cos_z(2, {0, 1, 0});
  s.kernel.kmin = 0.4;
  s.kernel.kmax = 1.5;
  const auto rep = validate(s);
  EXPECT_TRUE(rep.ok());
  EXPECT_GE(rep.measured_kmin, 0.5 - 1e-12);
  EXPECT_NEAR(rep.measured_kmin, 0.5, 1e-12);
  EXPECT_NEAR(rep.measured_kmax, 1.5, 1e-12);
}

TEST(Validate, MixedScalingAndFailures) {
  JumpSpec s = one_sided(1.5);
  s.large->phi = MixedPhi{{{0.5, 1.0}, {1.5, 1.0}}};
  auto rep = validate(s);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(s.large->phi.index(), 1.5);

  JumpSpec bad = one_sided(1.5);
  bad.kernel.kmax = 0.5;  // true kernel is 1
  EXPECT_FALSE(validate(bad).ok());

  JumpSpec zero = one_sided(1.5);
  zero.kernel.f = TrigPoly::constant(1, 1.0) + TrigPoly::cos_x(1, {1}, 1.0);
  zero.kernel.kmin = 0.0;
  zero.kernel.kmax = 2.0;
  EXPECT_TRUE(validate(zero).ok());
  ValidateOptions o;
  o.require_positive_kmin = true;
  EXPECT_THROW(validate(zero, o), ValidationError);

  JumpSpec nonfinite = one_sided(1.5);
  nonfinite.large->rho0 = SphericalMeasure::atoms({{Vec{1.0}, std::numeric_limits<double>::infinity()}});
  EXPECT_THROW(validate(nonfinite), ValidationError);

  JumpSpec notunit = one_sided(1.5);
  notunit.large->rho0 = SphericalMeasure::atoms({{Vec{1.1}, 1.0}});
  EXPECT_FALSE(validate(notunit).ok());
}

TEST(Validate, IsIdempotent) {
  const auto s = isotropic2d(1.5);
  const auto a = validate(s), b = validate(s);
  ASSERT_EQ(a.checks.size(), b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    EXPECT_EQ(a.checks[i].passed, b.checks[i].passed);
    EXPECT_EQ(a.checks[i].measured, b.checks[i].measured);
  }
}

TEST(Validate, KappaDecayAndSign) {
  JumpSpec s = one_sided(1.5);
  s.large->kappa = Kappa{RatioPower{-1.0, 1.5, 0.5}, std::nullopt};
  EXPECT_TRUE(validate(s).ok());
  s.large->kappa = Kappa{RatioPower{-3.0, 1.5, 0.5}, std::nullopt};
  EXPECT_FALSE(validate(s).ok());
}

TEST(SmallJumps, SecondMoments) {
  EXPECT_NEAR(small_second_moment(SmallStable{1.0}, 2), kTwoPi, 1e-14);
  EXPECT_NEAR(small_second_moment(SmallStable{1.5}, 1), 4.0, 1e-14);
  EXPECT_NEAR(small_second_moment(SmallStable{0.5}, 3), 4.0 * kPi / 1.5, 1e-14);
  EXPECT_NEAR(small_second_moment(SmallAtoms{{{Vec{0.5}, 2.0}}}, 1), 0.5, 1e-15);
}
