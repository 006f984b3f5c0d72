// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <string>
#include <vector>

#include "perhom/config.hpp"

namespace perhom::fixtures {

inline DriftField zero_drift(int d) {
  DriftField b;
  b.f = std::vector<TrigPoly>(static_cast<std::size_t>(d), TrigPoly(d));
  return b;
}

inline PeriodicKernel constant_kernel(int d, double c = 1.0) {
  PeriodicKernel k;
  k.f = TrigPoly::constant(d, c);
  k.kmin = c;
  k.kmax = c;
  return k;
}

// 1 + a cos(2πx₁)
inline PeriodicKernel x_cosine_kernel(int d, double a = 0.5) {
  PeriodicKernel k;
  Freq p{};
  p[0] = 1;
  k.f = TrigPoly::constant(d, 1.0) + TrigPoly::cos_x(d, p, a);
  k.kmin = 1.0 - a;
  k.kmax = 1.0 + a;
  return k;
}

inline SphericalMeasure pm_atoms(double plus, double minus) {
  return SphericalMeasure::atoms({{Vec{1.0}, plus}, {Vec{-1.0}, minus}});
}

// d=1 symmetric α-stable: Π(dz) = |z|^{-1-α}dz on all of ℝ, k ≡ 1.
inline JumpSpec symmetric_stable_1d(double alpha) {
  JumpSpec s;
  s.dim = 1;
  s.small = SmallStable{alpha};
  s.large = LargeJumps{pm_atoms(1.0, 1.0), PowerPhi{alpha}, std::nullopt};
  s.kernel = constant_kernel(1);
  s.drift = zero_drift(1);
  return s;
}

// d=2, α=0.5, uniform unit-mass ϱ₀, k = 1 + 0.5cos(2πx₁), no small jumps.
inline Config ex4_1_stable() {
  Config c;
  c.spec.dim = 2;
  c.spec.small = SmallZero{};
  c.spec.large = LargeJumps{SphericalMeasure::uniform(1.0), PowerPhi{0.5}, std::nullopt};
  c.spec.kernel = x_cosine_kernel(2);
  c.spec.drift = zero_drift(2);
  c.run.regime = "stable_no_center";
  c.run.eps_ladder = {0.125, 0.03125, 0.0078125};
  return c;
}

// d=1, α=1, symmetric ϱ₀, x-dependent kernel.
inline Config ex4_1_cauchy() {
  Config c;
  c.spec.dim = 1;
  c.spec.small = SmallZero{};
  c.spec.large = LargeJumps{pm_atoms(1.0, 1.0), PowerPhi{1.0}, std::nullopt};
  c.spec.kernel = x_cosine_kernel(1);
  c.spec.drift = zero_drift(1);
  c.run.regime = "cauchy_center";
  c.run.eps_ladder = {0.125, 0.03125, 0.0078125};
  return c;
}

// d=1, α=1.5, asymmetric ϱ₀: needs the b̄_∞ centering.
inline Config ex4_1_centered() {
  Config c;
  c.spec.dim = 1;
  c.spec.small = SmallZero{};
  c.spec.large = LargeJumps{pm_atoms(1.0, 0.5), PowerPhi{1.5}, std::nullopt};
  c.spec.kernel = x_cosine_kernel(1);
  c.spec.drift = zero_drift(1);
  c.run.regime = "stable_center";
  c.run.eps_ladder = {0.125, 0.03125, 0.0078125};
  return c;
}

// d=2, φ(r) = r², uniform unit-mass ϱ₀, k ≡ 1: critical covariance ½·I.
inline Config ex4_1_critical() {
  Config c;
  c.spec.dim = 2;
  c.spec.small = SmallZero{};
  c.spec.large = LargeJumps{SphericalMeasure::uniform(1.0), PowerPhi{2.0}, std::nullopt};
  c.spec.kernel = constant_kernel(2);
  c.spec.drift = zero_drift(2);
  c.run.regime = "critical_log";
  c.run.eps_ladder = {0.125, 0.03125, 0.0078125};
  return c;
}

// d=1 finite-second-moment fixture with a periodic drift b = sin(2πx), small
// atoms ±1/10 of weight 10 and a light r^{-4} tail on ±1. The jump rate beats
// the drift's contraction rate, so the invariant density stays bounded, while
// the corrector still halves the covariance.
inline Config ex4_1_diffusive() {
  Config c;
  c.spec.dim = 1;
  c.spec.small = SmallAtoms{{{Vec{0.1}, 10.0}, {Vec{-0.1}, 10.0}}};
  c.spec.large = LargeJumps{pm_atoms(0.02, 0.02), PowerPhi{3.0}, std::nullopt};
  c.spec.kernel = constant_kernel(1);
  DriftField b;
  b.f = std::vector<TrigPoly>{TrigPoly::sin_x(1, {1, 0, 0}, 1.0)};
  c.spec.drift = b;
  c.run.regime = "diffusive";
  c.run.delta = 0.05;
  c.run.dt = 0.05;
  c.run.grid = 128;
  c.run.eps_ladder = {0.0625, 0.03125, 0.015625};
  return c;
}

// d=1, Φ(r) = r^{1/2} + r^{3/2}: index 3/2.
inline Config ex4_3_mixed() {
  Config c;
  c.spec.dim = 1;
  c.spec.small = SmallZero{};
  c.spec.large = LargeJumps{pm_atoms(1.0, 1.0), MixedPhi{{{0.5, 1.0}, {1.5, 1.0}}}, std::nullopt};
  c.spec.kernel = x_cosine_kernel(1);
  c.spec.drift = zero_drift(1);
  c.run.regime = "stable_center";
  c.run.eps_ladder = {0.125, 0.03125, 0.0078125};
  return c;
}

// d=2, large jumps only along e₁ and e₂, α=0.5, k = 1 + 0.5cos(2πz₁):
// k̄ is 1 along e₁ and 1.5 along e₂.
inline Config ex4_0_axes() {
  Config c;
  c.spec.dim = 2;
  c.spec.small = SmallZero{};
  c.spec.large = LargeJumps{SphericalMeasure::atoms({{Vec{1.0, 0.0}, 1.0}, {Vec{0.0, 1.0}, 1.0}}), PowerPhi{0.5},
                            std::nullopt};
  PeriodicKernel k;
  k.f = TrigPoly::constant(2, 1.0) + TrigPoly::cos_z(2, {1, 0, 0}, 0.5);
  k.kmin = 0.5;
  k.kmax = 1.5;
  c.spec.kernel = k;
  c.spec.drift = zero_drift(2);
  c.run.regime = "stable_no_center";
  c.run.eps_ladder = {0.125, 0.03125, 0.0078125};
  return c;
}

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> n{"ex4_1_stable",    "ex4_1_cauchy", "ex4_1_centered", "ex4_1_critical",
                                          "ex4_1_diffusive", "ex4_3_mixed",  "ex4_0_axes"};
  return n;
}

inline Config by_name(const std::string& name) {
  if (name == "ex4_1_stable") return ex4_1_stable();
  if (name == "ex4_1_cauchy") return ex4_1_cauchy();
  if (name == "ex4_1_centered") return ex4_1_centered();
  if (name == "ex4_1_critical") return ex4_1_critical();
  if (name == "ex4_1_diffusive") return ex4_1_diffusive();
  if (name == "ex4_3_mixed") return ex4_3_mixed();
  if (name == "ex4_0_axes") return ex4_0_axes();
  throw PreconditionError("unknown fixture '" + name + "'");
}

}  // namespace perhom::fixtures
