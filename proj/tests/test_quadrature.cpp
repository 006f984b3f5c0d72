// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <gtest/gtest.h>

#include "perhom/quadrature.hpp"
#include "perhom/spec_model.hpp"

namespace q = perhom::quad;

TEST(Quadrature, GaussLegendreIsExactForPolynomials) {
  for (int n : {4, 8, 16, 20, 30}) {
    double s = 0.0;
    for (const auto& node : q::gauss_legendre(n)) s += node.w * std::pow(node.x, 2 * n - 2);
    EXPECT_NEAR(s, 2.0 / (2 * n - 1), 1e-13) << n;
  }
}

TEST(Quadrature, AdaptiveAndTail) {
  EXPECT_NEAR(q::adaptive([](double r) { return std::pow(r, -2.5); }, 1.0, 4.0), (2.0 / 3.0) * (1.0 - 1.0 / 8.0), 1e-13);
  EXPECT_NEAR(q::to_infinity([](double r) { return std::pow(r, -1.5); }, 1.0), 2.0, 1e-9);
  EXPECT_NEAR(q::endpoint_singular([](double r) { return std::pow(r, -0.5); }, 0.0, 1.0), 2.0, 1e-9);
}

// ∫_1^∞ e^{ir}/r dr = -Ci(1) + i(π/2 - Si(1)).
TEST(Quadrature, OouraTailMatchesSineCosineIntegrals) {
  const auto v = q::fourier_tail([](double r) { return 1.0 / r; }, 1.0, 1.0);
  EXPECT_NEAR(v.real(), -0.33740392290096813, 1e-9);
  EXPECT_NEAR(v.imag(), 0.62471325642771360, 1e-9);
  const auto w = q::fourier_tail([](double r) { return 1.0 / r; }, 1.0, -1.0);
  EXPECT_NEAR(w.imag(), -0.62471325642771360, 1e-9);
}

TEST(Quadrature, OscillatoryFiniteAgreesWithTailDifference) {
  auto g = [](double r) { return std::exp(-0.1 * r); };
  const double a = 2.0, b = 30.0, om = 3.0;
  const auto direct = q::oscillatory(g, a, b, om, false);
  const perhom::cplx k(-0.1, om);
  const perhom::cplx exact = (std::exp(k * b) - std::exp(k * a)) / k;
  EXPECT_NEAR(direct.real(), exact.real(), 1e-11);
  EXPECT_NEAR(direct.imag(), exact.imag(), 1e-11);
  const auto tails = q::oscillatory(g, a, 5000.0, om, true);
  const perhom::cplx exact2 = (std::exp(k * 5000.0) - std::exp(k * a)) / k;
  EXPECT_NEAR(std::abs(tails - exact2), 0.0, 1e-9);
}

TEST(SphereQuadrature, UniformMassAndSecondMoments) {
  using perhom::SphericalMeasure;
  for (int d = 1; d <= 3; ++d) {
    const auto nodes = SphericalMeasure::uniform(2.5).nodes(d);
    double m = 0.0, xx = 0.0, xy = 0.0, x = 0.0;
    for (const auto& n : nodes) {
      m += n.weight;
      xx += n.weight * n.theta[0] * n.theta[0];
      x += n.weight * n.theta[0];
      if (d > 1) xy += n.weight * n.theta[0] * n.theta[1];
    }
    EXPECT_NEAR(m, 2.5, 1e-13);
    EXPECT_NEAR(x, 0.0, 1e-13);
    EXPECT_NEAR(xy, 0.0, 1e-13);
    EXPECT_NEAR(xx, 2.5 / d, 1e-13);
  }
}
