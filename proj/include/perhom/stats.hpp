// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "perhom/core.hpp"

namespace perhom {

// Two-sample Kolmogorov–Smirnov statistic sup|F_a − F_b|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw PreconditionError("KS needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

// 1% critical value of the two-sample KS statistic, asymptotic form.
inline double ks_critical_1pct(std::size_t na, std::size_t nb) {
  return 1.628 * std::sqrt((static_cast<double>(na) + nb) / (static_cast<double>(na) * nb));
}

struct EcfPoint {
  std::complex<double> value;
  double se = 0.0;  // standard error of |φ̂ − φ| under the null
};

// Empirical characteristic function (1/N)Σ e^{i⟨u,y⟩} and its standard error
// sqrt((1 − |φ̂|²)/N), the joint variance of the real and imaginary parts.
inline EcfPoint empirical_cf(const std::vector<Vec>& ys, const Vec& u) {
  if (ys.empty()) throw PreconditionError("empirical CF of an empty sample");
  double c = 0.0, s = 0.0;
  for (const auto& y : ys) {
    const double a = dot(u, y);
    c += std::cos(a);
    s += std::sin(a);
  }
  const double n = static_cast<double>(ys.size());
  const std::complex<double> phi(c / n, s / n);
  return {phi, std::sqrt(std::max(0.0, 1.0 - std::norm(phi)) / n)};
}

inline double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw PreconditionError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = p * (v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - i) * (v[i + 1] - v[i]);
}

}  // namespace perhom
