// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <complex>
#include <numeric>
#include <ostream>
#include <vector>

#include "perhom/core.hpp"
#include "perhom/trig_poly.hpp"

namespace perhom {

// Histogram probability on the torus: n cells per axis, row-major with the
// first coordinate fastest.
class TorusMeasure {
 public:
  TorusMeasure() = default;
  TorusMeasure(int d, int n, std::vector<double> weights) : d_(d), n_(n), w_(std::move(weights)) {
    check_dim(d);
    if (n < 1) throw PreconditionError("grid resolution must be positive");
    if (w_.size() != cells()) throw PreconditionError("weight count does not match grid");
    normalize();
  }
  static TorusMeasure uniform(int d, int n) {
    std::size_t c = 1;
    for (int i = 0; i < d; ++i) c *= static_cast<std::size_t>(n);
    return TorusMeasure(d, n, std::vector<double>(c, 1.0));
  }

  int dim() const { return d_; }
  int resolution() const { return n_; }
  std::size_t cells() const {
    std::size_t c = 1;
    for (int i = 0; i < d_; ++i) c *= static_cast<std::size_t>(n_);
    return c;
  }
  const std::vector<double>& weights() const { return w_; }
  double weight(std::size_t i) const { return w_[i]; }
  double cell_width() const { return 1.0 / n_; }

  Vec center(std::size_t idx) const {
    Vec x;
    for (int i = 0; i < d_; ++i) {
      x[i] = (static_cast<double>(idx % n_) + 0.5) / n_;
      idx /= n_;
    }
    return x;
  }
  std::size_t cell_of(const Vec& x) const {
    std::size_t idx = 0, stride = 1;
    for (int i = 0; i < d_; ++i) {
      double u = x[i] - std::floor(x[i]);
      int j = static_cast<int>(u * n_);
      if (j >= n_) j = n_ - 1;
      idx += stride * static_cast<std::size_t>(j);
      stride *= static_cast<std::size_t>(n_);
    }
    return idx;
  }

  // Σ μ(cell) g(center).
  template <class G>
  auto average(G&& g) const {
    using R = decltype(g(Vec{}));
    R s{};
    for (std::size_t i = 0; i < w_.size(); ++i)
      if (w_[i] != 0.0) s += g(center(i)) * w_[i];
    return s;
  }

  // (∫cos 2π⟨p,x⟩, ∫sin 2π⟨p,x⟩) under the piecewise-constant density.
  std::pair<double, double> moments(const Freq& p) const {
    const std::complex<double> m = exact_exp_moment(p);
    return {m.real(), m.imag()};
  }
  std::complex<double> exact_exp_moment(const Freq& p) const {
    // Per axis, a cell [a, a+h] contributes e^{i2πp(a+h/2)}·sinc(πph).
    std::complex<double> s = 0.0;
    const double h = cell_width();
    std::array<double, kMaxDim> damp{1.0, 1.0, 1.0};
    for (int i = 0; i < d_; ++i) {
      const double t = kPi * p[i] * h;
      damp[i] = p[i] == 0 ? 1.0 : std::sin(t) / t;
    }
    for (std::size_t c = 0; c < w_.size(); ++c) {
      if (w_[c] == 0.0) continue;
      const Vec x = center(c);
      s += w_[c] * std::exp(std::complex<double>(0.0, kTwoPi * dot(p, x)));
    }
    return s * damp[0] * damp[1] * damp[2];
  }
  // Exact integral of an x-only trigonometric polynomial under the density.
  double integrate(const TrigPoly& g) const {
    double s = 0.0;
    for (const auto& t : g.terms()) {
      const auto [c, sn] = moments(t.p);
      s += t.a * c + t.b * sn;
    }
    return s;
  }

  void write_csv(std::ostream& os) const {
    os << "cell";
    for (int i = 0; i < d_; ++i) os << ",x" << i + 1;
    os << ",weight\n";
    os.precision(17);
    for (std::size_t c = 0; c < w_.size(); ++c) {
      os << c;
      const Vec x = center(c);
      for (int i = 0; i < d_; ++i) os << ',' << x[i];
      os << ',' << w_[c] << '\n';
    }
  }

 private:
  void normalize() {
    double tot = 0.0;
    for (double w : w_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("torus weights must be finite and nonnegative");
      tot += w;
    }
    if (!(tot > 0.0)) throw PreconditionError("torus measure has zero mass");
    for (double& w : w_) w /= tot;
  }

  int d_ = 1;
  int n_ = 1;
  std::vector<double> w_{1.0};
};

inline double total_variation(const TorusMeasure& a, const TorusMeasure& b) {
  if (a.dim() != b.dim() || a.resolution() != b.resolution())
    throw PreconditionError("total variation needs matching grids");
  double s = 0.0;
  for (std::size_t i = 0; i < a.cells(); ++i) s += std::abs(a.weight(i) - b.weight(i));
  return 0.5 * s;
}

}  // namespace perhom
