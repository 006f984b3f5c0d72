// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "perhom/core.hpp"

namespace perhom {

using Freq = std::array<int, kMaxDim>;

inline double dot(const Freq& m, const Vec& v) {
  return m[0] * v[0] + m[1] * v[1] + m[2] * v[2];
}
inline double fnorm(const Freq& m) {
  return std::sqrt(double(m[0]) * m[0] + double(m[1]) * m[1] + double(m[2]) * m[2]);
}
inline int fnorm_inf(const Freq& m) {
  return std::max({std::abs(m[0]), std::abs(m[1]), std::abs(m[2])});
}
inline bool is_zero(const Freq& m) { return m[0] == 0 && m[1] == 0 && m[2] == 0; }
inline Freq operator+(const Freq& a, const Freq& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Freq operator-(const Freq& a, const Freq& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Freq operator-(const Freq& a) { return {-a[0], -a[1], -a[2]}; }

// One real mode  a·cos(2π(⟨p,x⟩+⟨q,z⟩)) + b·sin(2π(⟨p,x⟩+⟨q,z⟩)).
struct TrigTerm {
  Freq p{};  // x-frequency
  Freq q{};  // z-frequency
  double a = 0.0;
  double b = 0.0;

  double phase(const Vec& x, const Vec& z) const { return kTwoPi * (dot(p, x) + dot(q, z)); }
  double eval(const Vec& x, const Vec& z) const {
    const double t = phase(x, z);
    return a * std::cos(t) + b * std::sin(t);
  }
  bool constant() const { return is_zero(p) && is_zero(q); }
  double amplitude() const { return constant() ? std::abs(a) : std::hypot(a, b); }
};

// Real trigonometric polynomial in (x, z) ∈ R^d × R^d, 1-periodic in every
// coordinate. Used for kernels k(x,z), drift components b_i(x) (q = 0) and
// test functions.
class TrigPoly {
 public:
  TrigPoly() = default;
  explicit TrigPoly(int d) : dim_(d) { check_dim(d); }
  TrigPoly(int d, std::vector<TrigTerm> terms) : dim_(d), terms_(std::move(terms)) {
    check_dim(d);
    simplify();
  }

  static TrigPoly constant(int d, double c) { return TrigPoly(d, {TrigTerm{{}, {}, c, 0.0}}); }
  static TrigPoly cos_x(int d, const Freq& p, double a = 1.0) { return TrigPoly(d, {TrigTerm{p, {}, a, 0.0}}); }
  static TrigPoly sin_x(int d, const Freq& p, double b = 1.0) { return TrigPoly(d, {TrigTerm{p, {}, 0.0, b}}); }
  static TrigPoly cos_z(int d, const Freq& q, double a = 1.0) { return TrigPoly(d, {TrigTerm{{}, q, a, 0.0}}); }

  int dim() const { return dim_; }
  const std::vector<TrigTerm>& terms() const { return terms_; }

  double eval(const Vec& x, const Vec& z) const {
    double s = 0.0;
    for (const auto& t : terms_) s += t.eval(x, z);
    return s;
  }
  double eval_x(const Vec& x) const { return eval(x, Vec{}); }
  double operator()(const Vec& x, const Vec& z) const { return eval(x, z); }

  double constant_term() const {
    for (const auto& t : terms_)
      if (t.constant()) return t.a;
    return 0.0;
  }
  // Rigorous bounds: c0 ± Σ amplitudes of the non-constant modes.
  double upper_bound() const {
    double s = constant_term();
    for (const auto& t : terms_)
      if (!t.constant()) s += t.amplitude();
    return s;
  }
  double lower_bound() const {
    double s = constant_term();
    for (const auto& t : terms_)
      if (!t.constant()) s -= t.amplitude();
    return s;
  }
  double sup_norm_bound() const { return std::max(std::abs(upper_bound()), std::abs(lower_bound())); }

  bool x_independent() const {
    for (const auto& t : terms_)
      if (!is_zero(t.p)) return false;
    return true;
  }
  bool z_independent() const {
    for (const auto& t : terms_)
      if (!is_zero(t.q)) return false;
    return true;
  }
  bool is_zero_poly() const { return terms_.empty(); }
  int max_z_order() const {
    int m = 0;
    for (const auto& t : terms_) m = std::max(m, fnorm_inf(t.q));
    return m;
  }
  int max_x_order() const {
    int m = 0;
    for (const auto& t : terms_) m = std::max(m, fnorm_inf(t.p));
    return m;
  }

  // Fourier mean along the ray z = rθ: keeps the modes with ⟨q,θ⟩ = 0,
  // decided by |⟨q,θ⟩| <= tol·|q|. Evaluated at the given x.
  double directional_mean(const Vec& x, const Vec& theta, double tol = 1e-12) const {
    double s = 0.0;
    for (const auto& t : terms_) {
      if (std::abs(dot(t.q, theta)) <= tol * fnorm(t.q)) {
        const double ph = kTwoPi * dot(t.p, x);
        s += t.a * std::cos(ph) + t.b * std::sin(ph);
      }
    }
    return s;
  }

  // Same, with the surviving-mode set supplied by a predicate on q.
  template <class Pred>
  double mean_over(const Vec& x, Pred&& survives) const {
    double s = 0.0;
    for (const auto& t : terms_) {
      if (survives(t.q)) {
        const double ph = kTwoPi * dot(t.p, x);
        s += t.a * std::cos(ph) + t.b * std::sin(ph);
      }
    }
    return s;
  }

  // ∫_{T^d} f(x,z) dz as a polynomial in x.
  TrigPoly z_average() const {
    std::vector<TrigTerm> out;
    for (const auto& t : terms_)
      if (is_zero(t.q)) out.push_back(t);
    return TrigPoly(dim_, out);
  }

  // Integrates out x against a weight given by its cosine/sine moments:
  // moments(p) = (∫cos(2π⟨p,x⟩)μ(dx), ∫sin(2π⟨p,x⟩)μ(dx)). Result depends on z only.
  template <class Moments>
  TrigPoly x_average(Moments&& moments) const {
    std::vector<TrigTerm> out;
    for (const auto& t : terms_) {
      const auto [cm, sm] = moments(t.p);
      // a cos(P+Q) + b sin(P+Q) integrated over P.
      TrigTerm u;
      u.q = t.q;
      u.a = t.a * cm + t.b * sm;
      u.b = t.b * cm - t.a * sm;
      out.push_back(u);
    }
    return TrigPoly(dim_, out);
  }

  // Gaussian mollification in z: each mode is damped by exp(-2π²s²|q|²).
  TrigPoly mollify_z(double s) const {
    std::vector<TrigTerm> out = terms_;
    for (auto& t : out) {
      const double f = std::exp(-2.0 * kPi * kPi * s * s * fnorm(t.q) * fnorm(t.q));
      t.a *= f;
      t.b *= f;
    }
    return TrigPoly(dim_, out);
  }

  TrigPoly operator+(const TrigPoly& o) const {
    std::vector<TrigTerm> t = terms_;
    t.insert(t.end(), o.terms_.begin(), o.terms_.end());
    return TrigPoly(std::max(dim_, o.dim_), t);
  }
  TrigPoly operator*(double s) const {
    std::vector<TrigTerm> t = terms_;
    for (auto& u : t) {
      u.a *= s;
      u.b *= s;
    }
    return TrigPoly(dim_, t);
  }
  TrigPoly operator*(const TrigPoly& o) const {
    std::vector<TrigTerm> out;
    for (const auto& u : terms_) {
      for (const auto& v : o.terms_) {
        // (a1 cos A + b1 sin A)(a2 cos B + b2 sin B) via sum/difference formulas.
        TrigTerm plus{u.p + v.p, u.q + v.q, 0.5 * (u.a * v.a - u.b * v.b), 0.5 * (u.a * v.b + u.b * v.a)};
        TrigTerm minus{u.p - v.p, u.q - v.q, 0.5 * (u.a * v.a + u.b * v.b), 0.5 * (u.b * v.a - u.a * v.b)};
        out.push_back(plus);
        out.push_back(minus);
      }
    }
    return TrigPoly(std::max(dim_, o.dim_), out);
  }

  // Complex coefficients c_{p,q} with f = Σ c_{p,q} e^{i2π(⟨p,x⟩+⟨q,z⟩)}.
  std::vector<std::pair<std::pair<Freq, Freq>, std::complex<double>>> complex_modes() const {
    std::map<std::pair<Freq, Freq>, std::complex<double>> m;
    for (const auto& t : terms_) {
      if (t.constant()) {
        m[{t.p, t.q}] += t.a;
        continue;
      }
      m[{t.p, t.q}] += std::complex<double>(0.5 * t.a, -0.5 * t.b);
      m[{-t.p, -t.q}] += std::complex<double>(0.5 * t.a, 0.5 * t.b);
    }
    return {m.begin(), m.end()};
  }

 private:
  // Canonical sign: the first nonzero entry of (p, q) is positive. Merges
  // duplicate modes and drops exact zeros.
  void simplify() {
    std::map<std::pair<Freq, Freq>, std::pair<double, double>> acc;
    for (auto t : terms_) {
      int sign = 0;
      for (int i = 0; i < kMaxDim && sign == 0; ++i) sign = (t.p[i] > 0) - (t.p[i] < 0);
      for (int i = 0; i < kMaxDim && sign == 0; ++i) sign = (t.q[i] > 0) - (t.q[i] < 0);
      if (sign < 0) {
        t.p = -t.p;
        t.q = -t.q;
        t.b = -t.b;
      }
      if (sign == 0) t.b = 0.0;
      auto& e = acc[{t.p, t.q}];
      e.first += t.a;
      e.second += t.b;
    }
    terms_.clear();
    for (const auto& [k, v] : acc) {
      if (v.first == 0.0 && v.second == 0.0) continue;
      terms_.push_back(TrigTerm{k.first, k.second, v.first, v.second});
    }
  }

  int dim_ = 1;
  std::vector<TrigTerm> terms_;
};

}  // namespace perhom
