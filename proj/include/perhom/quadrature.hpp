// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "perhom/core.hpp"

namespace perhom::quad {

using cplx = std::complex<double>;

struct Node {
  double x;
  double w;
};

namespace detail {
template <int N>
std::vector<Node> gl_from_boost() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& a = G::abscissa();
  const auto& w = G::weights();
  std::vector<Node> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) {
      out.push_back({0.0, w[i]});
    } else {
      out.push_back({-a[i], w[i]});
      out.push_back({a[i], w[i]});
    }
  }
  std::sort(out.begin(), out.end(), [](const Node& p, const Node& q) { return p.x < q.x; });
  return out;
}
}  // namespace detail

// Gauss–Legendre rule on [-1,1]; supported orders 4, 8, 16, 20, 30.
inline const std::vector<Node>& gauss_legendre(int n) {
  static const std::vector<Node> g4 = detail::gl_from_boost<4>();
  static const std::vector<Node> g8 = detail::gl_from_boost<8>();
  static const std::vector<Node> g16 = detail::gl_from_boost<16>();
  static const std::vector<Node> g20 = detail::gl_from_boost<20>();
  static const std::vector<Node> g30 = detail::gl_from_boost<30>();
  switch (n) {
    case 4: return g4;
    case 8: return g8;
    case 16: return g16;
    case 20: return g20;
    case 30: return g30;
    default: throw PreconditionError("unsupported Gauss-Legendre order");
  }
}

// Composite Gauss–Legendre nodes on [a,b] with `panels` equal panels.
inline std::vector<Node> composite_gl(double a, double b, int panels, int order = 8) {
  const auto& g = gauss_legendre(order);
  std::vector<Node> out;
  out.reserve(static_cast<std::size_t>(panels) * g.size());
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    for (const auto& n : g) out.push_back({lo + 0.5 * h * (n.x + 1.0), 0.5 * h * n.w});
  }
  return out;
}

// Composite rule whose panel edges are geometric in r, for integrands with
// algebraic behaviour across decades.
inline std::vector<Node> geometric_gl(double a, double b, int panels_per_decade, int order = 8) {
  const int decades = std::max(1, static_cast<int>(std::ceil(std::log10(b / a) - 1e-12)));
  const int panels = decades * panels_per_decade;
  const double q = std::pow(b / a, 1.0 / panels);
  const auto& g = gauss_legendre(order);
  std::vector<Node> out;
  double lo = a;
  for (int p = 0; p < panels; ++p) {
    const double hi = (p + 1 == panels) ? b : lo * q;
    const double h = hi - lo;
    for (const auto& n : g) out.push_back({lo + 0.5 * h * (n.x + 1.0), 0.5 * h * n.w});
    lo = hi;
  }
  return out;
}

// Adaptive Gauss–Kronrod on a finite interval.
template <class F>
double adaptive(F&& f, double a, double b, double rel_tol = 1e-10, unsigned max_depth = 18) {
  if (b <= a) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, rel_tol,
                                                                        &err);
}

// Adaptive Gauss–Kronrod on [a,b] split at geometric breakpoints; used when
// b/a spans several decades.
template <class F>
double adaptive_decades(F&& f, double a, double b, double rel_tol = 1e-10) {
  if (b <= a) return 0.0;
  double s = 0.0;
  double lo = a;
  while (lo < b) {
    const double hi = std::min(b, lo * 10.0);
    s += adaptive(f, lo, hi, rel_tol);
    lo = hi;
  }
  return s;
}

// ∫_a^∞ f for f with algebraic or faster decay.
template <class F>
double to_infinity(F&& f, double a, double rel_tol = 1e-10) {
  thread_local boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([&](double t) { return f(a + t); }, rel_tol);
}

// ∫_a^b f for f with an integrable endpoint singularity.
template <class F>
double endpoint_singular(F&& f, double a, double b, double rel_tol = 1e-10) {
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, a, b, rel_tol);
}

// ∫_a^∞ g(r) e^{iωr} dr for slowly decaying smooth g and ω != 0 (Ooura–Mori
// double exponential formula).
template <class G>
cplx fourier_tail(G&& g, double a, double omega) {
  thread_local boost::math::quadrature::ooura_fourier_cos<double> cosint(1e-11, 8);
  thread_local boost::math::quadrature::ooura_fourier_sin<double> sinint(1e-11, 8);
  const double w = std::abs(omega);
  auto h = [&](double t) { return g(a + t); };
  const double c = cosint.integrate(h, w).first;
  double s = sinint.integrate(h, w).first;
  if (omega < 0) s = -s;
  return std::exp(cplx(0.0, omega * a)) * cplx(c, s);
}

// ∫_a^b g(r) e^{iωr} dr on a finite interval, panelled by the oscillation
// period. For very many periods the interval is closed with two tails.
template <class G>
cplx oscillatory(G&& g, double a, double b, double omega, bool tails_ok) {
  if (b <= a) return 0.0;
  const double w = std::abs(omega);
  const double periods = w * (b - a) / kTwoPi;
  if (w == 0.0) return adaptive_decades(g, a, b);
  if (periods > 400.0 && tails_ok) return fourier_tail(g, a, omega) - fourier_tail(g, b, omega);
  const int panels = std::max(1, static_cast<int>(std::ceil(periods * 2.0)));
  const double h = (b - a) / panels;
  double re = 0.0, im = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h, hi = lo + h;
    re += adaptive([&](double r) { return g(r) * std::cos(omega * r); }, lo, hi, 1e-12, 8);
    im += adaptive([&](double r) { return g(r) * std::sin(omega * r); }, lo, hi, 1e-12, 8);
  }
  return {re, im};
}

}  // namespace perhom::quad
