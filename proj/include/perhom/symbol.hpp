// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <complex>

#include "perhom/quadrature.hpp"
#include "perhom/spec_model.hpp"

namespace perhom {

namespace detail {

// e^{ix} − 1 − ix without cancellation for small x.
inline cplx exp_m1_mlin(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return {-0.5 * x2 + x2 * x2 / 24.0, -x2 * x / 6.0 + x2 * x2 * x / 120.0};
  }
  const double s = std::sin(0.5 * x);
  return {-2.0 * s * s, std::sin(x) - x};
}

inline cplx expm1i(double x) {
  const double s = std::sin(0.5 * x);
  return {-2.0 * s * s, std::sin(x)};
}

}  // namespace detail

// Per z-frequency pieces of the jump symbol:
// η_q(u) = ∫(e^{i⟨u,z⟩} − 1 − i⟨u,z⟩1_{|z|<=1}) e^{i2π⟨q,z⟩} Π(dz)
// for each q in `qs`, by direct radial quadrature per angular node.
inline std::vector<cplx> modal_symbol(const JumpSpec& s, const Vec& u, const std::vector<Freq>& qs,
                                      int angular_res = 256) {
  const int d = s.dim;
  std::vector<Vec> ws;
  for (const auto& q : qs) {
    Vec w;
    for (int i = 0; i < d; ++i) w[i] = kTwoPi * q[i];
    ws.push_back(w);
  }
  std::vector<cplx> eta(qs.size(), 0.0);
  if (const auto* st = std::get_if<SmallStable>(&s.small)) {
    const double a0 = st->alpha0;
    for (const auto& n : SphericalMeasure::uniform(sphere_area(d)).nodes(d, angular_res)) {
      const double a = dot(u, n.theta);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < qs.size(); ++j) {
        const double cw = dot(ws[j], n.theta);
        // ∫_0^1 e^{icr}(e^{iar} − 1 − iar) r^{-1-α₀} dr
        auto g = [&](double r) {
          return r > 1e-100 ? std::exp(cplx(0, cw * r)) * detail::exp_m1_mlin(a * r) * std::pow(r, -1.0 - a0) : cplx{};
        };
        auto fr = [&](double r) { return g(r).real(); };
        auto fi = [&](double r) { return g(r).imag(); };
        const int panels = 1 + static_cast<int>(std::abs(a) + std::abs(cw));
        double re = 0.0, im = 0.0;
        for (int p = 0; p < panels; ++p) {
          const double lo = static_cast<double>(p) / panels, hi = static_cast<double>(p + 1) / panels;
          re += quad::endpoint_singular(fr, lo, hi, 1e-12);
          im += quad::endpoint_singular(fi, lo, hi, 1e-12);
        }
        eta[j] += n.weight * cplx(re, im);
      }
    }
  } else if (const auto* at = std::get_if<SmallAtoms>(&s.small)) {
    for (const auto& n : at->atoms)
      for (std::size_t j = 0; j < qs.size(); ++j)
        eta[j] += n.weight * std::exp(cplx(0, dot(ws[j], n.theta))) * detail::exp_m1_mlin(dot(u, n.theta));
  }
  // Large part: ∫_1^∞ (e^{i(a+c)r} − e^{icr}) ρ(r) dr per node.
  for (const auto& comp : large_components(s, angular_res)) {
    for (const auto& n : comp.nodes) {
      const double a = dot(u, n.theta);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < qs.size(); ++j) {
        const double cw = dot(ws[j], n.theta);
        const cplx I = radial_fourier(comp, 0.0, a + cw, 1.0, std::numeric_limits<double>::infinity()) -
                       radial_fourier(comp, 0.0, cw, 1.0, std::numeric_limits<double>::infinity());
        eta[j] += n.weight * I;
      }
    }
  }
  return eta;
}

// η(u) = ∫(e^{i⟨u,z⟩} − 1 − i⟨u,z⟩1_{|z|<=1}) k(z) Π(dz) + i⟨u,b⟩ for
// x-independent coefficients; u is an angular frequency (u = 2πn for the
// torus multiplier m(n)). Evaluated independently of the simulator.
inline cplx jump_symbol(const JumpSpec& s, const Vec& u, int angular_res = 256) {
  if (!s.coefficients_x_independent()) throw PreconditionError("jump_symbol needs x-independent coefficients");
  const TrigPoly* kt = s.kernel.trig();
  if (!kt) throw PreconditionError("jump_symbol needs a trigonometric kernel");
  std::vector<Freq> qs;
  std::vector<cplx> cs;
  for (const auto& [pq, c] : kt->complex_modes()) {
    qs.push_back(pq.second);
    cs.push_back(c);
  }
  const auto eta_q = modal_symbol(s, u, qs, angular_res);
  cplx eta = 0.0;
  for (std::size_t j = 0; j < qs.size(); ++j) eta += cs[j] * eta_q[j];
  eta += cplx(0.0, dot(u, s.drift(Vec{})));
  return eta;
}

// m(n) = η(2πn): eigenvalue of the generator on e^{i2π⟨n,x⟩}.
inline cplx fourier_multiplier(const JumpSpec& s, const Freq& n, int angular_res = 256) {
  Vec u;
  for (int i = 0; i < s.dim; ++i) u[i] = kTwoPi * n[i];
  return jump_symbol(s, u, angular_res);
}

}  // namespace perhom
