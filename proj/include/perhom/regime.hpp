// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <string>

#include "perhom/spec_model.hpp"

namespace perhom {

enum class Regime { StableNoCenter, CauchyCenter, StableCenter, CriticalLog, Diffusive };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::StableNoCenter: return "stable_no_center";
    case Regime::CauchyCenter: return "cauchy_center";
    case Regime::StableCenter: return "stable_center";
    case Regime::CriticalLog: return "critical_log";
    case Regime::Diffusive: return "diffusive";
  }
  return "unknown";
}

inline Regime regime_from_string(const std::string& s) {
  if (s == "stable_no_center") return Regime::StableNoCenter;
  if (s == "cauchy_center") return Regime::CauchyCenter;
  if (s == "stable_center") return Regime::StableCenter;
  if (s == "critical_log") return Regime::CriticalLog;
  if (s == "diffusive") return Regime::Diffusive;
  throw ConfigError("", "unknown regime '" + s + "'");
}

inline bool is_stable_regime(Regime r) {
  return r == Regime::StableNoCenter || r == Regime::CauchyCenter || r == Regime::StableCenter;
}

// Regime implied by the scaling index / moment condition.
inline Regime infer_regime(const JumpSpec& s) {
  if (s.finite_second_moment()) return Regime::Diffusive;
  const double a = s.index();
  if (a < 1.0) return Regime::StableNoCenter;
  if (a == 1.0) return Regime::CauchyCenter;
  if (a < 2.0) return Regime::StableCenter;
  return Regime::CriticalLog;
}

inline void check_regime(const JumpSpec& s, Regime r) {
  const double a = s.index();
  bool ok = false;
  switch (r) {
    case Regime::StableNoCenter: ok = s.large && a > 0.0 && a < 1.0; break;
    case Regime::CauchyCenter: ok = s.large && std::abs(a - 1.0) < 1e-12; break;
    case Regime::StableCenter: ok = s.large && a > 1.0 && a < 2.0; break;
    case Regime::CriticalLog:
      ok = s.large && s.large->phi.power_exponent() && std::abs(*s.large->phi.power_exponent() - 2.0) < 1e-12;
      break;
    case Regime::Diffusive: ok = s.finite_second_moment(); break;
  }
  if (!ok) throw PreconditionError("regime " + to_string(r) + " inconsistent with the jump measure (index " +
                                   std::to_string(a) + ")");
}

// ρ(1/ε): unscaled time per unit of scaled time.
inline double time_scale(const JumpSpec& s, Regime r, double eps) {
  switch (r) {
    case Regime::StableNoCenter:
    case Regime::CauchyCenter:
    case Regime::StableCenter: return s.large->phi(1.0 / eps);
    case Regime::CriticalLog: return 1.0 / (eps * eps * std::abs(std::log(eps)));
    case Regime::Diffusive: return 1.0 / (eps * eps);
  }
  return 0.0;
}

inline bool needs_centering(Regime r) { return r != Regime::StableNoCenter; }

// Drift averages that enter the recentering. The α=1 family uses b̄_{1/ε},
// which depends on ε; it is supplied as a function.
struct DriftAverages {
  Vec bbar;                                   // μ(b)
  std::optional<Vec> bbar_inf;                // μ(b_∞)
  std::function<Vec(double)> bbar_trunc;      // R ↦ μ(b_R)
};

// Centering velocity: Y^ε_t = εX_{ρt} − ε·ρ·v(ε)·t.
inline Vec centering_velocity(Regime r, const DriftAverages& avg, double eps) {
  switch (r) {
    case Regime::StableNoCenter: return Vec{};
    case Regime::CauchyCenter:
      if (!avg.bbar_trunc) throw PreconditionError("cauchy_center regime needs b̄_{1/ε}");
      return avg.bbar_trunc(1.0 / eps) + avg.bbar;
    default:
      if (!avg.bbar_inf) throw PreconditionError(to_string(r) + " regime needs b̄_∞");
      return *avg.bbar_inf + avg.bbar;
  }
}

}  // namespace perhom
