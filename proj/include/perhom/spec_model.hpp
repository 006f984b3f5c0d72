// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "perhom/core.hpp"
#include "perhom/quadrature.hpp"
#include "perhom/rng.hpp"
#include "perhom/trig_poly.hpp"

namespace perhom {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Spherical measures ϱ₀ on S^{d-1}

struct AngularNode {
  Vec theta;
  double weight;
};

struct UniformSurface {
  double total_mass = 1.0;
};
// Density with respect to surface measure; the density is a trigonometric
// polynomial evaluated at z = θ (x-modes are ignored).
struct SphereDensity {
  TrigPoly density;
  int resolution = 64;
};
struct SphereAtoms {
  std::vector<AngularNode> atoms;
};

class SphericalMeasure {
 public:
  using Variant = std::variant<UniformSurface, SphereDensity, SphereAtoms>;

  SphericalMeasure() = default;
  SphericalMeasure(Variant v) : v_(std::move(v)) {}  // NOLINT(implicit)
  SphericalMeasure(UniformSurface u) : v_(u) {}      // NOLINT(implicit)
  SphericalMeasure(SphereDensity d) : v_(std::move(d)) {}  // NOLINT(implicit)
  SphericalMeasure(SphereAtoms a) : v_(std::move(a)) {}    // NOLINT(implicit)

  static SphericalMeasure uniform(double mass) { return {UniformSurface{mass}}; }
  static SphericalMeasure atoms(std::vector<AngularNode> a) { return {SphereAtoms{std::move(a)}}; }

  const Variant& variant() const { return v_; }
  bool is_atomic() const { return std::holds_alternative<SphereAtoms>(v_); }
  bool is_uniform() const { return std::holds_alternative<UniformSurface>(v_); }

  // Angular quadrature. d=1: the two points ±1. d=2: trapezoid with nodes at
  // half-integer multiples of 2π/n. d=3: Gauss–Legendre in cos(polar) ×
  // trapezoid in azimuth.
  std::vector<AngularNode> nodes(int d, int resolution = 0) const {
    if (const auto* a = std::get_if<SphereAtoms>(&v_)) return a->atoms;
    int res = resolution;
    const SphereDensity* dens = std::get_if<SphereDensity>(&v_);
    if (res <= 0) res = dens ? dens->resolution : 64;
    auto weight = [&](const Vec& th, double area_w) {
      if (dens) return area_w * dens->density.eval(Vec{}, th);
      return area_w * std::get<UniformSurface>(v_).total_mass / sphere_area(d);
    };
    std::vector<AngularNode> out;
    if (d == 1) {
      out.push_back({Vec{1.0}, weight(Vec{1.0}, 1.0)});
      out.push_back({Vec{-1.0}, weight(Vec{-1.0}, 1.0)});
    } else if (d == 2) {
      for (int j = 0; j < res; ++j) {
        const double ang = kTwoPi * (j + 0.5) / res;
        const Vec th{std::cos(ang), std::sin(ang)};
        out.push_back({th, weight(th, kTwoPi / res)});
      }
    } else {
      const int order = res >= 120 ? 30 : (res >= 80 ? 20 : 16);
      const int naz = std::max(8, res / 2);
      for (const auto& g : quad::gauss_legendre(order)) {
        const double ct = g.x, st = std::sqrt(1.0 - ct * ct);
        for (int j = 0; j < naz; ++j) {
          const double ph = kTwoPi * (j + 0.5) / naz;
          const Vec th{st * std::cos(ph), st * std::sin(ph), ct};
          out.push_back({th, weight(th, g.w * kTwoPi / naz)});
        }
      }
    }
    return out;
  }

  double total_mass(int d) const {
    if (const auto* u = std::get_if<UniformSurface>(&v_)) return u->total_mass;
    double s = 0.0;
    for (const auto& n : nodes(d)) s += n.weight;
    return s;
  }
  // Total variation |ϱ|(S^{d-1}); differs from total_mass only for signed densities.
  double total_variation(int d) const {
    if (const auto* u = std::get_if<UniformSurface>(&v_)) return std::abs(u->total_mass);
    double s = 0.0;
    for (const auto& n : nodes(d)) s += std::abs(n.weight);
    return s;
  }

  // Direction drawn from the normalized measure.
  Vec sample(Rng& rng, int d) const {
    if (const auto* a = std::get_if<SphereAtoms>(&v_)) {
      double tot = 0.0;
      for (const auto& n : a->atoms) tot += n.weight;
      double u = rng.uniform() * tot;
      for (const auto& n : a->atoms) {
        if (u < n.weight) return n.theta;
        u -= n.weight;
      }
      return a->atoms.back().theta;
    }
    if (const auto* dn = std::get_if<SphereDensity>(&v_)) {
      const double bound = dn->density.upper_bound();
      for (;;) {
        const Vec th = uniform_direction(rng, d);
        if (rng.uniform() * bound <= dn->density.eval(Vec{}, th)) return th;
      }
    }
    return uniform_direction(rng, d);
  }

  static Vec uniform_direction(Rng& rng, int d) {
    if (d == 1) return Vec{rng.uniform() < 0.5 ? -1.0 : 1.0};
    if (d == 2) {
      const double a = kTwoPi * rng.uniform();
      return Vec{std::cos(a), std::sin(a)};
    }
    for (;;) {
      Vec g{rng.normal(), rng.normal(), rng.normal()};
      const double n = norm(g);
      if (n > 1e-12) return g * (1.0 / n);
    }
  }

 private:
  Variant v_ = UniformSurface{1.0};
};

// ---------------------------------------------------------------------------
// Scaling function φ

struct PowerPhi {
  double alpha;
};
// Φ(r) = Σ_j w_j r^{β_j}
struct MixedPhi {
  std::vector<std::pair<double, double>> nu;  // (β, weight)
};
// φ(r) = r^α log(1+r)
struct PowerLogPhi {
  double alpha;
};

class ScalingFunction {
 public:
  using Variant = std::variant<PowerPhi, MixedPhi, PowerLogPhi>;
  ScalingFunction() = default;
  ScalingFunction(Variant v) : v_(std::move(v)) {}  // NOLINT(implicit)
  ScalingFunction(PowerPhi p) : v_(p) {}             // NOLINT(implicit)
  ScalingFunction(MixedPhi p) : v_(std::move(p)) {}  // NOLINT(implicit)
  ScalingFunction(PowerLogPhi p) : v_(p) {}          // NOLINT(implicit)

  static ScalingFunction power(double a) { return {PowerPhi{a}}; }

  const Variant& variant() const { return v_; }

  double operator()(double r) const {
    return std::visit(
        [r](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, PowerPhi>) {
            return std::pow(r, p.alpha);
          } else if constexpr (std::is_same_v<T, MixedPhi>) {
            double s = 0.0;
            for (const auto& [b, w] : p.nu) s += w * std::pow(r, b);
            return s;
          } else {
            return std::pow(r, p.alpha) * std::log1p(r);
          }
        },
        v_);
  }

  // Regular-variation index: the declared α, or the top of supp ν.
  double index() const {
    return std::visit(
        [](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, MixedPhi>) {
            double m = -1.0;
            for (const auto& [b, w] : p.nu)
              if (w > 0.0) m = std::max(m, b);
            return m;
          } else {
            return p.alpha;
          }
        },
        v_);
  }

  std::optional<double> power_exponent() const {
    if (const auto* p = std::get_if<PowerPhi>(&v_)) return p->alpha;
    return std::nullopt;
  }

  std::string name() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, PowerPhi>) {
            os << "power(" << p.alpha << ")";
          } else if constexpr (std::is_same_v<T, MixedPhi>) {
            os << "mixed(";
            for (std::size_t i = 0; i < p.nu.size(); ++i)
              os << (i ? "," : "") << p.nu[i].second << "*r^" << p.nu[i].first;
            os << ")";
          } else {
            os << "power_log(" << p.alpha << ")";
          }
        },
        v_);
    return os.str();
  }

 private:
  Variant v_ = PowerPhi{1.0};
};

// ---------------------------------------------------------------------------
// κ(r,dθ) = g(r)·base(dθ)

struct PowerDecay {
  double c;
  double gamma;
};
// c · r^β / (r^α + r^β), β < α
struct RatioPower {
  double c;
  double alpha;
  double beta;
};
using RadialProfile = std::variant<PowerDecay, RatioPower>;

inline double eval_profile(const RadialProfile& g, double r) {
  return std::visit(
      [r](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PowerDecay>) {
          return p.c * std::pow(r, -p.gamma);
        } else {
          return p.c / (std::pow(r, p.alpha - p.beta) + 1.0);
        }
      },
      g);
}

struct Kappa {
  RadialProfile g;
  std::optional<SphericalMeasure> base;  // empty: base is ϱ₀ itself
};

// ---------------------------------------------------------------------------
// Small jumps, kernel, drift

struct SmallZero {};
// 1_{|z|<=1} |z|^{-d-α₀} dz
struct SmallStable {
  double alpha0;
};
// Finite point masses inside the closed unit ball.
struct SmallAtoms {
  std::vector<AngularNode> atoms;  // theta holds the jump vector z, |z| <= 1
};
using SmallJumpPart = std::variant<SmallZero, SmallStable, SmallAtoms>;

// ∫_{|z|<=1}|z|² Π(dz)
inline double small_second_moment(const SmallJumpPart& s, int d) {
  if (const auto* st = std::get_if<SmallStable>(&s)) return sphere_area(d) / (2.0 - st->alpha0);
  if (const auto* at = std::get_if<SmallAtoms>(&s)) {
    double m = 0.0;
    for (const auto& a : at->atoms) m += a.weight * dot(a.theta, a.theta);
    return m;
  }
  return 0.0;
}

using KernelFn = std::function<double(const Vec&, const Vec&)>;
using DriftFn = std::function<Vec(const Vec&)>;

struct PeriodicKernel {
  std::variant<TrigPoly, KernelFn> f = TrigPoly::constant(1, 1.0);
  double kmin = 1.0;
  double kmax = 1.0;
  bool periodic_in_z = true;
  // Structural hints for callbacks; derived automatically for TrigPoly.
  bool callback_x_independent = false;
  bool callback_z_independent = false;

  double operator()(const Vec& x, const Vec& z) const {
    if (const auto* t = std::get_if<TrigPoly>(&f)) return t->eval(x, z);
    return std::get<KernelFn>(f)(x, z);
  }
  const TrigPoly* trig() const { return std::get_if<TrigPoly>(&f); }
  bool x_independent() const { return trig() ? trig()->x_independent() : callback_x_independent; }
  bool z_independent() const { return trig() ? trig()->z_independent() : callback_z_independent; }
  // Upper bound used for thinning: rigorous for TrigPoly, declared otherwise.
  double dominating_bound() const {
    if (trig()) return std::max(kmax, trig()->upper_bound());
    return kmax;
  }
};

struct DriftField {
  std::variant<std::vector<TrigPoly>, DriftFn> f = std::vector<TrigPoly>{};

  Vec operator()(const Vec& x) const {
    if (const auto* t = std::get_if<std::vector<TrigPoly>>(&f)) {
      Vec b;
      for (std::size_t i = 0; i < t->size(); ++i) b[static_cast<int>(i)] = (*t)[i].eval_x(x);
      return b;
    }
    return std::get<DriftFn>(f)(x);
  }
  const std::vector<TrigPoly>* trig() const { return std::get_if<std::vector<TrigPoly>>(&f); }
  bool is_zero() const {
    const auto* t = trig();
    if (!t) return false;
    for (const auto& c : *t)
      if (!c.is_zero_poly()) return false;
    return true;
  }
  bool x_independent() const {
    const auto* t = trig();
    if (!t) return false;
    for (const auto& c : *t)
      if (!c.x_independent()) return false;
    return true;
  }
};

struct LargeJumps {
  SphericalMeasure rho0;
  ScalingFunction phi;
  std::optional<Kappa> kappa;
};

struct JumpSpec {
  int dim = 1;
  SmallJumpPart small = SmallZero{};
  std::optional<LargeJumps> large;
  PeriodicKernel kernel;
  DriftField drift;

  bool has_large() const { return large.has_value(); }
  double index() const { return large ? large->phi.index() : std::numeric_limits<double>::infinity(); }
  // ∫|z|²Π(dz) < ∞ on the large part: index > 2, or no large part.
  bool finite_second_moment() const { return !large || large->phi.index() > 2.0; }
  bool coefficients_x_independent() const {
    return kernel.x_independent() && drift.x_independent();
  }
};

// ---------------------------------------------------------------------------
// Radial decomposition of the large-jump part

// One summand of the large-jump measure: Σ_nodes w δ_θ(dθ) ⊗ ρ(r)dr on r > 1.
struct RadialComponent {
  const SphericalMeasure* measure = nullptr;
  std::vector<AngularNode> nodes;
  std::function<double(double)> density;  // ρ(r) per dr
  std::optional<double> pure_power;       // ρ(r) = r^{-1-α} exactly
  bool may_be_negative = false;
};

inline std::vector<RadialComponent> large_components(const JumpSpec& s, int resolution = 0) {
  std::vector<RadialComponent> out;
  if (!s.large) return out;
  const LargeJumps& L = *s.large;
  const ScalingFunction phi = L.phi;
  RadialComponent main;
  main.measure = &L.rho0;
  main.nodes = L.rho0.nodes(s.dim, resolution);
  const bool separate = L.kappa && L.kappa->base.has_value();
  if (L.kappa && !separate) {
    const RadialProfile g = L.kappa->g;
    main.density = [phi, g](double r) { return (1.0 + eval_profile(g, r)) / (r * phi(r)); };
    main.may_be_negative = true;
  } else {
    main.density = [phi](double r) { return 1.0 / (r * phi(r)); };
    main.pure_power = phi.power_exponent();
  }
  out.push_back(std::move(main));
  if (separate) {
    RadialComponent k;
    k.measure = &*L.kappa->base;
    k.nodes = L.kappa->base->nodes(s.dim, resolution);
    const RadialProfile g = L.kappa->g;
    k.density = [phi, g](double r) { return eval_profile(g, r) / (r * phi(r)); };
    k.may_be_negative = true;
    out.push_back(std::move(k));
  }
  return out;
}

// ∫_a^b r^p ρ(r) dr; b may be +∞.
inline double radial_integral(const RadialComponent& c, double p, double a, double b) {
  if (b <= a) return 0.0;
  if (c.pure_power) {
    const double e = p - *c.pure_power;
    if (std::isinf(b)) {
      if (e >= 0.0) throw IntegrabilityError("radial moment diverges at infinity");
      return -std::pow(a, e) / e;
    }
    if (std::abs(e) < 1e-14) return std::log(b / a);
    return (std::pow(b, e) - std::pow(a, e)) / e;
  }
  auto f = [&](double r) { return std::pow(r, p) * c.density(r); };
  if (std::isinf(b)) {
    const double cut = std::max(a * 10.0, 10.0);
    return quad::adaptive_decades(f, a, cut) + quad::to_infinity(f, cut);
  }
  return quad::adaptive_decades(f, a, b);
}

// ∫_a^b r^p ρ(r) e^{iωr} dr; b may be +∞ when r^p ρ(r) → 0.
inline cplx radial_fourier(const RadialComponent& c, double p, double omega, double a, double b) {
  if (omega == 0.0) return radial_integral(c, p, a, b);
  auto g = [&](double r) { return std::pow(r, p) * c.density(r); };
  if (std::isinf(b)) return quad::fourier_tail(g, a, omega);
  return quad::oscillatory(g, a, b, omega, /*tails_ok=*/true);
}

// Tail mass Π(|z| > R) of the large part (signed components included).
inline double large_tail_mass(const JumpSpec& s, double R) {
  double m = 0.0;
  for (const auto& c : large_components(s)) {
    double w = 0.0;
    for (const auto& n : c.nodes) w += n.weight;
    m += w * radial_integral(c, 0.0, std::max(R, 1.0), std::numeric_limits<double>::infinity());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Truncated and full drifts b_R(x) = ∫_{1<|z|<=R} z k(x,z) Π(dz)

// Precomputes the radial transforms so that b_R can be evaluated at many x.
class DriftEvaluator {
 public:
  // R = +∞ gives b_∞; requires ∫_1^∞ dr/φ < ∞.
  DriftEvaluator(const JumpSpec& s, double R) : spec_(&s), R_(R) {
    if (!(R > 1.0)) throw PreconditionError("truncation radius must exceed 1");
    if (std::isinf(R) && s.large && !(s.large->phi.index() > 1.0))
      throw IntegrabilityError("∫_1^∞ dr/φ(r) diverges (index <= 1): b_∞ undefined");
    comps_ = large_components(s);
    const TrigPoly* kt = s.kernel.trig();
    for (std::size_t ci = 0; ci < comps_.size(); ++ci) {
      for (const auto& n : comps_[ci].nodes) {
        Entry e{n.theta, n.weight, {}};
        if (kt) {
          for (const auto& t : kt->terms()) {
            const double om = kTwoPi * dot(t.q, n.theta);
            e.transforms.push_back(radial_fourier(comps_[ci], 1.0, om, 1.0, R));
          }
        }
        entries_.push_back({ci, std::move(e)});
      }
    }
  }

  Vec operator()(const Vec& x) const {
    Vec out;
    const TrigPoly* kt = spec_->kernel.trig();
    for (const auto& [ci, e] : entries_) {
      double s = 0.0;
      if (kt) {
        const auto& terms = kt->terms();
        for (std::size_t j = 0; j < terms.size(); ++j) {
          const double A = kTwoPi * dot(terms[j].p, x);
          s += (cplx(terms[j].a, -terms[j].b) * std::exp(cplx(0.0, A)) * e.transforms[j]).real();
        }
      } else {
        s = callback_ray(comps_[ci], x, e.theta);
      }
      out += e.theta * (e.weight * s);
    }
    return out;
  }

 private:
  struct Entry {
    Vec theta;
    double weight;
    std::vector<cplx> transforms;
  };

  // ∫_1^R r ρ(r) k(x, rθ) dr for callback kernels; unit panels up to a cap,
  // then the Cesàro mean of k along the ray times the remaining radial mass.
  double callback_ray(const RadialComponent& c, const Vec& x, const Vec& th) const {
    const double cap = std::isinf(R_) ? 256.0 : std::min(R_, 4096.0);
    double s = 0.0;
    for (double lo = 1.0; lo < cap; lo += 1.0) {
      const double hi = std::min(cap, lo + 1.0);
      s += quad::adaptive([&](double r) { return r * c.density(r) * (*spec_).kernel(x, th * r); }, lo, hi,
                          1e-10, 10);
    }
    if (cap < R_) {
      const int n = 4096;
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += spec_->kernel(x, th * (cap + 64.0 * (i + 0.5) / n));
      mean /= n;
      s += mean * radial_integral(c, 1.0, cap, R_);
    }
    return s;
  }

  const JumpSpec* spec_;
  double R_;
  std::vector<RadialComponent> comps_;
  std::vector<std::pair<std::size_t, Entry>> entries_;
};

inline Vec truncated_drift(const JumpSpec& s, const Vec& x, double R) {
  if (!s.large) {
    if (!(R > 1.0)) throw PreconditionError("truncation radius must exceed 1");
    return Vec{};
  }
  return DriftEvaluator(s, R)(x);
}

inline Vec full_drift(const JumpSpec& s, const Vec& x) {
  if (!s.large) return Vec{};
  return DriftEvaluator(s, std::numeric_limits<double>::infinity())(x);
}

// kmax·|ϱ₀+κ|·∫_R^∞ dr/φ(r): bound on |b_R − b_∞|.
inline double drift_tail_bound(const JumpSpec& s, double R) {
  if (!s.large) return 0.0;
  double tv = 0.0;
  for (const auto& c : large_components(s)) {
    double w = 0.0;
    for (const auto& n : c.nodes) w += std::abs(n.weight);
    RadialComponent abs_c = c;
    auto dens = c.density;
    abs_c.density = [dens](double r) { return std::abs(dens(r)); };
    tv += w * radial_integral(abs_c, 1.0, R, std::numeric_limits<double>::infinity());
  }
  return s.kernel.dominating_bound() * tv;
}

// ---------------------------------------------------------------------------
// Limit measure Π₀(dz) = ϱ₀(dθ) dr / r^{1+α}

class LimitMeasure {
 public:
  LimitMeasure(int d, double alpha, SphericalMeasure rho0) : d_(d), alpha_(alpha), rho0_(std::move(rho0)) {
    nodes_ = rho0_.nodes(d_);
  }
  int dim() const { return d_; }
  double alpha() const { return alpha_; }
  const SphericalMeasure& rho0() const { return rho0_; }
  const std::vector<AngularNode>& nodes() const { return nodes_; }

  double radial_mass(double r1, double r2) const {
    if (r2 <= r1) return 0.0;
    const double a = std::pow(r1, -alpha_);
    const double b = std::isinf(r2) ? 0.0 : std::pow(r2, -alpha_);
    return (a - b) / alpha_;
  }
  // Π₀({r1 <= |z| <= r2}).
  double mass(double r1, double r2) const { return rho0_.total_mass(d_) * radial_mass(r1, r2); }
  // Π₀({r1 <= |z| <= r2, θ ∈ B}) with B given by a predicate on directions;
  // resolved on the angular nodes (atoms are exact).
  template <class Pred>
  double mass(double r1, double r2, Pred&& in_B) const {
    double w = 0.0;
    for (const auto& n : nodes_)
      if (in_B(n.theta)) w += n.weight;
    return w * radial_mass(r1, r2);
  }
  // Draw (r,θ) from Π₀ restricted to r1 <= r <= r2, normalized.
  Vec sample(Rng& rng, double r1, double r2) const {
    const double a = std::pow(r1, -alpha_);
    const double b = std::isinf(r2) ? 0.0 : std::pow(r2, -alpha_);
    const double r = std::pow(a - rng.uniform() * (a - b), -1.0 / alpha_);
    return rho0_.sample(rng, d_) * r;
  }

 private:
  int d_;
  double alpha_;
  SphericalMeasure rho0_;
  std::vector<AngularNode> nodes_;
};

inline LimitMeasure pi0(const JumpSpec& s) {
  if (!s.large) throw PreconditionError("no large-jump part: Π₀ undefined");
  const double a = s.large->phi.index();
  if (!(a > 0.0 && a < 2.0)) throw PreconditionError("Π₀ requires index α in (0,2)");
  return LimitMeasure(s.dim, a, s.large->rho0);
}

// ---------------------------------------------------------------------------
// Scaling index probe: α̂(λ) = mean_r log(φ(λr)/φ(λ)) / log r

struct ScalingProbe {
  std::vector<double> lambdas;
  std::vector<double> alpha_hat;  // per λ
  double raw = 0.0;               // α̂ at the largest λ
  double extrapolated = 0.0;      // intercept of α̂ against 1/log λ (two largest λ)
  double estimate = 0.0;          // reported index
  bool converged = true;
};

inline ScalingProbe scaling_index_probe(const ScalingFunction& phi, const std::vector<double>& r_grid,
                                        const std::vector<double>& lambda_grid) {
  if (lambda_grid.empty() || r_grid.empty()) throw PreconditionError("empty probe grid");
  ScalingProbe p;
  p.lambdas = lambda_grid;
  for (double lam : lambda_grid) {
    double s = 0.0;
    int n = 0;
    for (double r : r_grid) {
      if (r <= 0.0 || r == 1.0) continue;
      s += (std::log(phi(lam * r)) - std::log(phi(lam))) / std::log(r);
      ++n;
    }
    if (n == 0) throw PreconditionError("r grid must contain values other than 1");
    p.alpha_hat.push_back(s / n);
  }
  p.raw = p.alpha_hat.back();
  p.extrapolated = p.raw;
  const std::size_t m = p.alpha_hat.size();
  if (m >= 2) {
    const double u1 = 1.0 / std::log(lambda_grid[m - 2]), u2 = 1.0 / std::log(lambda_grid[m - 1]);
    const double a1 = p.alpha_hat[m - 2], a2 = p.alpha_hat[m - 1];
    if (std::abs(u1 - u2) > 1e-15) p.extrapolated = a2 - u2 * (a2 - a1) / (u2 - u1);
    if (m >= 3) {
      const double d1 = std::abs(p.alpha_hat[m - 2] - p.alpha_hat[m - 3]);
      const double d2 = std::abs(p.alpha_hat[m - 1] - p.alpha_hat[m - 2]);
      p.converged = d2 <= d1 + 1e-9;
    }
  }
  p.estimate = p.extrapolated;
  return p;
}

inline ScalingProbe scaling_index_probe(const ScalingFunction& phi) {
  return scaling_index_probe(phi, {2.0, 4.0}, {1e4, 1e5, 1e6, 1e7, 1e8});
}

// ---------------------------------------------------------------------------
// Validation

struct Check {
  std::string name;
  bool passed;
  double measured;
  std::string detail;
};

struct ValidationReport {
  std::vector<Check> checks;
  double measured_kmin = 0.0;
  double measured_kmax = 0.0;
  bool ok() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

struct ValidateOptions {
  // Screen the sufficient conditions for well-posedness and exponential
  // ergodicity: kmin > 0 and a stable-like small-jump density.
  bool require_positive_kmin = false;
  int x_grid = 0;  // 0: 64 (d<=2), 32 (d=3)
  int z_grid = 0;  // 0: 16 (d<=2), 8 (d=3)
};

namespace detail {
inline void for_grid(int d, int n, const std::function<void(const Vec&)>& f, double offset = 0.0) {
  const int total = static_cast<int>(std::pow(n, d));
  for (int idx = 0; idx < total; ++idx) {
    Vec x;
    int r = idx;
    for (int i = 0; i < d; ++i) {
      x[i] = (r % n + offset) / n;
      r /= n;
    }
    f(x);
  }
}
}  // namespace detail

inline ValidationReport validate(const JumpSpec& s, const ValidateOptions& opt = {}) {
  check_dim(s.dim);
  const int d = s.dim;
  ValidationReport rep;
  auto add = [&](std::string name, bool ok, double v, std::string det = "") {
    rep.checks.push_back({std::move(name), ok, v, std::move(det)});
  };

  // ϱ₀ and κ
  if (s.large) {
    const auto& L = *s.large;
    double mass = 0.0;
    bool finite = true, unit = true;
    if (const auto* a = std::get_if<SphereAtoms>(&L.rho0.variant())) {
      for (const auto& n : a->atoms) {
        finite = finite && std::isfinite(n.weight) && n.weight > 0.0;
        unit = unit && std::abs(norm(n.theta) - 1.0) <= 1e-12;
        for (int i = d; i < kMaxDim; ++i) unit = unit && n.theta[i] == 0.0;
      }
    }
    mass = L.rho0.total_mass(d);
    if (!finite || !std::isfinite(mass)) throw ValidationError("ϱ₀ has non-finite or non-positive weights");
    add("rho0.mass_positive", mass > 0.0, mass);
    add("rho0.atoms_unit_norm", unit, unit ? 1.0 : 0.0);
    bool nonneg = true;
    for (const auto& n : L.rho0.nodes(d)) nonneg = nonneg && n.weight >= 0.0;
    add("rho0.nonnegative", nonneg, nonneg ? 1.0 : 0.0);

    // φ strictly increasing on (1,∞), sampled on a log grid.
    bool incr = true;
    double prev = L.phi(1.0);
    for (int i = 1; i <= 400; ++i) {
      const double r = std::pow(10.0, 12.0 * i / 400.0);
      const double v = L.phi(r);
      incr = incr && v > prev && std::isfinite(v);
      prev = v;
    }
    add("phi.strictly_increasing", incr && L.phi(1.0) > 0.0, L.phi(1.0));
    const auto probe = scaling_index_probe(L.phi);
    const double idx = L.phi.index();
    add("phi.index_probe", std::abs(probe.estimate - idx) <= 0.05 && idx > 0.0, probe.estimate,
        "declared " + std::to_string(idx) + ", raw " + std::to_string(probe.raw));
    if (const auto* m = std::get_if<MixedPhi>(&L.phi.variant())) {
      bool ok = !m->nu.empty();
      for (const auto& [b, w] : m->nu) ok = ok && w >= 0.0 && b > 0.0;
      add("phi.mixed_measure", ok, idx);
    }

    if (L.kappa) {
      const double base_tv = L.kappa->base ? L.kappa->base->total_variation(d) : L.rho0.total_variation(d);
      double sup = 0.0, last = 0.0;
      for (int i = 0; i <= 200; ++i) {
        const double r = std::pow(10.0, 8.0 * i / 200.0);
        const double g = std::abs(eval_profile(L.kappa->g, r));
        sup = std::max(sup, g);
        last = g;
      }
      add("kappa.bounded", std::isfinite(sup * base_tv), sup * base_tv);
      add("kappa.decays", last <= 1e-2 * std::max(sup, 1e-300) || last < 1e-6, last);
      // Total large-jump density must be a nonnegative measure.
      bool ok = true;
      for (const auto& c : large_components(s)) {
        for (int i = 0; i <= 200 && ok; ++i) {
          const double r = (1.0 + 1e-12) * std::pow(10.0, 8.0 * i / 200.0);
          if (!c.may_be_negative) continue;
          if (L.kappa->base) {
            // separate component: combined with ϱ₀ on each node cannot be
            // checked pointwise; require the signed part be dominated in mass.
            const double g = eval_profile(L.kappa->g, r);
            if (g < 0.0 && std::abs(g) * L.kappa->base->total_variation(d) > L.rho0.total_mass(d)) ok = false;
          } else if (c.density(r) < 0.0) {
            ok = false;
          }
        }
      }
      add("kappa.measure_nonnegative", ok, ok ? 1.0 : 0.0);
    }
  }

  // Small jumps
  double m2 = small_second_moment(s.small, d);
  if (const auto* st = std::get_if<SmallStable>(&s.small)) {
    add("small.alpha0_range", st->alpha0 > 0.0 && st->alpha0 < 2.0, st->alpha0);
  }
  if (const auto* at = std::get_if<SmallAtoms>(&s.small)) {
    bool ok = true;
    for (const auto& a : at->atoms) ok = ok && norm(a.theta) <= 1.0 + 1e-12 && a.weight >= 0.0;
    add("small.atoms_in_unit_ball", ok, ok ? 1.0 : 0.0);
  }
  add("small.second_moment_finite", std::isfinite(m2), m2);

  // Kernel bounds, periodicity, continuity on sample grids.
  const int nx = opt.x_grid > 0 ? opt.x_grid : (d <= 2 ? 64 : 32);
  const int nz = opt.z_grid > 0 ? opt.z_grid : (d <= 2 ? 16 : 8);
  double kmin = std::numeric_limits<double>::infinity(), kmax = -kmin;
  double xper = 0.0, zper = 0.0;
  std::vector<Vec> zs;
  detail::for_grid(d, nz, [&](const Vec& z) { zs.push_back(z * 2.0 - Vec{1.0, d > 1 ? 1.0 : 0.0, d > 2 ? 1.0 : 0.0}); });
  detail::for_grid(d, nx, [&](const Vec& x) {
    for (const auto& z : zs) {
      const double v = s.kernel(x, z);
      kmin = std::min(kmin, v);
      kmax = std::max(kmax, v);
    }
  });
  // periodicity on a coarse subgrid
  detail::for_grid(d, 8, [&](const Vec& x) {
    for (std::size_t j = 0; j < zs.size(); j += std::max<std::size_t>(1, zs.size() / 16)) {
      const Vec& z = zs[j];
      const double v = s.kernel(x, z);
      for (int i = 0; i < d; ++i) {
        xper = std::max(xper, std::abs(s.kernel(x + unit(i), z) - v));
        zper = std::max(zper, std::abs(s.kernel(x, z + unit(i)) - v));
      }
    }
  }, 0.37);
  rep.measured_kmin = kmin;
  rep.measured_kmax = kmax;
  add("kernel.nonnegative", kmin >= 0.0, kmin);
  add("kernel.declared_kmin", s.kernel.kmin <= kmin + 1e-12 && s.kernel.kmin >= 0.0, kmin,
      "declared " + std::to_string(s.kernel.kmin));
  add("kernel.declared_kmax", kmax <= s.kernel.kmax + 1e-12, kmax, "declared " + std::to_string(s.kernel.kmax));
  if (s.kernel.trig()) {
    const double ub = s.kernel.trig()->upper_bound();
    add("kernel.dominating_bound", std::isfinite(ub), ub);
  }
  add("kernel.x_periodic", xper <= 1e-10, xper);
  if (s.kernel.periodic_in_z) add("kernel.z_periodic", zper <= 1e-10, zper);

  // Sampled modulus of continuity in x at h and h/2 (condition on k(·,z)).
  auto modulus = [&](double h) {
    double m = 0.0;
    detail::for_grid(d, 16, [&](const Vec& x) {
      for (std::size_t j = 0; j < zs.size(); j += std::max<std::size_t>(1, zs.size() / 16))
        for (int i = 0; i < d; ++i) m = std::max(m, std::abs(s.kernel(x + unit(i) * h, zs[j]) - s.kernel(x, zs[j])));
    }, 0.21);
    return m;
  };
  const double w1 = modulus(1.0 / 64), w2 = modulus(1.0 / 128);
  add("kernel.x_continuity", std::isfinite(w1) && (w2 <= 0.75 * w1 + 1e-12), w2, "modulus at 1/64: " + std::to_string(w1));

  // Drift: bounded and periodic.
  double bsup = 0.0, bper = 0.0;
  detail::for_grid(d, 16, [&](const Vec& x) {
    const Vec b = s.drift(x);
    bsup = std::max(bsup, norm(b));
    for (int i = 0; i < d; ++i) bper = std::max(bper, norm(s.drift(x + unit(i)) - b));
  }, 0.29);
  add("drift.bounded", std::isfinite(bsup), bsup);
  add("drift.periodic", bper <= 1e-10, bper);

  if (opt.require_positive_kmin) {
    if (!(s.kernel.kmin > 0.0) || !(kmin > 0.0))
      throw ValidationError("kmin must be strictly positive on the well-posedness screening path");
    const bool stable = std::holds_alternative<SmallStable>(s.small);
    add("screen.stable_small_jumps", stable, stable ? 1.0 : 0.0);
  }
  return rep;
}

}  // namespace perhom
