// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <boost/rational.hpp>

#include "perhom/quadrature.hpp"
#include "perhom/spec_model.hpp"
#include "perhom/torus.hpp"

namespace perhom {

// ---------------------------------------------------------------------------
// Cesàro and Fourier directional means

// (1/T)∫_0^T k(x, rθ) dr by the composite trapezoid rule on n nodes.
inline double cesaro_average(const PeriodicKernel& k, const Vec& x, const Vec& theta, double T, int n) {
  if (!(T >= 1.0)) throw PreconditionError("Cesaro horizon must be >= 1");
  if (n < 2) throw PreconditionError("Cesaro average needs at least two nodes");
  const double h = T / (n - 1);
  double s = 0.5 * (k(x, Vec{}) + k(x, theta * T));
  for (int i = 1; i < n - 1; ++i) s += k(x, theta * (i * h));
  return s * h / T;
}

// Node count resolving the highest z-mode with ~40 points per period.
inline int cesaro_nodes(const PeriodicKernel& k, double T) {
  const int order = k.trig() ? std::max(1, k.trig()->max_z_order()) : 8;
  const double per_unit = 40.0 * order * std::sqrt(3.0);
  return static_cast<int>(std::min(5e7, std::max(1000.0, per_unit * T)));
}

inline double cesaro_average(const PeriodicKernel& k, const Vec& x, const Vec& theta, double T) {
  return cesaro_average(k, x, theta, T, cesaro_nodes(k, T));
}

inline constexpr double kOrthogonalityTol = 1e-12;

// lim (1/T)∫_0^T f(tθ) dt = Σ_{⟨m,θ⟩=0} c_m. x-modes are evaluated at x.
inline double fourier_mean(const TrigPoly& f, const Vec& theta, const Vec& x = Vec{}) {
  return f.directional_mean(x, theta, kOrthogonalityTol);
}

// ---------------------------------------------------------------------------
// Directions with exact coordinates in Q(√s₁, √s₂, ...)

using Rational = boost::rational<long long>;
// Σ_s c_s √s over squarefree s >= 1.
using SurdSum = std::map<long long, Rational>;

inline bool is_squarefree(long long s) {
  if (s < 1) return false;
  for (long long p = 2; p * p <= s; ++p)
    if (s % (p * p) == 0) return false;
  return true;
}

inline SurdSum surd(Rational c, long long s = 1) {
  if (!is_squarefree(s)) throw PreconditionError("surd radicand must be squarefree");
  SurdSum out;
  if (c.numerator() != 0) out[s] = c;
  return out;
}
inline SurdSum operator+(SurdSum a, const SurdSum& b) {
  for (const auto& [s, c] : b) {
    a[s] += c;
    if (a[s].numerator() == 0) a.erase(s);
  }
  return a;
}

// A direction given by exact coordinates; it need not be normalized, since
// orthogonality to integer vectors is scale invariant.
struct SymbolicDirection {
  std::vector<SurdSum> coords;

  int dim() const { return static_cast<int>(coords.size()); }
  Vec numeric() const {
    Vec v;
    for (int i = 0; i < dim(); ++i)
      for (const auto& [s, c] : coords[i])
        v[i] += boost::rational_cast<double>(c) * std::sqrt(static_cast<double>(s));
    const double n = norm(v);
    if (n == 0.0) throw PreconditionError("zero direction");
    return v * (1.0 / n);
  }
  // ⟨m,θ⟩ = 0 exactly: the surds √s are linearly independent over Q, so every
  // radicand's rational coefficient must vanish.
  bool orthogonal_to(const Freq& m) const {
    std::map<long long, Rational> acc;
    for (int i = 0; i < dim(); ++i)
      for (const auto& [s, c] : coords[i]) acc[s] += c * Rational(m[i]);
    for (const auto& [s, c] : acc)
      if (c.numerator() != 0) return false;
    return true;
  }
};

inline double fourier_mean(const TrigPoly& f, const SymbolicDirection& theta, const Vec& x = Vec{}) {
  return f.mean_over(x, [&](const Freq& q) { return theta.orthogonal_to(q); });
}

struct RationalityVerdict {
  enum class Kind { Independent, Dependent, Undecided };
  Kind kind = Kind::Undecided;
  Freq witness{};  // set when Dependent
  int bound = 0;   // search bound when Undecided

  bool independent() const { return kind == Kind::Independent; }
  bool dependent() const { return kind == Kind::Dependent; }
};

inline std::string to_string(RationalityVerdict::Kind k) {
  switch (k) {
    case RationalityVerdict::Kind::Independent: return "independent";
    case RationalityVerdict::Kind::Dependent: return "dependent";
    case RationalityVerdict::Kind::Undecided: return "undecided";
  }
  return "?";
}

namespace detail {
inline Freq canonical_sign(Freq m) {
  for (int i = 0; i < kMaxDim; ++i) {
    if (m[i] != 0) {
      if (m[i] < 0) m = -m;
      break;
    }
  }
  return m;
}
inline bool witness_less(const Freq& a, const Freq& b) {
  const int ia = fnorm_inf(a), ib = fnorm_inf(b);
  if (ia != ib) return ia < ib;
  const double na = fnorm(a), nb = fnorm(b);
  if (na != nb) return na < nb;
  return a > b;
}
}  // namespace detail

// Floating directions: exhaustive search over 0 < |m|_∞ <= M. Never returns
// Independent, since a finite search cannot certify it.
inline RationalityVerdict rationality(const Vec& theta, int d, int M, double tol = 1e-10) {
  check_dim(d);
  RationalityVerdict v;
  v.bound = M;
  bool found = false;
  Freq best{};
  const int side = 2 * M + 1;
  long long total = 1;
  for (int i = 0; i < d; ++i) total *= side;
  for (long long idx = 0; idx < total; ++idx) {
    Freq m{};
    long long r = idx;
    for (int i = 0; i < d; ++i) {
      m[i] = static_cast<int>(r % side) - M;
      r /= side;
    }
    if (is_zero(m)) continue;
    if (std::abs(dot(m, theta)) <= tol * fnorm(m)) {
      const Freq c = detail::canonical_sign(m);
      if (!found || detail::witness_less(c, best)) best = c;
      found = true;
    }
  }
  if (found) {
    v.kind = RationalityVerdict::Kind::Dependent;
    v.witness = best;
  }
  return v;
}

// Exact directions: rank of the rational coefficient matrix decides.
inline RationalityVerdict rationality(const SymbolicDirection& theta) {
  const int d = theta.dim();
  check_dim(d);
  std::map<long long, int> row_of;
  std::vector<std::vector<Rational>> rows;
  for (int i = 0; i < d; ++i) {
    for (const auto& [s, c] : theta.coords[i]) {
      auto it = row_of.find(s);
      if (it == row_of.end()) {
        it = row_of.emplace(s, static_cast<int>(rows.size())).first;
        rows.emplace_back(d, Rational(0));
      }
      rows[it->second][i] += c;
    }
  }
  // Reduced row echelon form.
  std::vector<int> pivot_col;
  int r = 0;
  for (int c = 0; c < d && r < static_cast<int>(rows.size()); ++c) {
    int piv = -1;
    for (int i = r; i < static_cast<int>(rows.size()); ++i)
      if (rows[i][c].numerator() != 0) {
        piv = i;
        break;
      }
    if (piv < 0) continue;
    std::swap(rows[r], rows[piv]);
    const Rational inv = Rational(1) / rows[r][c];
    for (auto& e : rows[r]) e *= inv;
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
      if (i == r || rows[i][c].numerator() == 0) continue;
      const Rational f = rows[i][c];
      for (int j = 0; j < d; ++j) rows[i][j] -= f * rows[r][j];
    }
    pivot_col.push_back(c);
    ++r;
  }
  RationalityVerdict v;
  if (r == d) {
    v.kind = RationalityVerdict::Kind::Independent;
    return v;
  }
  // Null vector: first free column set to 1.
  int free_col = 0;
  while (std::find(pivot_col.begin(), pivot_col.end(), free_col) != pivot_col.end()) ++free_col;
  std::vector<Rational> nv(d, Rational(0));
  nv[free_col] = 1;
  for (int k = 0; k < r; ++k) nv[pivot_col[k]] = -rows[k][free_col];
  long long l = 1;
  for (const auto& e : nv) l = std::lcm(l, e.denominator());
  long long g = 0;
  Freq m{};
  for (int i = 0; i < d; ++i) {
    const Rational e = nv[i] * Rational(l);
    m[i] = static_cast<int>(e.numerator());
    g = std::gcd(g, std::abs(e.numerator()));
  }
  for (int i = 0; i < d; ++i) m[i] /= static_cast<int>(g);
  v.kind = RationalityVerdict::Kind::Dependent;
  v.witness = detail::canonical_sign(m);
  return v;
}

// ---------------------------------------------------------------------------
// k̄(x,θ) and k̄₀(θ)

class DirectionalAverage {
 public:
  enum class Provenance { Cesaro, FourierExact };

  explicit DirectionalAverage(const PeriodicKernel& k, double cesaro_horizon = 1e4)
      : k_(&k), T_(cesaro_horizon) {
    prov_ = k.trig() ? Provenance::FourierExact : Provenance::Cesaro;
  }
  Provenance provenance() const { return prov_; }
  double horizon() const { return T_; }

  double operator()(const Vec& x, const Vec& theta) const {
    if (const TrigPoly* t = k_->trig()) return fourier_mean(*t, theta, x);
    if (k_->z_independent()) return (*k_)(x, Vec{});
    return cesaro_average(*k_, x, theta, T_);
  }
  double operator()(const Vec& x, const SymbolicDirection& theta) const {
    if (const TrigPoly* t = k_->trig()) return fourier_mean(*t, theta, x);
    return (*this)(x, theta.numeric());
  }

 private:
  const PeriodicKernel* k_;
  double T_;
  Provenance prov_;
};

// k̄₀(θ) = Σ_cells μ(cell)·k̄(x_cell, θ).
template <class Direction>
double effective_directional_kernel(const PeriodicKernel& k, const TorusMeasure& mu, const Direction& theta,
                                    double cesaro_horizon = 1e4) {
  const DirectionalAverage kbar(k, cesaro_horizon);
  if (k.x_independent()) return kbar(Vec{}, theta);
  return mu.average([&](const Vec& x) { return kbar(x, theta); });
}

// k̄₀ on the angular nodes of ϱ₀ (atoms are exact).
struct EffectiveKernelTable {
  int dim = 1;
  std::vector<AngularNode> nodes;  // ϱ₀ weights
  std::vector<double> kbar0;

  double at(const Vec& theta) const {
    std::size_t best = 0;
    double bd = -2.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double c = dot(nodes[i].theta, theta);
      if (c > bd) {
        bd = c;
        best = i;
      }
    }
    return kbar0.empty() ? 0.0 : kbar0[best];
  }
  // ∫ k̄₀ dϱ₀ / ϱ₀(S): the ϱ₀-weighted mean.
  double weighted_mean() const {
    double s = 0.0, w = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      s += nodes[i].weight * kbar0[i];
      w += nodes[i].weight;
    }
    return w > 0.0 ? s / w : 0.0;
  }
  void write_csv(std::ostream& os) const {
    os.precision(17);
    for (int i = 0; i < dim; ++i) os << "theta" << i + 1 << ',';
    os << "rho0_weight,kbar0\n";
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      for (int i = 0; i < dim; ++i) os << nodes[n].theta[i] << ',';
      os << nodes[n].weight << ',' << kbar0[n] << '\n';
    }
  }
};

inline EffectiveKernelTable effective_kernel_table(const JumpSpec& s, const TorusMeasure& mu, int resolution = 0,
                                                   int workers = 1) {
  if (!s.large) throw PreconditionError("no large-jump part: k̄₀ undefined");
  EffectiveKernelTable t;
  t.dim = s.dim;
  t.nodes = s.large->rho0.nodes(s.dim, resolution);
  t.kbar0.assign(t.nodes.size(), 0.0);
  parallel_for(t.nodes.size(), workers,
               [&](std::size_t i) { t.kbar0[i] = effective_directional_kernel(s.kernel, mu, t.nodes[i].theta); });
  return t;
}

// ---------------------------------------------------------------------------
// Averaging hypothesis:
// sup_x |∫_{r<=|z|<=R} f(x,z)(k(x/ε,z/ε) − k̄(x/ε,z)) Π₀(dz)| → 0.

struct GaussianBump {
  Vec center;
  double width = 1.0;
  double operator()(const Vec& z, int d) const {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += (z[i] - center[i]) * (z[i] - center[i]);
    return std::exp(-0.5 * s / (width * width));
  }
};

// f(x,z) = fx(x)·fz(z) with fx an x-only trigonometric polynomial.
struct HypothesisTestFunction {
  std::string name;
  TrigPoly fx;
  std::variant<GaussianBump, TrigPoly> fz;

  double eval_z(const Vec& z, int d) const {
    if (const auto* g = std::get_if<GaussianBump>(&fz)) return (*g)(z, d);
    return std::get<TrigPoly>(fz).eval(Vec{}, z);
  }
  int z_order() const {
    if (const auto* t = std::get_if<TrigPoly>(&fz)) return t->max_z_order();
    return 0;
  }
};

// Tensor Gaussians and trigonometric polynomials in z, constants and
// trigonometric polynomials in x.
inline std::vector<HypothesisTestFunction> default_test_family(int d) {
  check_dim(d);
  Freq e1{1, 0, 0};
  Freq diag{1, d > 1 ? 1 : 0, 0};
  std::vector<HypothesisTestFunction> fam;
  fam.push_back({"const*gauss(0,1)", TrigPoly::constant(d, 1.0), GaussianBump{Vec{}, 1.0}});
  fam.push_back({"cos(x1)*gauss(e1,0.5)", TrigPoly::cos_x(d, e1), GaussianBump{unit(0), 0.5}});
  fam.push_back({"const*cos(z1)", TrigPoly::constant(d, 1.0), TrigPoly::cos_z(d, e1)});
  fam.push_back({"sin(x1+x2)*(1+cos(z1+z2))", TrigPoly::sin_x(d, diag),
                 TrigPoly::constant(d, 1.0) + TrigPoly::cos_z(d, diag)});
  return fam;
}

struct AveragingOptions {
  double r = 0.5;
  double R = 4.0;
  std::vector<double> eps_ladder{0.25, 1.0 / 16, 1.0 / 64, 1.0 / 256};
  int x_grid = 0;               // points per axis; 0 picks 16/8/4 for d=1/2/3
  int angular_resolution = 0;   // ϱ₀ node count; 0 uses the measure default
  double threshold_factor = 0.05;  // final discrepancy <= factor·kmax
  // Replaces k̄ in the discrepancy (negative controls).
  std::function<double(const Vec& y, const Vec& theta)> kbar_override;
  bool force_generic = false;  // skip the Fourier route for TrigPoly kernels
  int workers = 1;
};

struct AveragingRow {
  double eps = 0.0;
  double discrepancy = 0.0;
  std::string worst_function;
};

struct AveragingReport {
  std::vector<AveragingRow> rows;
  double threshold = 0.0;
  bool decays = false;
  std::string detail;

  void write_csv(std::ostream& os) const {
    os.precision(17);
    os << "eps,discrepancy,worst_function\n";
    for (const auto& r : rows) os << r.eps << ',' << r.discrepancy << ',' << r.worst_function << '\n';
  }
};

namespace detail {

// Composite GL nodes on [r,R] resolving frequency w_max (rad per unit).
inline std::vector<quad::Node> ray_nodes(double r, double R, double w_max) {
  const double periods = w_max * (R - r) / kTwoPi;
  const int panels = std::max(8, static_cast<int>(std::ceil(2.0 * periods)) + 8);
  return quad::composite_gl(r, R, panels, 8);
}

inline std::vector<Vec> x_grid_points(int d, int n) {
  std::vector<Vec> pts;
  for_grid(d, n, [&](const Vec& x) { pts.push_back(x); }, 0.5);
  return pts;
}

}  // namespace detail

// Discrepancy for one test function at one ε. TrigPoly kernels use the
// per-mode ray transforms; other kernels use direct quadrature on the ray.
inline double averaging_discrepancy(const JumpSpec& s, const HypothesisTestFunction& f, double eps,
                                    const AveragingOptions& opt) {
  const LimitMeasure P0 = pi0(s);
  const int d = s.dim;
  const double alpha = P0.alpha();
  const std::vector<AngularNode> nodes =
      opt.angular_resolution > 0 ? s.large->rho0.nodes(d, opt.angular_resolution) : P0.nodes();
  const int nx = opt.x_grid > 0 ? opt.x_grid : (d == 1 ? 16 : (d == 2 ? 8 : 4));
  const std::vector<Vec> xs = detail::x_grid_points(d, nx);
  const DirectionalAverage kbar(s.kernel);
  const double fz_w = kTwoPi * std::sqrt(3.0) * f.z_order();
  auto G = [&](double rho, const Vec& th) { return f.eval_z(th * rho, d) * std::pow(rho, -1.0 - alpha); };

  std::vector<double> val(xs.size(), 0.0);
  const TrigPoly* kt = s.kernel.trig();
  if (kt && !opt.force_generic) {
    const auto& terms = kt->terms();
    // S_j = Σ_{θ: ⟨q_j,θ⟩≠0} w ∫ G(ρ,θ) e^{iω_jρ} dρ with ω_j = 2π⟨q_j,θ⟩/ε.
    std::vector<cplx> S(terms.size(), 0.0);
    std::vector<double> M(nodes.size(), 0.0);
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const Vec& th = nodes[n].theta;
      double wmax = fz_w;
      for (const auto& t : terms) wmax = std::max(wmax, fz_w + kTwoPi * std::abs(dot(t.q, th)) / eps);
      const auto gl = detail::ray_nodes(opt.r, opt.R, wmax);
      std::vector<double> g(gl.size());
      for (std::size_t i = 0; i < gl.size(); ++i) {
        g[i] = G(gl[i].x, th) * gl[i].w;
        M[n] += g[i];
      }
      for (std::size_t j = 0; j < terms.size(); ++j) {
        if (std::abs(dot(terms[j].q, th)) <= kOrthogonalityTol * fnorm(terms[j].q)) continue;
        const double om = kTwoPi * dot(terms[j].q, th) / eps;
        cplx F = 0.0;
        for (std::size_t i = 0; i < gl.size(); ++i) F += g[i] * std::exp(cplx(0.0, om * gl[i].x));
        S[j] += nodes[n].weight * F;
      }
    }
    for (std::size_t ix = 0; ix < xs.size(); ++ix) {
      const Vec y = xs[ix] * (1.0 / eps);
      double v = 0.0;
      for (std::size_t j = 0; j < terms.size(); ++j) {
        if (S[j] == cplx(0.0)) continue;
        const double A = kTwoPi * dot(terms[j].p, y);
        v += (cplx(terms[j].a, -terms[j].b) * std::exp(cplx(0.0, A)) * S[j]).real();
      }
      if (opt.kbar_override) {
        for (std::size_t n = 0; n < nodes.size(); ++n) {
          const Vec& th = nodes[n].theta;
          v += nodes[n].weight * M[n] * (kbar(y, th) - opt.kbar_override(y, th));
        }
      }
      val[ix] = f.fx.eval_x(xs[ix]) * v;
    }
  } else {
    const double wk = kTwoPi * std::sqrt(3.0) * (kt ? kt->max_z_order() : 8) / eps;
    parallel_for(xs.size(), opt.workers, [&](std::size_t ix) {
      const Vec y = xs[ix] * (1.0 / eps);
      double v = 0.0;
      for (const auto& nd : nodes) {
        const auto gl = detail::ray_nodes(opt.r, opt.R, fz_w + wk);
        const double kb = opt.kbar_override ? opt.kbar_override(y, nd.theta) : kbar(y, nd.theta);
        double acc = 0.0;
        for (const auto& q : gl) acc += q.w * G(q.x, nd.theta) * (s.kernel(y, nd.theta * (q.x / eps)) - kb);
        v += nd.weight * acc;
      }
      val[ix] = f.fx.eval_x(xs[ix]) * v;
    });
  }
  double sup = 0.0;
  for (double v : val) sup = std::max(sup, std::abs(v));
  return sup;
}

inline AveragingReport check_averaging_hypothesis(const JumpSpec& s, const std::vector<HypothesisTestFunction>& family,
                                                  const AveragingOptions& opt = {}) {
  if (!(opt.r > 0.0 && opt.R > opt.r)) throw PreconditionError("need 0 < r < R");
  AveragingReport rep;
  rep.threshold = opt.threshold_factor * s.kernel.kmax;
  std::vector<double> ladder = opt.eps_ladder;
  std::sort(ladder.begin(), ladder.end(), std::greater<>());
  for (double eps : ladder) {
    AveragingRow row{eps, 0.0, ""};
    for (const auto& f : family) {
      const double v = averaging_discrepancy(s, f, eps, opt);
      if (v > row.discrepancy || row.worst_function.empty()) {
        row.discrepancy = std::max(row.discrepancy, v);
        row.worst_function = f.name;
      }
    }
    rep.rows.push_back(row);
  }
  if (rep.rows.empty()) throw PreconditionError("empty ε ladder");
  const double first = rep.rows.front().discrepancy, last = rep.rows.back().discrepancy;
  const bool small = last <= rep.threshold;
  const bool shrinking = first <= 1e-14 || rep.rows.size() == 1 || last <= 0.5 * first;
  rep.decays = small && shrinking;
  rep.detail = rep.decays ? "discrepancy decays" : (small ? "discrepancy small but not shrinking" : "non-decay flagged");
  return rep;
}

}  // namespace perhom
