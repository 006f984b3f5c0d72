// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "perhom/quadrature.hpp"
#include "perhom/rng.hpp"
#include "perhom/spec_model.hpp"

namespace perhom {

using Mat3 = Eigen::Matrix3d;

// ---------------------------------------------------------------------------
// Radial sampling

// Draws r from a nonnegative density on (a, b]. Pure powers r^{-1-α} are
// inverted exactly; other densities use a log-spaced CDF table with a
// power-law fit inside each cell.
class RadialSampler {
 public:
  RadialSampler() = default;
  static RadialSampler power(double alpha, double a, double b) {
    RadialSampler s;
    s.a_ = a;
    s.b_ = b;
    s.alpha_ = alpha;
    s.pure_ = true;
    const double ua = std::pow(a, -alpha), ub = std::isinf(b) ? 0.0 : std::pow(b, -alpha);
    s.mass_ = (ua - ub) / alpha;
    return s;
  }
  static RadialSampler tabulated(const std::function<double(double)>& rho, double a, double b,
                                 int cells_per_decade = 48) {
    if (!(b > a && a > 0.0) || std::isinf(b)) throw PreconditionError("tabulated radial range must be finite");
    RadialSampler s;
    s.a_ = a;
    s.b_ = b;
    const int n = std::max(8, static_cast<int>(std::ceil(std::log10(b / a) * cells_per_decade)));
    s.edges_.resize(n + 1);
    for (int i = 0; i <= n; ++i) s.edges_[i] = a * std::pow(b / a, static_cast<double>(i) / n);
    s.edges_[n] = b;
    s.gamma_.resize(n);
    s.cdf_.assign(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
      const double lo = s.edges_[i], hi = s.edges_[i + 1];
      const double dl = rho(lo), dh = rho(hi);
      if (dl < 0.0 || dh < 0.0) throw PreconditionError("radial density is negative; cannot be sampled");
      double m = 0.0;
      for (const auto& g : quad::gauss_legendre(8)) {
        const double r = 0.5 * (lo + hi) + 0.5 * (hi - lo) * g.x;
        const double v = rho(r);
        if (v < 0.0) throw PreconditionError("radial density is negative; cannot be sampled");
        m += 0.5 * (hi - lo) * g.w * v;
      }
      s.gamma_[i] = (dl > 0.0 && dh > 0.0) ? -std::log(dh / dl) / std::log(hi / lo) : 0.0;
      s.cdf_[i + 1] = s.cdf_[i] + m;
    }
    s.mass_ = s.cdf_[n];
    return s;
  }

  double mass() const { return mass_; }
  double lower() const { return a_; }
  double upper() const { return b_; }

  double draw(Rng& rng) const {
    const double u = rng.uniform();
    if (pure_) {
      const double ua = std::pow(a_, -alpha_), ub = std::isinf(b_) ? 0.0 : std::pow(b_, -alpha_);
      return std::pow(ua - u * (ua - ub), -1.0 / alpha_);
    }
    const double target = u * mass_;
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1) - 1;
    const double lo = edges_[i], hi = edges_[i + 1];
    const double frac = (cdf_[i + 1] > cdf_[i]) ? (target - cdf_[i]) / (cdf_[i + 1] - cdf_[i]) : 0.5;
    // Inverse CDF of r^{-γ} on [lo, hi].
    const double g = gamma_[i];
    if (std::abs(g - 1.0) < 1e-9) return lo * std::pow(hi / lo, frac);
    const double e = 1.0 - g;
    const double pl = std::pow(lo, e), ph = std::pow(hi, e);
    return std::pow(pl + frac * (ph - pl), 1.0 / e);
  }

 private:
  double a_ = 1.0, b_ = 2.0, alpha_ = 1.0, mass_ = 0.0;
  bool pure_ = false;
  std::vector<double> edges_, gamma_, cdf_;
};

// ---------------------------------------------------------------------------
// Process model: candidate jumps + thinning + continuous part

struct CandidateSource {
  double mass = 0.0;
  std::function<Vec(Rng&)> draw;
};

// Drift and small-jump covariance as functions of x.
class CoefficientField {
 public:
  // Trigonometric representation: Σ_p Re[e^{i2π⟨p,x⟩}(V_p, M_p)] plus b(x).
  struct Group {
    Freq p{};
    std::complex<double> v[3]{};
    std::complex<double> m[3][3]{};
  };

  int dim = 1;
  std::vector<Group> groups;
  std::shared_ptr<const DriftField> drift;  // b(x); null means zero
  Vec const_drift;                    // extra constant drift
  // Table representation on an n^d grid; used for callback kernels.
  int table_n = 0;
  std::vector<Vec> table_drift;
  std::vector<Mat3> table_cov;

  bool has_cov = false;
  bool drift_zero = false;
  bool x_independent = false;

  Vec drift_at(const Vec& x) const {
    Vec out = const_drift;
    if (drift) out += (*drift)(x);
    if (table_n > 0) return out + table_drift[table_index(x)];
    for (const auto& g : groups) {
      const std::complex<double> e = std::exp(std::complex<double>(0.0, kTwoPi * dot(g.p, x)));
      for (int i = 0; i < dim; ++i) out[i] += (e * g.v[i]).real();
    }
    return out;
  }
  Mat3 cov_at(const Vec& x) const {
    Mat3 c = Mat3::Zero();
    if (!has_cov) return c;
    if (table_n > 0) return table_cov[table_index(x)];
    for (const auto& g : groups) {
      const std::complex<double> e = std::exp(std::complex<double>(0.0, kTwoPi * dot(g.p, x)));
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) c(i, j) += (e * g.m[i][j]).real();
    }
    return c;
  }

 private:
  std::size_t table_index(const Vec& x) const {
    std::size_t idx = 0, stride = 1;
    for (int i = 0; i < dim; ++i) {
      const double u = x[i] - std::floor(x[i]);
      int j = static_cast<int>(u * table_n);
      if (j >= table_n) j = table_n - 1;
      idx += stride * static_cast<std::size_t>(j);
      stride *= static_cast<std::size_t>(table_n);
    }
    return idx;
  }
};

// Symmetric PSD square root (d <= 3).
inline Mat3 psd_sqrt(const Mat3& c, int d) {
  Mat3 out = Mat3::Zero();
  if (d == 1) {
    out(0, 0) = std::sqrt(std::max(0.0, c(0, 0)));
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.topLeftCorner(d, d));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  out.topLeftCorner(d, d) = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return out;
}

struct ProcessModel {
  int dim = 1;
  double kdom = 1.0;  // thinning bound
  std::vector<CandidateSource> sources;
  // Acceptance numerator k(x,z) in [0, kdom]; empty means always accept.
  std::function<double(const Vec&, const Vec&)> kernel;
  CoefficientField coef;
  Mat3 const_sqrt_cov = Mat3::Zero();  // valid when coef.x_independent

  double candidate_mass() const {
    double m = 0.0;
    for (const auto& s : sources) m += s.mass;
    return m;
  }
  double rate() const { return kdom * candidate_mass(); }
  Vec draw_candidate(Rng& rng) const {
    const double tot = candidate_mass();
    double u = rng.uniform() * tot;
    for (const auto& s : sources) {
      if (u < s.mass) return s.draw(rng);
      u -= s.mass;
    }
    return sources.back().draw(rng);
  }
  bool continuous_zero() const { return coef.drift_zero && !coef.has_cov; }
  void finalize() {
    if (coef.x_independent) const_sqrt_cov = psd_sqrt(coef.cov_at(Vec{}), dim);
  }
};

// ---------------------------------------------------------------------------
// Path loop

struct NullObserver {
  void interval(const Vec&, double, double) {}
  void jump(double, const Vec&, const Vec&, bool) {}
};

struct PathRunOptions {
  double dt = 0.01;
  bool fine = false;  // force stepping so that observers see the continuous motion
};

namespace detail {
inline Vec gaussian_vec(Rng& rng, int d) {
  Vec g;
  for (int i = 0; i < d; ++i) g[i] = rng.normal();
  return g;
}
inline Vec mat_vec(const Mat3& m, const Vec& v, int d) {
  Vec o;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) o[i] += m(i, j) * v[j];
  return o;
}
}  // namespace detail

// Runs one path on [0, T] from x and returns X_T (unwrapped).
template <class Obs>
Vec run_path(const ProcessModel& m, Vec x, double T, Rng& rng, Obs& obs, const PathRunOptions& opt) {
  const int d = m.dim;
  const double lam = m.rate();
  double t = 0.0;
  double next = lam > 0.0 ? rng.exponential(lam) : std::numeric_limits<double>::infinity();
  const bool stepping = !m.continuous_zero() && (!m.coef.x_independent || opt.fine);
  auto do_jump = [&] {
    const Vec z = m.draw_candidate(rng);
    bool acc = true;
    if (m.kernel) acc = rng.uniform() * m.kdom <= m.kernel(x, z);
    obs.jump(t, x, z, acc);
    if (acc) x += z;
  };
  if (!stepping) {
    // Continuous part is zero or constant-coefficient: exact between events.
    const bool moving = !m.continuous_zero();
    const Vec b = moving ? m.coef.drift_at(Vec{}) : Vec{};
    for (;;) {
      const double t1 = std::min(next, T);
      const double h = t1 - t;
      if (h > 0.0) {
        obs.interval(x, t, t1);
        if (moving) {
          x += b * h;
          if (m.coef.has_cov) x += detail::mat_vec(m.const_sqrt_cov, detail::gaussian_vec(rng, d), d) * std::sqrt(h);
        }
      }
      t = t1;
      if (next > T) break;
      do_jump();
      next += rng.exponential(lam);
    }
    return x;
  }
  const bool rk4 = !m.coef.has_cov;
  while (t < T) {
    const double t1 = std::min({t + opt.dt, next, T});
    const double h = t1 - t;
    if (h > 0.0) {
      obs.interval(x, t, t1);
      if (rk4) {
        const Vec k1 = m.coef.drift_at(x);
        const Vec k2 = m.coef.drift_at(x + k1 * (0.5 * h));
        const Vec k3 = m.coef.drift_at(x + k2 * (0.5 * h));
        const Vec k4 = m.coef.drift_at(x + k3 * h);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
      } else {
        const Vec b = m.coef.drift_at(x);
        const Mat3 s = m.coef.x_independent ? m.const_sqrt_cov : psd_sqrt(m.coef.cov_at(x), d);
        x += b * h + detail::mat_vec(s, detail::gaussian_vec(rng, d), d) * std::sqrt(h);
      }
    }
    t = t1;
    if (next <= T && t >= next) {
      do_jump();
      next += rng.exponential(lam);
    }
  }
  return x;
}

inline Vec run_path(const ProcessModel& m, const Vec& x, double T, Rng& rng, const PathRunOptions& opt) {
  NullObserver o;
  return run_path(m, x, T, rng, o, opt);
}

// ---------------------------------------------------------------------------
// Model from a jump specification

namespace detail {

// ∫_a^b r^β e^{iωr} dr, β > -1 (integrable endpoint singularity at 0).
inline std::complex<double> power_fourier(double beta, double omega, double a, double b) {
  if (b <= a) return 0.0;
  if (omega == 0.0) {
    if (std::abs(beta + 1.0) < 1e-14) return std::log(b / a);
    return (std::pow(b, beta + 1.0) - std::pow(a, beta + 1.0)) / (beta + 1.0);
  }
  const double periods = std::abs(omega) * (b - a) / kTwoPi;
  const int panels = std::max(1, static_cast<int>(std::ceil(periods)));
  const double h = (b - a) / panels;
  double re = 0.0, im = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h, hi = lo + h;
    re += quad::endpoint_singular([&](double r) { return std::pow(r, beta) * std::cos(omega * r); }, lo, hi, 1e-12);
    im += quad::endpoint_singular([&](double r) { return std::pow(r, beta) * std::sin(omega * r); }, lo, hi, 1e-12);
  }
  return {re, im};
}

// Vector and matrix z-moments of the small-jump part restricted to a band,
// against e^{i2π⟨q,z⟩}: (∫ z e^{..} Π, ∫ z zᵀ e^{..} Π).
struct BandMoments {
  std::complex<double> v[3]{};
  std::complex<double> m[3][3]{};
};

inline BandMoments small_band_moments(const JumpSpec& s, const Freq& q, double a, double b, bool want_vec,
                                      bool want_mat, int angular_res) {
  BandMoments out;
  const int d = s.dim;
  if (const auto* st = std::get_if<SmallStable>(&s.small)) {
    const auto nodes = SphericalMeasure::uniform(sphere_area(d)).nodes(d, angular_res);
    for (const auto& n : nodes) {
      const double om = kTwoPi * dot(q, n.theta);
      if (want_vec) {
        const auto I = power_fourier(-st->alpha0, om, a, b);
        for (int i = 0; i < d; ++i) out.v[i] += n.weight * n.theta[i] * I;
      }
      if (want_mat) {
        const auto I = power_fourier(1.0 - st->alpha0, om, a, b);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) out.m[i][j] += n.weight * n.theta[i] * n.theta[j] * I;
      }
    }
  } else if (const auto* at = std::get_if<SmallAtoms>(&s.small)) {
    for (const auto& n : at->atoms) {
      const double r = norm(n.theta);
      if (!(r > a && r <= b) && !(a == 0.0 && r == 0.0)) continue;
      const auto e = std::exp(std::complex<double>(0.0, kTwoPi * dot(q, n.theta)));
      for (int i = 0; i < d; ++i) {
        if (want_vec) out.v[i] += n.weight * n.theta[i] * e;
        if (want_mat)
          for (int j = 0; j < d; ++j) out.m[i][j] += n.weight * n.theta[i] * n.theta[j] * e;
      }
    }
  }
  return out;
}

// Real-valued band moments of k(x,·) for a callback kernel at one x.
inline void small_band_numeric(const JumpSpec& s, const Vec& x, double delta, Vec& comp, Mat3& cov, int angular_res) {
  const int d = s.dim;
  comp = Vec{};
  cov = Mat3::Zero();
  if (const auto* st = std::get_if<SmallStable>(&s.small)) {
    const auto nodes = SphericalMeasure::uniform(sphere_area(d)).nodes(d, angular_res);
    for (const auto& n : nodes) {
      const double I1 = quad::endpoint_singular(
          [&](double r) { return std::pow(r, -st->alpha0) * s.kernel(x, n.theta * r); }, delta, 1.0, 1e-9);
      const double I2 = quad::endpoint_singular(
          [&](double r) { return std::pow(r, 1.0 - st->alpha0) * s.kernel(x, n.theta * r); }, 0.0, delta, 1e-9);
      comp += n.theta * (-n.weight * I1);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) cov(i, j) += n.weight * n.theta[i] * n.theta[j] * I2;
    }
  } else if (const auto* at = std::get_if<SmallAtoms>(&s.small)) {
    for (const auto& n : at->atoms) {
      const double r = norm(n.theta);
      const double k = s.kernel(x, n.theta);
      if (r > delta) {
        comp += n.theta * (-n.weight * k);
      } else {
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) cov(i, j) += n.weight * k * n.theta[i] * n.theta[j];
      }
    }
  }
}

}  // namespace detail

struct ModelOptions {
  double delta = 0.25;
  double rmax = 1e6;
  int angular_resolution = 64;  // sphere nodes for small-jump moments (d >= 2)
  int table_resolution = 0;     // callback kernels; 0 picks 64/32/16
};

// Builds the simulator model of the process with generator
// ∫(f(x+z)−f(x)−∇f·z 1_{|z|<=1}) k(x,z) Π(dz) + b·∇f.
inline ProcessModel build_process_model(const JumpSpec& s, const ModelOptions& mo) {
  const int d = s.dim;
  const double delta = mo.delta;
  if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("small-jump cutoff δ must lie in (0,1]");
  ProcessModel m;
  m.dim = d;
  m.kdom = s.kernel.dominating_bound();
  const PeriodicKernel kern = s.kernel;
  const bool kconst = s.kernel.trig() && s.kernel.trig()->x_independent() && s.kernel.trig()->z_independent() &&
                      std::abs(s.kernel.trig()->constant_term() - m.kdom) < 1e-15;
  if (!kconst) {
    auto kp = std::make_shared<PeriodicKernel>(s.kernel);
    m.kernel = [kp](const Vec& x, const Vec& z) { return (*kp)(x, z); };
  }

  // Candidate sources.
  if (const auto* st = std::get_if<SmallStable>(&s.small)) {
    if (delta < 1.0) {
      const double a0 = st->alpha0;
      const double ua = std::pow(delta, -a0);
      CandidateSource c;
      c.mass = sphere_area(d) * (ua - 1.0) / a0;
      c.draw = [a0, ua, d](Rng& rng) {
        const double r = std::pow(ua - rng.uniform() * (ua - 1.0), -1.0 / a0);
        return SphericalMeasure::uniform_direction(rng, d) * r;
      };
      m.sources.push_back(c);
    }
  } else if (const auto* at = std::get_if<SmallAtoms>(&s.small)) {
    std::vector<AngularNode> big;
    double tot = 0.0;
    for (const auto& n : at->atoms)
      if (norm(n.theta) > delta) {
        big.push_back(n);
        tot += n.weight;
      }
    if (tot > 0.0) {
      CandidateSource c;
      c.mass = tot;
      c.draw = [big, tot](Rng& rng) {
        double u = rng.uniform() * tot;
        for (const auto& n : big) {
          if (u < n.weight) return n.theta;
          u -= n.weight;
        }
        return big.back().theta;
      };
      m.sources.push_back(c);
    }
  }
  if (s.large) {
    const auto comps = large_components(s);
    for (const auto& comp : comps) {
      double w = 0.0;
      for (const auto& n : comp.nodes) w += n.weight;
      if (w <= 0.0) {
        if (w < 0.0) throw PreconditionError("signed angular measure cannot be simulated");
        continue;
      }
      for (const auto& n : comp.nodes)
        if (n.weight < 0.0) throw PreconditionError("signed angular measure cannot be simulated");
      RadialSampler rs = comp.pure_power ? RadialSampler::power(*comp.pure_power, 1.0, mo.rmax)
                                         : RadialSampler::tabulated(comp.density, 1.0, mo.rmax);
      auto meas = std::make_shared<SphericalMeasure>(*comp.measure);
      CandidateSource c;
      c.mass = w * rs.mass();
      c.draw = [rs, meas, d](Rng& rng) {
        const double r = rs.draw(rng);
        return meas->sample(rng, d) * r;
      };
      m.sources.push_back(c);
    }
  }

  // Continuous part: b(x) − ∫_{δ<|z|<=1} z k Π  and  Σ = ∫_{|z|<=δ} z zᵀ k Π.
  CoefficientField& cf = m.coef;
  cf.dim = d;
  if (!s.drift.is_zero()) cf.drift = std::make_shared<const DriftField>(s.drift);
  const bool small_any = !std::holds_alternative<SmallZero>(s.small);
  bool cov_any = false;
  if (const auto* st = std::get_if<SmallStable>(&s.small)) {
    (void)st;
    cov_any = true;
  } else if (const auto* at = std::get_if<SmallAtoms>(&s.small)) {
    for (const auto& n : at->atoms)
      if (norm(n.theta) <= delta) cov_any = true;
  }
  cf.has_cov = cov_any;
  bool comp_zero = true;
  if (small_any) {
    if (const TrigPoly* kt = s.kernel.trig()) {
      std::map<Freq, CoefficientField::Group> acc;
      std::map<Freq, detail::BandMoments> vcache, mcache;
      for (const auto& t : kt->terms()) {
        auto vit = vcache.find(t.q);
        if (vit == vcache.end())
          vit = vcache.emplace(t.q, detail::small_band_moments(s, t.q, delta, 1.0, true, false, mo.angular_resolution))
                    .first;
        const auto& vb = vit->second;
        auto mit = mcache.find(t.q);
        if (mit == mcache.end())
          mit = mcache.emplace(t.q, detail::small_band_moments(s, t.q, 0.0, delta, false, true, mo.angular_resolution))
                    .first;
        auto& g = acc[t.p];
        g.p = t.p;
        const std::complex<double> c(t.a, -t.b);
        for (int i = 0; i < d; ++i) {
          g.v[i] -= c * vb.v[i];
          for (int j = 0; j < d; ++j) g.m[i][j] += c * mit->second.m[i][j];
        }
      }
      for (auto& [p, g] : acc) {
        for (int i = 0; i < d; ++i)
          if (std::abs(g.v[i]) > 1e-15) comp_zero = false;
        cf.groups.push_back(g);
      }
    } else {
      const int n = mo.table_resolution > 0 ? mo.table_resolution : (d == 1 ? 64 : (d == 2 ? 32 : 16));
      cf.table_n = n;
      std::size_t cells = 1;
      for (int i = 0; i < d; ++i) cells *= static_cast<std::size_t>(n);
      cf.table_drift.resize(cells);
      cf.table_cov.resize(cells);
      for (std::size_t c = 0; c < cells; ++c) {
        Vec x;
        std::size_t r = c;
        for (int i = 0; i < d; ++i) {
          x[i] = (static_cast<double>(r % n) + 0.5) / n;
          r /= n;
        }
        detail::small_band_numeric(s, x, delta, cf.table_drift[c], cf.table_cov[c], mo.angular_resolution);
        if (norm(cf.table_drift[c]) > 1e-15) comp_zero = false;
      }
    }
  }
  cf.drift_zero = s.drift.is_zero() && comp_zero;
  cf.x_independent = s.coefficients_x_independent() && cf.table_n == 0;
  m.finalize();
  return m;
}

}  // namespace perhom
