// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "perhom/engine.hpp"
#include "perhom/ergodic.hpp"
#include "perhom/pathsim.hpp"
#include "perhom/regime.hpp"
#include "perhom/stats.hpp"
#include "perhom/symbol.hpp"
#include "perhom/torus.hpp"

namespace perhom {

struct CorrectorOptions {
  int n = 0;                    // grid cells per axis; 0: 128 (d=1), 64 (d=2)
  double rcut = 0.0;            // explicit large-jump radius; 0: 32 (d=1), 8 (d=2)
  int angular_resolution = 64;  // sphere nodes for d = 2
  int workers = 1;
  int fourier_modes = 0;        // K, modes |n_i| <= K; 0: min(n/2 − 1, 32) for d=1, 12 for d=2
  // Feynman–Kac
  double lambda1 = 0.0;  // 0: estimated
  int fk_paths = 2000;
  std::uint64_t seed = 1;
  double delta = 0.25;
  double dt = 0.0;
  // Subtract the solver's own μ-mean from each right-hand side before solving.
  bool center_rhs = false;
};

enum class CorrectorMethod { Grid, Fourier, FeynmanKac };

inline CorrectorMethod corrector_method_from_string(const std::string& s) {
  if (s == "grid") return CorrectorMethod::Grid;
  if (s == "fourier") return CorrectorMethod::Fourier;
  if (s == "feynman_kac") return CorrectorMethod::FeynmanKac;
  throw PreconditionError("unknown corrector method '" + s + "'");
}

inline std::string to_string(CorrectorMethod m) {
  switch (m) {
    case CorrectorMethod::Grid: return "grid";
    case CorrectorMethod::Fourier: return "fourier";
    default: return "feynman_kac";
  }
}

inline int default_corrector_grid(int d) { return d == 1 ? 128 : 64; }

// Periodic grid of cell centers x_j = (j + 1/2)/n, first axis fastest.
struct TorusGrid {
  int dim = 1;
  int n = 1;

  std::size_t size() const {
    std::size_t c = 1;
    for (int i = 0; i < dim; ++i) c *= static_cast<std::size_t>(n);
    return c;
  }
  double h() const { return 1.0 / n; }
  Vec center(std::size_t idx) const {
    Vec x;
    for (int i = 0; i < dim; ++i) {
      x[i] = (static_cast<double>(idx % n) + 0.5) / n;
      idx /= n;
    }
    return x;
  }
  std::size_t shift(std::size_t idx, int axis, int by) const {
    std::size_t stride = 1;
    for (int i = 0; i < axis; ++i) stride *= static_cast<std::size_t>(n);
    const int j = static_cast<int>((idx / stride) % n);
    const int k = ((j + by) % n + n) % n;
    return idx + (static_cast<std::size_t>(k) - static_cast<std::size_t>(j)) * stride;
  }
  // Multilinear periodic interpolation stencil at y: up to 2^d (index, weight).
  template <class F>
  void stencil(const Vec& y, F&& emit) const {
    int j0[kMaxDim] = {0, 0, 0};
    double s[kMaxDim] = {0, 0, 0};
    for (int i = 0; i < dim; ++i) {
      const double u = y[i] * n - 0.5;
      const double fl = std::floor(u);
      s[i] = u - fl;
      j0[i] = static_cast<int>(((static_cast<long long>(fl) % n) + n) % n);
    }
    for (int corner = 0; corner < (1 << dim); ++corner) {
      std::size_t idx = 0, stride = 1;
      double w = 1.0;
      for (int i = 0; i < dim; ++i) {
        const int bit = (corner >> i) & 1;
        const int j = (j0[i] + bit) % n;
        w *= bit ? s[i] : 1.0 - s[i];
        idx += stride * static_cast<std::size_t>(j);
        stride *= static_cast<std::size_t>(n);
      }
      if (w != 0.0) emit(idx, w);
    }
  }
  double interp(const std::vector<double>& f, const Vec& y) const {
    double v = 0.0;
    stencil(y, [&](std::size_t i, double w) { v += w * f[i]; });
    return v;
  }
  template <class G>
  std::vector<double> sample(G&& g) const {
    std::vector<double> v(size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = g(center(i));
    return v;
  }
};

// ---------------------------------------------------------------------------
// Operator assembly

struct GridOperator {
  TorusGrid grid;
  Eigen::MatrixXd M;  // (Lf)(x_i) ≈ Σ_j M_ij f(x_j)
  double rcut = 0.0;
};

namespace detail {

struct QuadNode {
  Vec z;
  double w;  // measure weight (without k)
};

// Radial × angular nodes for the small stable part on (a, 1], panel width `pw`.
inline std::vector<QuadNode> small_stable_nodes(int d, double alpha0, double a, double pw, int angular_res) {
  std::vector<QuadNode> out;
  const auto ang = SphericalMeasure::uniform(sphere_area(d)).nodes(d, angular_res);
  const int panels = std::max(1, static_cast<int>(std::ceil((1.0 - a) / pw - 1e-9)));
  const auto rn = quad::composite_gl(a, 1.0, panels, 4);
  for (const auto& t : ang)
    for (const auto& r : rn) out.push_back({t.theta * r.x, t.weight * r.w * std::pow(r.x, -1.0 - alpha0)});
  return out;
}

// Large-part nodes on (1, rcut] plus one unit-length line sample beyond rcut
// carrying the tail mass.
inline std::vector<QuadNode> large_nodes(const JumpSpec& s, double rcut, double pw, int line_samples,
                                         int angular_res) {
  std::vector<QuadNode> out;
  for (const auto& c : large_components(s, angular_res)) {
    const int panels = std::max(1, static_cast<int>(std::ceil((rcut - 1.0) / pw - 1e-9)));
    const auto rn = quad::composite_gl(1.0, rcut, panels, 4);
    const double tail = radial_integral(c, 0.0, rcut, std::numeric_limits<double>::infinity());
    for (const auto& t : c.nodes) {
      for (const auto& r : rn) out.push_back({t.theta * r.x, t.weight * r.w * c.density(r.x)});
      for (int j = 0; j < line_samples; ++j)
        out.push_back({t.theta * (rcut + (j + 0.5) / line_samples), t.weight * tail / line_samples});
    }
  }
  return out;
}

}  // namespace detail

inline double default_rcut(int d) { return d == 1 ? 32.0 : 8.0; }

// Dense discretization of
// Lf(x) = ∫(f(x+z) − f(x) − ∇f·z 1_{|z|<=1}) k(x,z) Π(dz) + b(x)·∇f(x)
// on the n^d cell-center grid.
inline GridOperator assemble_operator(const JumpSpec& s, const CorrectorOptions& o) {
  const int d = s.dim;
  if (d > 2) throw PreconditionError("grid corrector supports d <= 2; use the feynman_kac method");
  const int n = o.n > 0 ? o.n : default_corrector_grid(d);
  if ((d == 1 && n > 128) || (d == 2 && n > 64)) throw PreconditionError("grid too fine for a dense operator");
  GridOperator op;
  op.grid = TorusGrid{d, n};
  const TorusGrid& g = op.grid;
  const double h = g.h();
  op.rcut = o.rcut > 0.0 ? o.rcut : default_rcut(d);
  const std::size_t N = g.size();
  op.M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));

  std::vector<detail::QuadNode> small;
  double taylor_iso = 0.0;  // ∫_{|z|<=h} z_i² Π(dz)
  if (const auto* st = std::get_if<SmallStable>(&s.small)) {
    small = detail::small_stable_nodes(d, st->alpha0, h, h, o.angular_resolution);
    taylor_iso = sphere_area(d) / d * std::pow(h, 2.0 - st->alpha0) / (2.0 - st->alpha0);
  }
  std::vector<AngularNode> atoms;
  if (const auto* at = std::get_if<SmallAtoms>(&s.small)) atoms = at->atoms;
  const auto large = detail::large_nodes(s, op.rcut, d == 1 ? h : 2.0 * h, n, o.angular_resolution);

  parallel_for(N, o.workers, [&](std::size_t i) {
    const Vec x = g.center(i);
    std::vector<double> row(N, 0.0);
    double diag = 0.0;
    Vec grad;                   // coefficient of ∇f(x)
    Mat3 hess = Mat3::Zero();   // coefficient of ∇²f(x) (contracted)
    auto jump = [&](const Vec& z, double w) {
      g.stencil(x + z, [&](std::size_t j, double a) { row[j] += w * a; });
      diag -= w;
    };
    if (taylor_iso > 0.0) {
      const double k0 = s.kernel(x, Vec{});
      for (int a = 0; a < d; ++a) hess(a, a) += 0.5 * k0 * taylor_iso;
    }
    for (const auto& q : small) {
      const double w = q.w * s.kernel(x, q.z);
      jump(q.z, w);
      grad -= q.z * w;
    }
    for (const auto& a : atoms) {
      const double w = a.weight * s.kernel(x, a.theta);
      if (norm(a.theta) >= h) {
        jump(a.theta, w);
        grad -= a.theta * w;
      } else {
        for (int p = 0; p < d; ++p)
          for (int q = 0; q < d; ++q) hess(p, q) += 0.5 * w * a.theta[p] * a.theta[q];
      }
    }
    for (const auto& q : large) jump(q.z, q.w * s.kernel(x, q.z));
    // Compensator: central differences.
    for (int a = 0; a < d; ++a) {
      row[g.shift(i, a, 1)] += grad[a] / (2.0 * h);
      row[g.shift(i, a, -1)] -= grad[a] / (2.0 * h);
    }
    // Second-order Taylor part.
    for (int a = 0; a < d; ++a) {
      const double c = hess(a, a) / (h * h);
      row[g.shift(i, a, 1)] += c;
      row[g.shift(i, a, -1)] += c;
      diag -= 2.0 * c;
      for (int b = a + 1; b < d; ++b) {
        const double m = (hess(a, b) + hess(b, a)) / (4.0 * h * h);
        if (m == 0.0) continue;
        row[g.shift(g.shift(i, a, 1), b, 1)] += m;
        row[g.shift(g.shift(i, a, -1), b, -1)] += m;
        row[g.shift(g.shift(i, a, 1), b, -1)] -= m;
        row[g.shift(g.shift(i, a, -1), b, 1)] -= m;
      }
    }
    // Drift: upwind.
    if (!s.drift.is_zero()) {
      const Vec b = s.drift(x);
      for (int a = 0; a < d; ++a) {
        if (b[a] > 0.0) {
          row[g.shift(i, a, 1)] += b[a] / h;
          diag -= b[a] / h;
        } else if (b[a] < 0.0) {
          row[g.shift(i, a, -1)] -= b[a] / h;
          diag += b[a] / h;
        }
      }
    }
    row[i] += diag;
    for (std::size_t j = 0; j < N; ++j) op.M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  });
  return op;
}

// ---------------------------------------------------------------------------
// Solver: one LU of the bordered matrix [[M, 1], [1ᵀ, 0]] yields both the left
// null vector μ (via the transpose) and zero-mean solutions of Mψ = f.

class GridPoissonSolver {
 public:
  explicit GridPoissonSolver(const GridOperator& op) : grid_(op.grid), M_(op.M) {
    const Eigen::Index N = op.M.rows();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(N + 1, N + 1);
    B.topLeftCorner(N, N) = op.M;
    B.col(N).head(N).setOnes();
    B.row(N).head(N).setOnes();
    lu_.compute(B);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + 1);
    rhs(N) = 1.0;
    const Eigen::VectorXd sol = lu_.transpose().solve(rhs);
    mu_.assign(sol.data(), sol.data() + N);
    for (double v : mu_) min_mu_ = std::min(min_mu_, v);
  }

  const TorusGrid& grid() const { return grid_; }
  const std::vector<double>& invariant_weights() const { return mu_; }
  double min_weight() const { return min_mu_; }
  // Negative entries (possible for non-Metzler discretizations) are clipped.
  TorusMeasure invariant_measure() const {
    std::vector<double> w(mu_.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::max(0.0, mu_[i]);
    return TorusMeasure(grid_.dim, grid_.n, w);
  }
  double mean(const std::vector<double>& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += mu_[i] * f[i];
    return s;
  }

  // ψ with Mψ = f and Σ μ_i ψ_i = 0; f must have μ-mean zero.
  std::vector<double> solve(const std::vector<double>& f, double* residual = nullptr) const {
    const Eigen::Index N = M_.rows();
    double fmax = 0.0;
    for (double v : f) fmax = std::max(fmax, std::abs(v));
    if (std::abs(mean(f)) > 1e-8 * std::max(1.0, fmax))
      throw PreconditionError("Poisson right-hand side is not zero-mean under the invariant measure (μ(f) = " +
                              std::to_string(mean(f)) + ")");
    std::vector<double> psi(static_cast<std::size_t>(N), 0.0);
    if (fmax == 0.0) {
      if (residual) *residual = 0.0;
      return psi;
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + 1);
    for (Eigen::Index i = 0; i < N; ++i) rhs(i) = f[static_cast<std::size_t>(i)];
    const Eigen::VectorXd sol = lu_.solve(rhs);
    double m = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) m += mu_[static_cast<std::size_t>(i)] * sol(i);
    Eigen::VectorXd p = sol.head(N).array() - m;
    for (Eigen::Index i = 0; i < N; ++i) psi[static_cast<std::size_t>(i)] = p(i);
    if (residual) {
      Eigen::VectorXd fv(N);
      for (Eigen::Index i = 0; i < N; ++i) fv(i) = f[static_cast<std::size_t>(i)];
      *residual = (M_ * p - fv).cwiseAbs().maxCoeff() / fmax;
    }
    return psi;
  }

 private:
  TorusGrid grid_;
  Eigen::MatrixXd M_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  std::vector<double> mu_;
  double min_mu_ = 0.0;
};

inline TorusMeasure discrete_invariant_measure(const GridOperator& op) {
  return GridPoissonSolver(op).invariant_measure();
}

// ---------------------------------------------------------------------------
// Corrector fields

struct CorrectorField {
  int dim = 1;
  int n = 1;
  std::string method;
  std::vector<std::vector<double>> psi;   // one grid field per right-hand side component
  std::vector<std::vector<Vec>> grad;     // central differences
  std::vector<double> residual;           // relative, per component
  std::vector<std::vector<double>> se;    // Monte Carlo standard errors (feynman_kac)
  double tail_bound = 0.0;                // feynman_kac truncation bound
  TorusMeasure mu;                        // measure used for centering

  double sup_psi() const {
    double m = 0.0;
    for (const auto& c : psi)
      for (double v : c) m = std::max(m, std::abs(v));
    return m;
  }
  double sup_grad() const {
    double m = 0.0;
    for (const auto& c : grad)
      for (const auto& v : c) m = std::max(m, norm_inf(v));
    return m;
  }
  void write_csv(std::ostream& os) const {
    const TorusGrid g{dim, n};
    os << "cell";
    for (int i = 0; i < dim; ++i) os << ",x" << i + 1;
    for (std::size_t c = 0; c < psi.size(); ++c) {
      os << ",psi" << c + 1;
      for (int i = 0; i < dim; ++i) os << ",dpsi" << c + 1 << "_dx" << i + 1;
    }
    os << '\n';
    os.precision(17);
    for (std::size_t j = 0; j < g.size(); ++j) {
      os << j;
      const Vec x = g.center(j);
      for (int i = 0; i < dim; ++i) os << ',' << x[i];
      for (std::size_t c = 0; c < psi.size(); ++c) {
        os << ',' << psi[c][j];
        for (int i = 0; i < dim; ++i) os << ',' << grad[c][j][i];
      }
      os << '\n';
    }
  }
};

inline std::vector<Vec> central_gradient(const TorusGrid& g, const std::vector<double>& f) {
  std::vector<Vec> out(f.size());
  for (std::size_t j = 0; j < f.size(); ++j)
    for (int a = 0; a < g.dim; ++a) out[j][a] = (f[g.shift(j, a, 1)] - f[g.shift(j, a, -1)]) * (0.5 * g.n);
  return out;
}

namespace detail {

inline CorrectorField finish_field(const TorusGrid& g, std::string method, std::vector<std::vector<double>> psi,
                                   std::vector<double> res, TorusMeasure mu) {
  CorrectorField cf;
  cf.dim = g.dim;
  cf.n = g.n;
  cf.method = std::move(method);
  cf.psi = std::move(psi);
  for (const auto& p : cf.psi) cf.grad.push_back(central_gradient(g, p));
  cf.residual = std::move(res);
  cf.mu = std::move(mu);
  return cf;
}

}  // namespace detail

// Fourier–Galerkin discretization on modes |n_i| <= K for trigonometric
// coefficients: L e_n = Σ_{p,q} c_{pq} η_q(2πn) e_{n+p} + Σ_p i2π⟨n, b̂_p⟩ e_{n+p}.
class FourierPoissonSolver {
 public:
  FourierPoissonSolver(const JumpSpec& s, const TorusGrid& g, int K, int angular_res = 256) : grid_(g), K_(K) {
    const TrigPoly* kt = s.kernel.trig();
    if (!kt) throw PreconditionError("fourier corrector needs a trigonometric kernel");
    if (s.dim > 2) throw PreconditionError("fourier corrector supports d <= 2");
    const int d = s.dim;
    if (2 * K + 1 > g.n) throw PreconditionError("grid too coarse for the requested Fourier modes");
    const int side = 2 * K + 1;
    std::size_t M = 1;
    for (int i = 0; i < d; ++i) M *= static_cast<std::size_t>(side);
    modes_.resize(M);
    for (std::size_t idx = 0; idx < M; ++idx) {
      std::size_t r = idx;
      for (int i = 0; i < d; ++i) {
        modes_[idx][i] = static_cast<int>(r % side) - K;
        r /= side;
      }
    }
    const auto km = kt->complex_modes();
    std::vector<Freq> qs;
    std::map<Freq, std::size_t> qidx;
    for (const auto& [pq, c] : km)
      if (!qidx.count(pq.second)) {
        qidx[pq.second] = qs.size();
        qs.push_back(pq.second);
      }
    std::vector<std::pair<Freq, std::array<cplx, kMaxDim>>> bmodes;
    if (!s.drift.is_zero()) {
      const auto* bt = std::get_if<std::vector<TrigPoly>>(&s.drift.f);
      if (!bt) throw PreconditionError("fourier corrector needs a trigonometric drift");
      std::map<Freq, std::array<cplx, kMaxDim>> acc;
      for (int i = 0; i < d; ++i)
        for (const auto& [pq, c] : (*bt)[static_cast<std::size_t>(i)].complex_modes()) acc[pq.first][i] += c;
      bmodes.assign(acc.begin(), acc.end());
    }
    const Eigen::Index Mi = static_cast<Eigen::Index>(M);
    G_ = Eigen::MatrixXcd::Zero(Mi, Mi);
    for (std::size_t col = 0; col < M; ++col) {
      const Freq& nn = modes_[col];
      Vec u;
      for (int i = 0; i < d; ++i) u[i] = kTwoPi * nn[i];
      const auto eta = modal_symbol(s, u, qs, angular_res);
      for (const auto& [pq, c] : km) {
        const auto row = index_of(nn + pq.first);
        if (row) G_(static_cast<Eigen::Index>(*row), static_cast<Eigen::Index>(col)) += c * eta[qidx[pq.second]];
      }
      for (const auto& [p, bc] : bmodes) {
        const auto row = index_of(nn + p);
        if (!row) continue;
        cplx v = 0.0;
        for (int i = 0; i < d; ++i) v += bc[i] * cplx(0.0, kTwoPi * nn[i]);
        G_(static_cast<Eigen::Index>(*row), static_cast<Eigen::Index>(col)) += v;
      }
    }
    const std::size_t zero = *index_of(Freq{});
    zero_ = zero;
    Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(Mi + 1, Mi + 1);
    B.topLeftCorner(Mi, Mi) = G_;
    B(static_cast<Eigen::Index>(zero), Mi) = 1.0;
    B(Mi, static_cast<Eigen::Index>(zero)) = 1.0;
    lu_.compute(B);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(Mi + 1);
    rhs(Mi) = 1.0;
    v_ = Eigen::PartialPivLU<Eigen::MatrixXcd>(B.transpose()).solve(rhs).head(Mi);
  }

  // Histogram of the mode-space invariant density m(x) = Σ v_n e^{−i2π⟨n,x⟩}.
  TorusMeasure invariant_measure() const {
    const double h = grid_.h();
    std::vector<double> w(grid_.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
      const Vec x = grid_.center(j);
      cplx s = 0.0;
      for (std::size_t k = 0; k < modes_.size(); ++k) {
        double damp = 1.0;
        for (int i = 0; i < grid_.dim; ++i) {
          const double t = kPi * modes_[k][i] * h;
          if (modes_[k][i] != 0) damp *= std::sin(t) / t;
        }
        s += v_(static_cast<Eigen::Index>(k)) * std::exp(cplx(0.0, -kTwoPi * dot(modes_[k], x))) * damp;
      }
      w[j] = std::max(0.0, s.real());
    }
    return TorusMeasure(grid_.dim, grid_.n, w);
  }

  std::vector<cplx> transform(const std::vector<double>& f) const {
    std::vector<cplx> out(modes_.size());
    const double N = static_cast<double>(f.size());
    for (std::size_t k = 0; k < modes_.size(); ++k) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j)
        s += f[j] * std::exp(cplx(0.0, -kTwoPi * dot(modes_[k], grid_.center(j))));
      out[k] = s / N;
    }
    return out;
  }

  double mean(const std::vector<double>& f) const {
    const auto fh = transform(f);
    cplx m = 0.0;
    for (std::size_t k = 0; k < fh.size(); ++k) m += v_(static_cast<Eigen::Index>(k)) * fh[k];
    return m.real();
  }

  std::vector<double> solve(const std::vector<double>& f, double* residual = nullptr) const {
    const auto fh = transform(f);
    const Eigen::Index Mi = static_cast<Eigen::Index>(modes_.size());
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(Mi + 1);
    double fmax = 0.0;
    cplx mean = 0.0;
    for (Eigen::Index k = 0; k < Mi; ++k) {
      rhs(k) = fh[static_cast<std::size_t>(k)];
      fmax = std::max(fmax, std::abs(rhs(k)));
      mean += v_(k) * rhs(k);
    }
    if (std::abs(mean) > 1e-8 * std::max(1.0, fmax))
      throw PreconditionError("Poisson right-hand side is not zero-mean under the invariant measure");
    std::vector<double> psi(f.size(), 0.0);
    if (fmax == 0.0) {
      if (residual) *residual = 0.0;
      return psi;
    }
    Eigen::VectorXcd sol = lu_.solve(rhs).head(Mi);
    const cplx m = v_.transpose() * sol;
    sol(static_cast<Eigen::Index>(zero_)) -= m;
    if (residual) {
      Eigen::VectorXcd fv(Mi);
      for (Eigen::Index k = 0; k < Mi; ++k) fv(k) = fh[static_cast<std::size_t>(k)];
      *residual = (G_ * sol - fv).cwiseAbs().maxCoeff() / fmax;
    }
    for (std::size_t j = 0; j < psi.size(); ++j) {
      const Vec x = grid_.center(j);
      cplx s = 0.0;
      for (std::size_t k = 0; k < modes_.size(); ++k)
        s += sol(static_cast<Eigen::Index>(k)) * std::exp(cplx(0.0, kTwoPi * dot(modes_[k], x)));
      psi[j] = s.real();
    }
    return psi;
  }

  const std::vector<Freq>& modes() const { return modes_; }
  const Eigen::MatrixXcd& matrix() const { return G_; }

 private:
  std::optional<std::size_t> index_of(const Freq& m) const {
    std::size_t idx = 0, stride = 1;
    for (int i = 0; i < grid_.dim; ++i) {
      if (std::abs(m[i]) > K_) return std::nullopt;
      idx += stride * static_cast<std::size_t>(m[i] + K_);
      stride *= static_cast<std::size_t>(2 * K_ + 1);
    }
    return idx;
  }

  TorusGrid grid_;
  int K_;
  std::vector<Freq> modes_;
  Eigen::MatrixXcd G_;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
  Eigen::VectorXcd v_;
  std::size_t zero_ = 0;
};

inline int default_fourier_modes(int d, int n) { return d == 1 ? std::min(n / 2 - 1, 32) : std::min(n / 2 - 1, 12); }

// ψ = −∫_0^{T*} P_t f dt by Monte Carlo at every grid center, T* = 8/λ̂₁.
// f is interpolated from its grid values.
inline CorrectorField solve_feynman_kac(const JumpSpec& s, const std::vector<std::vector<double>>& fs,
                                        const TorusGrid& g, const TorusMeasure& mu, const CorrectorOptions& o) {
  double lambda = o.lambda1;
  double C0 = 1.0;
  if (!(lambda > 0.0)) {
    MixingOptions mo;
    mo.seed = o.seed;
    mo.delta = o.delta;
    mo.workers = o.workers;
    mo.paths_per_start = 500;
    mo.starts_per_axis = 4;
    std::vector<TrigPoly> tf;
    Freq p{};
    for (int i = 0; i < g.dim; ++i) {
      p = Freq{};
      p[i] = 1;
      tf.push_back(TrigPoly::cos_x(g.dim, p) + TrigPoly::sin_x(g.dim, p));
    }
    const auto est = mixing_rate(s, mu, tf, mo);
    if (!est.ok) throw PreconditionError("feynman_kac needs λ̂₁ and the mixing fit failed: " + est.note);
    lambda = est.lambda;
    C0 = std::max(1.0, est.prefactor);
  }
  const double T = 8.0 / lambda;
  SimConfig sc;
  sc.delta = o.delta;
  const ProcessModel m = model_for(s, sc, T);
  PathRunOptions po;
  po.dt = o.dt > 0.0 ? o.dt : default_dt(s, o.delta);
  po.fine = true;
  const std::size_t N = g.size(), P = static_cast<std::size_t>(o.fk_paths), F = fs.size();
  std::vector<std::vector<double>> vals(N * P, std::vector<double>(F));
  struct Obs {
    const TorusGrid* g;
    const std::vector<std::vector<double>>* fs;
    std::vector<double>* acc;
    void interval(const Vec& x, double t0, double t1) {
      for (std::size_t c = 0; c < fs->size(); ++c) (*acc)[c] += (t1 - t0) * g->interp((*fs)[c], x);
    }
    void jump(double, const Vec&, const Vec&, bool) {}
  };
  const std::uint64_t ps = mix_seed(o.seed, 0x666b6163ULL);
  parallel_for(N * P, o.workers, [&](std::size_t idx) {
    Rng rng(ps, idx);
    Obs obs{&g, &fs, &vals[idx]};
    run_path(m, g.center(idx / P), T, rng, obs, po);
  });
  std::vector<std::vector<double>> psi(F, std::vector<double>(N)), se(F, std::vector<double>(N));
  double fmax = 0.0;
  for (const auto& f : fs)
    for (double v : f) fmax = std::max(fmax, std::abs(v));
  for (std::size_t c = 0; c < F; ++c) {
    for (std::size_t j = 0; j < N; ++j) {
      std::vector<double> v(P);
      for (std::size_t k = 0; k < P; ++k) v[k] = -vals[j * P + k][c];
      psi[c][j] = sample_mean(v);
      se[c][j] = std::sqrt(sample_variance(v) / P);
    }
    double mean = 0.0;
    for (std::size_t j = 0; j < N; ++j) mean += mu.weight(j) * psi[c][j];
    for (double& v : psi[c]) v -= mean;
  }
  CorrectorField cf = detail::finish_field(g, "feynman_kac", std::move(psi), std::vector<double>(F, 0.0), mu);
  cf.se = std::move(se);
  cf.tail_bound = C0 * std::exp(-lambda * T) * fmax / lambda;
  return cf;
}

// Solves Lψ_c = f_c for each right-hand side; μ is the operator's own
// invariant measure for grid/fourier and the supplied one for feynman_kac.
inline CorrectorField solve_poisson(const JumpSpec& s, const std::vector<std::vector<double>>& fs,
                                    CorrectorMethod method, const CorrectorOptions& o,
                                    const std::optional<TorusMeasure>& mu_mc = std::nullopt) {
  const int d = s.dim;
  const int n = o.n > 0 ? o.n : default_corrector_grid(d);
  const TorusGrid g{d, n};
  for (const auto& f : fs)
    if (f.size() != g.size()) throw PreconditionError("right-hand side does not match the grid");
  switch (method) {
    case CorrectorMethod::Grid: {
      CorrectorOptions oo = o;
      oo.n = n;
      const GridPoissonSolver sol(assemble_operator(s, oo));
      std::vector<std::vector<double>> psi;
      std::vector<double> res;
      for (auto f : fs) {
        if (o.center_rhs) {
          const double m = sol.mean(f);
          for (double& v : f) v -= m;
        }
        double r = 0.0;
        psi.push_back(sol.solve(f, &r));
        res.push_back(r);
      }
      return detail::finish_field(g, "grid", std::move(psi), std::move(res), sol.invariant_measure());
    }
    case CorrectorMethod::Fourier: {
      const int K = o.fourier_modes > 0 ? o.fourier_modes : default_fourier_modes(d, n);
      const FourierPoissonSolver sol(s, g, K);
      std::vector<std::vector<double>> psi;
      std::vector<double> res;
      for (auto f : fs) {
        if (o.center_rhs) {
          const double m = sol.mean(f);
          for (double& v : f) v -= m;
        }
        double r = 0.0;
        psi.push_back(sol.solve(f, &r));
        res.push_back(r);
      }
      return detail::finish_field(g, "fourier", std::move(psi), std::move(res), sol.invariant_measure());
    }
    default: {
      const TorusMeasure mu = mu_mc ? *mu_mc : TorusMeasure::uniform(d, n);
      return solve_feynman_kac(s, fs, g, mu, o);
    }
  }
}

// ---------------------------------------------------------------------------
// Right-hand sides

// Components of −b_∞ − b + μ(b_∞ + b) (or b_R in place of b_∞ for the α = 1
// family with R = 1/ε), sampled on the grid and centered under μ.
inline std::vector<std::vector<double>> corrector_rhs(const JumpSpec& s, const TorusMeasure& mu, Regime r,
                                                      std::optional<double> R = std::nullopt,
                                                      double* centering_residual = nullptr) {
  const int d = s.dim;
  const TorusGrid g{d, mu.resolution()};
  std::optional<DriftEvaluator> ev;
  if (r == Regime::CauchyCenter) {
    if (!R) throw PreconditionError("the α = 1 corrector needs R = 1/ε");
    if (s.large) ev.emplace(s, *R);
  } else if (r == Regime::StableNoCenter) {
    throw PreconditionError("no corrector equation for the uncentered stable regime");
  } else if (s.large) {
    ev.emplace(s, std::numeric_limits<double>::infinity());
  }
  std::vector<std::vector<double>> out(static_cast<std::size_t>(d), std::vector<double>(g.size()));
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Vec x = g.center(j);
    Vec v = s.drift(x);
    if (ev) v += (*ev)(x);
    for (int c = 0; c < d; ++c) out[static_cast<std::size_t>(c)][j] = -v[c];
  }
  double worst = 0.0;
  for (auto& f : out) {
    double m = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) m += mu.weight(j) * f[j];
    for (double& v : f) v -= m;
    double chk = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) chk += mu.weight(j) * f[j];
    worst = std::max(worst, std::abs(chk));
  }
  if (centering_residual) *centering_residual = worst;
  return out;
}

// ---------------------------------------------------------------------------
// Covariance matrices

struct CovarianceMatrix {
  int dim = 1;
  Mat3 A = Mat3::Zero();

  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.topLeftCorner(dim, dim));
    return es.eigenvalues();
  }
  double min_eigenvalue() const { return eigenvalues()(0); }
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["dim"] = dim;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int i = 0; i < dim; ++i) {
      nlohmann::ordered_json r = nlohmann::ordered_json::array();
      for (int k = 0; k < dim; ++k) r.push_back(A(i, k));
      rows.push_back(r);
    }
    j["A"] = rows;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.topLeftCorner(dim, dim));
    j["eigenvalues"] = std::vector<double>(es.eigenvalues().data(), es.eigenvalues().data() + dim);
    nlohmann::ordered_json vecs = nlohmann::ordered_json::array();
    for (int k = 0; k < dim; ++k) {
      std::vector<double> v(static_cast<std::size_t>(dim));
      for (int i = 0; i < dim; ++i) v[static_cast<std::size_t>(i)] = es.eigenvectors()(i, k);
      vecs.push_back(v);
    }
    j["eigenvectors"] = vecs;
    return j;
  }
};

// A = ∫∫ (z + ψ(x+z) − ψ(x)) ⊗ (z + ψ(x+z) − ψ(x)) k(x,z) Π(dz) μ(dx).
// An empty ψ means ψ ≡ 0.
inline CovarianceMatrix covariance_matrix(const JumpSpec& s, const TorusMeasure& mu, const CorrectorField* psi,
                                          const CorrectorOptions& o = {}) {
  if (!s.finite_second_moment()) throw IntegrabilityError("covariance needs ∫|z|²Π(dz) < ∞");
  const int d = s.dim;
  const TorusGrid g{d, mu.resolution()};
  if (psi && (psi->n != g.n || static_cast<int>(psi->psi.size()) != d))
    throw PreconditionError("corrector field does not match the measure grid");
  const double h = g.h();
  const double rcut = o.rcut > 0.0 ? o.rcut : default_rcut(d);
  std::vector<detail::QuadNode> small;
  double taylor_iso = 0.0;
  if (const auto* st = std::get_if<SmallStable>(&s.small)) {
    small = detail::small_stable_nodes(d, st->alpha0, h, h, o.angular_resolution);
    taylor_iso = sphere_area(d) / d * std::pow(h, 2.0 - st->alpha0) / (2.0 - st->alpha0);
  }
  std::vector<detail::QuadNode> atoms;
  if (const auto* at = std::get_if<SmallAtoms>(&s.small))
    for (const auto& a : at->atoms) atoms.push_back({a.theta, a.weight});
  // Large part up to rcut; the tail uses radial moments with one-period line
  // averages of k and the ψ increments.
  std::vector<detail::QuadNode> large;
  struct Tail {
    Vec theta;
    double w, m0, m1, m2;
  };
  std::vector<Tail> tails;
  const int line = g.n;
  for (const auto& c : large_components(s, o.angular_resolution)) {
    const int panels = std::max(1, static_cast<int>(std::ceil((rcut - 1.0) / (d == 1 ? h : 2.0 * h) - 1e-9)));
    const auto rn = quad::composite_gl(1.0, rcut, panels, 4);
    const double inf = std::numeric_limits<double>::infinity();
    const double m0 = radial_integral(c, 0.0, rcut, inf), m1 = radial_integral(c, 1.0, rcut, inf),
                 m2 = radial_integral(c, 2.0, rcut, inf);
    for (const auto& t : c.nodes) {
      for (const auto& r : rn) large.push_back({t.theta * r.x, t.weight * r.w * c.density(r.x)});
      tails.push_back({t.theta, t.weight, m0, m1, m2});
    }
  }
  auto incr = [&](const Vec& x, const Vec& z) {
    Vec v = z;
    if (psi)
      for (int c = 0; c < d; ++c) {
        const auto& f = psi->psi[static_cast<std::size_t>(c)];
        v[c] += g.interp(f, x + z) - g.interp(f, x);
      }
    return v;
  };
  Mat3 A = Mat3::Zero();
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double wx = mu.weight(j);
    if (wx == 0.0) continue;
    const Vec x = g.center(j);
    Mat3 loc = Mat3::Zero();
    auto add = [&](const Vec& v, double w) {
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) loc(a, b) += w * v[a] * v[b];
    };
    if (taylor_iso > 0.0) {
      Mat3 J = Mat3::Identity();
      if (psi)
        for (int c = 0; c < d; ++c)
          for (int a = 0; a < d; ++a) J(c, a) += psi->grad[static_cast<std::size_t>(c)][j][a];
      loc += s.kernel(x, Vec{}) * taylor_iso * J * J.transpose();
    }
    for (const auto& q : small) add(incr(x, q.z), q.w * s.kernel(x, q.z));
    for (const auto& q : atoms) add(incr(x, q.z), q.w * s.kernel(x, q.z));
    for (const auto& q : large) add(incr(x, q.z), q.w * s.kernel(x, q.z));
    for (const auto& t : tails) {
      double K0 = 0.0;
      Vec K1;
      Mat3 K2 = Mat3::Zero();
      for (int i = 0; i < line; ++i) {
        const Vec z = t.theta * (rcut + (i + 0.5) / line);
        const double k = s.kernel(x, z) / line;
        const Vec dpsi = incr(x, z) - z;
        K0 += k;
        K1 += dpsi * k;
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) K2(a, b) += k * dpsi[a] * dpsi[b];
      }
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          loc(a, b) += t.w * (t.m2 * K0 * t.theta[a] * t.theta[b] + t.m1 * (t.theta[a] * K1[b] + K1[a] * t.theta[b]) +
                              t.m0 * K2(a, b));
    }
    A += wx * loc;
  }
  CovarianceMatrix out;
  out.dim = d;
  out.A = 0.5 * (A + A.transpose());
  return out;
}

// A(ε) = ∫∫_{|z|<=1/ε} z zᵀ k Π dμ / log(1/ε), extrapolated linearly in
// 1/log(1/ε) to ε → 0.
struct CriticalCovariance {
  std::vector<double> ladder;
  std::vector<CovarianceMatrix> values;
  CovarianceMatrix extrapolated;
  std::optional<CovarianceMatrix> closed_form;  // k₀ ∫θθᵀ ϱ₀(dθ)
  double k0 = 0.0;
  bool k0_exists = false;
  bool converged = true;
};

inline CriticalCovariance critical_covariance(const JumpSpec& s, const TorusMeasure& mu,
                                              const std::vector<double>& ladder, int angular_res = 64) {
  if (!s.large || std::abs(s.large->phi.index() - 2.0) > 1e-12)
    throw PreconditionError("critical covariance needs an index-2 tail");
  const TrigPoly* kt = s.kernel.trig();
  if (!kt) throw PreconditionError("critical covariance needs a trigonometric kernel");
  if (ladder.size() < 2) throw PreconditionError("critical covariance needs at least two ε values");
  const int d = s.dim;
  const auto modes = kt->complex_modes();
  const auto comps = large_components(s, angular_res);
  CriticalCovariance out;
  out.ladder = ladder;
  // Small-part second moments per z-frequency are ε-independent.
  std::map<Freq, detail::BandMoments> small;
  for (const auto& [pq, c] : modes)
    if (!small.count(pq.second)) small[pq.second] = detail::small_band_moments(s, pq.second, 0.0, 1.0, false, true, angular_res);
  for (double eps : ladder) {
    const double R = 1.0 / eps;
    Mat3 A = Mat3::Zero();
    for (const auto& [pq, c] : modes) {
      const cplx mp = mu.exact_exp_moment(pq.first);
      const auto& sm = small[pq.second];
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) A(a, b) += (c * mp * sm.m[a][b]).real();
      for (const auto& comp : comps)
        for (const auto& nd : comp.nodes) {
          const cplx I = radial_fourier(comp, 2.0, kTwoPi * dot(pq.second, nd.theta), 1.0, R);
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) A(a, b) += (c * mp * I).real() * nd.weight * nd.theta[a] * nd.theta[b];
        }
    }
    CovarianceMatrix cm;
    cm.dim = d;
    cm.A = A / std::log(R);
    cm.A = 0.5 * (cm.A + cm.A.transpose());
    out.values.push_back(cm);
  }
  // Least squares A(ε) = A∞ + C/log(1/ε).
  std::vector<double> t;
  for (double e : ladder) t.push_back(1.0 / std::log(1.0 / e));
  const double tm = sample_mean(t);
  double sxx = 0.0;
  for (double v : t) sxx += (v - tm) * (v - tm);
  out.extrapolated.dim = d;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      double ym = 0.0;
      for (const auto& v : out.values) ym += v.A(a, b);
      ym /= out.values.size();
      double sxy = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) sxy += (t[i] - tm) * (out.values[i].A(a, b) - ym);
      const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
      out.extrapolated.A(a, b) = ym - slope * tm;
    }
  // Flag ladders whose successive changes grow.
  for (std::size_t i = 2; i < out.values.size(); ++i) {
    const double d1 = (out.values[i - 1].A - out.values[i - 2].A).norm();
    const double d2 = (out.values[i].A - out.values[i - 1].A).norm();
    if (d2 > d1 * 1.5 + 1e-12) out.converged = false;
  }
  const K0Estimate k0 = estimate_k0(s, mu, {1e2, 1e3, 1e4}, angular_res);
  out.k0 = k0.value;
  out.k0_exists = k0.cauchy;
  if (k0.cauchy) {
    CovarianceMatrix cf;
    cf.dim = d;
    for (const auto& nd : s.large->rho0.nodes(d, angular_res))
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) cf.A(a, b) += k0.value * nd.weight * nd.theta[a] * nd.theta[b];
    out.closed_form = cf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Degeneracy prediction

struct NondegeneracyVerdict {
  std::vector<bool> small_jumps_along_axis;  // jumps z_k → 0 with z_k/|z_k| → e_i
  std::vector<bool> support_covers_axis;     // ⟨S e_i, e_i⟩ > 0, S = ∫θθᵀ over supp Π
  bool kernel_positive = true;
  bool predicted_nondegenerate = false;
  std::vector<Vec> degenerate_directions;
};

inline NondegeneracyVerdict nondegeneracy_check(const JumpSpec& s, int angular_res = 64) {
  const int d = s.dim;
  NondegeneracyVerdict v;
  Mat3 S = Mat3::Zero();
  const bool stable = std::holds_alternative<SmallStable>(s.small);
  if (stable) S += Mat3::Identity() * (sphere_area(d) / d);
  if (const auto* at = std::get_if<SmallAtoms>(&s.small))
    for (const auto& a : at->atoms) {
      const double r = norm(a.theta);
      if (r == 0.0 || a.weight <= 0.0) continue;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) S(i, j) += a.weight * a.theta[i] * a.theta[j] / (r * r);
    }
  if (s.large)
    for (const auto& n : s.large->rho0.nodes(d, angular_res))
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) S(i, j) += n.weight * n.theta[i] * n.theta[j];
  for (int i = 0; i < d; ++i) {
    v.small_jumps_along_axis.push_back(stable);
    v.support_covers_axis.push_back(S(i, i) > 1e-14);
  }
  v.kernel_positive = s.kernel.kmin > 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S.topLeftCorner(d, d));
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  for (int k = 0; k < d; ++k)
    if (es.eigenvalues()(k) <= 1e-12 * scale) {
      Vec e;
      for (int i = 0; i < d; ++i) e[i] = es.eigenvectors()(i, k);
      v.degenerate_directions.push_back(e);
    }
  v.predicted_nondegenerate = v.kernel_positive && v.degenerate_directions.empty();
  return v;
}

}  // namespace perhom
