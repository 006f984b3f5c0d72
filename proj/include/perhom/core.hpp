// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace perhom {

inline constexpr int kMaxDim = 3;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Point or vector in R^d, d <= 3. Unused trailing components are kept at zero
// so that dot products and norms need no dimension argument.
struct Vec {
  double c[kMaxDim] = {0.0, 0.0, 0.0};

  constexpr Vec() = default;
  constexpr Vec(double a, double b = 0.0, double d = 0.0) : c{a, b, d} {}

  constexpr double& operator[](int i) { return c[i]; }
  constexpr double operator[](int i) const { return c[i]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < kMaxDim; ++i) c[i] += o.c[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < kMaxDim; ++i) c[i] -= o.c[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (double& v : c) v *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(Vec a, double s) { return a *= s; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator-(Vec a) { return a *= -1.0; }
  friend bool operator==(const Vec& a, const Vec& b) {
    return a.c[0] == b.c[0] && a.c[1] == b.c[1] && a.c[2] == b.c[2];
  }
};

inline double dot(const Vec& a, const Vec& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }
inline double norm_inf(const Vec& a) {
  return std::max({std::abs(a[0]), std::abs(a[1]), std::abs(a[2])});
}

inline Vec unit(int i) {
  Vec e;
  e[i] = 1.0;
  return e;
}

// Reduce a point to the fundamental cell [0,1)^d.
inline Vec wrap(const Vec& x, int d) {
  Vec y = x;
  for (int i = 0; i < d; ++i) {
    y[i] -= std::floor(y[i]);
    if (y[i] >= 1.0) y[i] = 0.0;
  }
  return y;
}

// Surface measure of the unit sphere S^{d-1}: 2, 2π, 4π.
inline double sphere_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return kTwoPi;
    case 3: return 4.0 * kPi;
    default: throw std::invalid_argument("dimension must be 1, 2 or 3");
  }
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IntegrabilityError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct PreconditionError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  ConfigError(const std::string& path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), key_path(path) {}
  std::string key_path;
};

inline void check_dim(int d) {
  if (d < 1 || d > kMaxDim) throw PreconditionError("dimension must be 1, 2 or 3");
}

// Runs f(i) for i in [0, n) on `workers` threads. Each index is processed
// exactly once; callers write results by index, so output does not depend on
// the worker count.
template <class F>
void parallel_for(std::size_t n, int workers, F&& f) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        f(i);
      } catch (...) {
        if (!failed.exchange(true)) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int nt = std::min<int>(workers, static_cast<int>(n));
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace perhom
