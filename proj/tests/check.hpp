#pragma once

// Shared helpers for the unit tests: seeded random tensors and central
// finite-difference gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "emgkin/layers.hpp"

namespace emgkin::test {

inline Tensor64 random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor64 t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

/// d f / d t[i] for every element by central differences.
inline Tensor64 numeric_gradient(const std::function<double()>& f, Tensor64& t, double h = 1e-6) {
  Tensor64 g(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double saved = t[i];
    t[i] = saved + h;
    const double up = f();
    t[i] = saved - h;
    const double down = f();
    t[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_relative_error(const Tensor64& a, const Tensor64& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

/// sum(r * y): a scalar probe whose gradient with respect to y is r.
inline double dot(const Tensor64& r, const Tensor64& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
  return s;
}

}  // namespace emgkin::test
