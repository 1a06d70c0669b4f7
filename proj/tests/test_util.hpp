// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "codiemb/rng.hpp"
#include "codiemb/tensor.hpp"

namespace codiemb::testutil {

// Relative error with an absolute floor of 1 so near-zero gradients compare
// absolutely.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Central finite-difference check of an analytic gradient.  Returns the
// maximum relative error over all coordinates.
inline double finite_diff_max_err(const std::function<double(const Vec&)>& f, const Vec& x,
                                  const Vec& analytic, double h = 1e-6) {
  double worst = 0.0;
  Vec probe = x;
  for (size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    double up = f(probe);
    probe[i] = x[i] - h;
    double down = f(probe);
    probe[i] = x[i];
    double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, rel_err(fd, analytic[i]));
  }
  return worst;
}

inline Vec random_vec(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Matrix random_matrix(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.uniform(lo, hi);
  return m;
}

// Random unit-free vector guaranteed away from the zero-norm degenerate case.
inline Vec random_embedding(Rng& rng, int dim) {
  Vec v = random_vec(rng, dim, -1.0, 1.0);
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (n2 < 1e-2) v[0] += 1.0;
  return v;
}

// Labels drawn from a quantized grid so ties occur often.
inline Vec random_tied_labels(Rng& rng, int n, int levels = 4) {
  Vec v(n);
  for (double& x : v) x = static_cast<double>(rng.uniform_int(0, levels - 1)) / (levels - 1);
  return v;
}

}  // namespace codiemb::testutil
