// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "codiemb/errors.hpp"

namespace codiemb {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  std::span<double> row(int i) { return {data.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)}; }
  std::span<const double> row(int i) const {
    return {data.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)};
  }
};

// Dense rank-3 tensor, row-major in (n0, n1, n2).
struct Tensor3 {
  int n0 = 0;
  int n1 = 0;
  int n2 = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int a, int b, int c, double fill = 0.0)
      : n0(a), n1(b), n2(c), data(static_cast<size_t>(a) * b * c, fill) {}

  double& operator()(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * n1 + j) * n2 + k];
  }
  double operator()(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * n1 + j) * n2 + k];
  }

  std::span<double> fiber(int i, int j) {
    return {data.data() + (static_cast<size_t>(i) * n1 + j) * n2, static_cast<size_t>(n2)};
  }
  std::span<const double> fiber(int i, int j) const {
    return {data.data() + (static_cast<size_t>(i) * n1 + j) * n2, static_cast<size_t>(n2)};
  }
};

// Named-parameter payload: arbitrary-rank shape plus flat doubles.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int64_t> s, double fill = 0.0) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), fill);
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
  }
  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  if (!a.same_shape(b)) throw ContractError("shape mismatch: " + what);
}

}  // namespace codiemb
