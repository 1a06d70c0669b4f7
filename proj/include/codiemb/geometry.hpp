// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "codiemb/tensor.hpp"

namespace codiemb::geometry {

// Singular values of X in descending order, computed by one-sided Jacobi
// rotations (robust for the small matrices this module sees).
Vec singular_values(const Matrix& x);

// Mean cosine similarity over all distinct row pairs.
double tok_sim(const Matrix& x);

// Count of singular values above max(n, d) * eps * sigma_max.
int numerical_rank(const Matrix& x);

// sigma_max / sigma_min over min(n, d) singular values; +inf when sigma_min
// falls below the rank tolerance.
double condition_number(const Matrix& x);

// Entropy (nats) of the normalized squared-singular-value distribution.
double svd_entropy(const Matrix& x);

struct GeometryReport {
  double tok_sim = 0.0;
  double mean_rank = 0.0;
  double condition_number = 0.0;  // mean over texts with finite kappa
  int condition_inf_count = 0;
  double svd_entropy = 0.0;
  int text_count = 0;
  int skipped_count = 0;  // texts with fewer than 2 token embeddings
};

using TokenMatrixFn = std::function<Matrix(const std::string& text)>;

// Scores each text's pre-pooling token-embedding matrix with the four
// metrics and averages over the corpus.  kappa averages over texts where it
// is finite; the +inf count is reported separately.
GeometryReport diagnose_corpus(const TokenMatrixFn& token_matrix,
                               const std::vector<std::string>& texts);

}  // namespace codiemb::geometry
