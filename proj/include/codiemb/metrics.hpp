// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "codiemb/corpus.hpp"
#include "codiemb/tensor.hpp"

namespace codiemb::metrics {

// DCG@k / IDCG@k with log2 discounting.  IDCG of an all-zero pool gives 0
// by convention.
double ndcg_at_k(std::span<const double> ranked_relevances, std::span<const double> ideal_pool,
                 int k);

// Pearson correlation; throws DegenerateInputError on zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

// Tie-correct Spearman: Pearson correlation of average-rank vectors.
double spearman(std::span<const double> predictions, std::span<const double> labels);

using EmbedFn = std::function<Vec(const std::string& text)>;

struct IrEvalResult {
  double mean_ndcg = 0.0;  // in [0, 1]
  int query_count = 0;
  int pool_size = 0;
};

// Encodes every query and the deduplicated document pool once, ranks by
// cosine (ties broken by ascending document id) and averages nDCG@k.
IrEvalResult evaluate_ir(const EmbedFn& embed, const std::vector<corpus::UnifiedRecord>& records,
                         int k = 10);

struct StsEvalResult {
  double spearman_x100 = 0.0;
  int pair_count = 0;
};

StsEvalResult evaluate_sts(const EmbedFn& embed, const std::vector<corpus::UnifiedRecord>& records);

}  // namespace codiemb::metrics
