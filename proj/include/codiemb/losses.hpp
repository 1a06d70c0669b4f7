// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <span>
#include <vector>

#include "codiemb/tensor.hpp"

namespace codiemb::losses {

// ---------------------------------------------------------------------------
// Cosine similarity with analytic gradients.
// ---------------------------------------------------------------------------

double cosine(std::span<const double> u, std::span<const double> v);

struct CosineResult {
  double value = 0.0;
  Vec d_u;
  Vec d_v;
};
CosineResult cosine_with_grad(std::span<const double> u, std::span<const double> v);

// Adds g * dcos(u,v)/du into du (and likewise dv) without re-deriving norms.
void accumulate_cosine_grad(std::span<const double> u, std::span<const double> v, double g,
                            std::span<double> du, std::span<double> dv);

// ---------------------------------------------------------------------------
// Score-level batches (predicted cosine vs. ground-truth label).
// ---------------------------------------------------------------------------

struct ScoredPairBatch {
  Vec predicted;  // \hat{y}_i, cosine similarities
  Vec labels;     // y_i in [0, 1]
};

struct ScoreLossResult {
  double value = 0.0;
  Vec d_predicted;
};

// Temperature softmax with max-subtraction.
Vec softmax_temp(std::span<const double> scores, double tau);

// Descending-order ranks in [0, N-1]; ties get the mean of their positions.
Vec average_ranks(std::span<const double> labels);

ScoreLossResult pearson_loss(const ScoredPairBatch& batch);
ScoreLossResult rank_kl_loss(const ScoredPairBatch& batch, double tau);
ScoreLossResult pro_loss(const ScoredPairBatch& batch, double tau);
ScoreLossResult cosent_loss(const ScoredPairBatch& batch, double tau);
ScoreLossResult ranknet_loss(const ScoredPairBatch& batch);

// Score gaps below this are treated as ties by pro_loss.
inline constexpr double kProTieEpsilon = 1e-6;

// ---------------------------------------------------------------------------
// IR contrastive loss with multiple positives and pooled hard negatives.
// ---------------------------------------------------------------------------

struct IRBatch {
  Matrix queries;             // N x d
  Tensor3 positives;          // N x K+ x d
  Tensor3 negatives;          // N x K- x d (K- may be 0)
  std::vector<int> device_of; // row -> virtual device id (bookkeeping)
};

// Core over precomputed cosine tensors: pos_cos(i,j,k) = cos(q_i, d+_{jk}),
// neg_cos(i,j,k) = cos(q_i, d-_{jk}).  For each anchor i and own positive c,
// the denominator holds the anchor term, every other query's positives and
// all queries' negatives; the anchor's remaining own positives are excluded.
struct IRCosineLossResult {
  double value = 0.0;
  Tensor3 d_pos_cos;
  Tensor3 d_neg_cos;
};
IRCosineLossResult ir_infonce_from_cosines(const Tensor3& pos_cos, const Tensor3& neg_cos,
                                           double tau);

struct IRLossResult {
  double value = 0.0;
  Matrix d_queries;
  Tensor3 d_positives;
  Tensor3 d_negatives;
};
IRLossResult ir_infonce_multi(const IRBatch& batch, double tau);

// ---------------------------------------------------------------------------
// Pairwise-embedding InfoNCE (intermediate-layer auxiliary and the
// final-layer baseline share the same math).
// ---------------------------------------------------------------------------

struct PairEmbBatch {
  Matrix left;   // N x d
  Matrix right;  // N x d
  Vec labels;    // length N
};

struct PairEmbLossResult {
  double value = 0.0;
  Matrix d_left;
  Matrix d_right;
  int active_rows = 0;  // rows that passed the label threshold
};

// Rows with labels[i] < threshold contribute no numerator; the softmax
// denominator still ranges over every right-hand row.  All rows filtered
// out yields value 0 with zero gradients (active_rows == 0).
PairEmbLossResult mid_nce_loss(const PairEmbBatch& batch, double threshold, double tau);
PairEmbLossResult infonce_baseline(const PairEmbBatch& batch, double threshold, double tau);

// ---------------------------------------------------------------------------
// Combined STS objective.
// ---------------------------------------------------------------------------

struct StsLossWeights {
  double alpha = 1.0;   // pearson
  double beta = 1.0;    // rank-KL
  double gamma = 1.0;   // PRO
  double lambda = 0.1;  // mid-layer InfoNCE
  double tau_rankkl = 0.05;
  double tau_pro = 1.0;
  double tau_midnce = 0.05;
  double tau_ir = 0.05;
  double midnce_threshold = 0.5;
};

void validate_weights(const StsLossWeights& w);

struct StsCombinedResult {
  double value = 0.0;
  Vec d_predicted;      // gradient w.r.t. final-layer cosines
  Matrix d_left_mid;    // gradients w.r.t. intermediate embeddings
  Matrix d_right_mid;
  double pearson_value = 0.0;
  double rank_kl_value = 0.0;
  double pro_value = 0.0;
  double midnce_value = 0.0;
};

// Weighted sum of the four components.  Components with zero weight are
// skipped entirely, so their preconditions are not enforced.
StsCombinedResult sts_combined(const ScoredPairBatch& final_batch, const PairEmbBatch& mid_batch,
                               const StsLossWeights& w);

}  // namespace codiemb::losses
