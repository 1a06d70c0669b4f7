// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "codiemb/corpus.hpp"
#include "codiemb/encoder.hpp"
#include "codiemb/fusion.hpp"
#include "codiemb/geometry.hpp"
#include "codiemb/losses.hpp"
#include "codiemb/metrics.hpp"
#include "codiemb/sampler.hpp"

namespace codiemb::trainer {

enum class LossMode { CoDiEmb, InfoNCEOnly, CoSENTOnly };

std::string loss_mode_name(LossMode m);
LossMode loss_mode_from_name(const std::string& name);

struct TrainConfig {
  encoder::EncoderConfig enc;
  sampler::SamplerConfig sam;
  losses::StsLossWeights sts;
  int k_pos = 2;               // K+ positives per IR anchor
  int k_neg = 2;               // K- hard negatives per IR anchor
  double tau_cosent = 0.05;    // temperature of the CoSENT-only baseline
  encoder::AdamConfig adam;
  int total_steps = 1000;
  int eval_every = 200;
  int checkpoint_every = 0;    // 0 = only best/final
  LossMode loss_mode = LossMode::CoDiEmb;
  uint64_t run_seed = 0;
  int eval_k = 10;
  int masked_prefix_tokens = 1;  // leading task-prefix tokens excluded from pooling
};

void validate_train_config(const TrainConfig& cfg);

struct Datasets {
  std::vector<corpus::Dataset> train;
  std::vector<corpus::Dataset> eval;
};

struct EvalSnapshot {
  int step = 0;
  double avg_ir = 0.0;   // mean nDCG@k x 100
  double avg_sts = 0.0;  // Spearman x 100
  double avg = 0.0;
};

struct TrainResult {
  fusion::Checkpoint best;
  fusion::Checkpoint final;
  EvalSnapshot best_eval;
  EvalSnapshot final_eval;
  std::string log_path;
};

// Joint-training driver: one optimizer step per iteration plan entry, IR
// steps over the cross-device gathered pool, STS steps averaged per device.
// Writes log.jsonl plus best/final checkpoints under out_dir.  Fully
// deterministic given the config.
TrainResult train(const TrainConfig& cfg, const Datasets& data, const std::string& out_dir);

metrics::EmbedFn make_embed_fn(const encoder::EncoderState& state, const encoder::EncoderConfig& cfg,
                               int masked_prefix_tokens);

// Final-layer token matrix (pre-pooling, unmasked positions) for geometry.
geometry::TokenMatrixFn make_token_matrix_fn(const encoder::EncoderState& state,
                                             const encoder::EncoderConfig& cfg,
                                             int masked_prefix_tokens);

EvalSnapshot evaluate(const encoder::EncoderState& state, const TrainConfig& cfg,
                      const std::vector<corpus::Dataset>& eval_sets, int step);

struct GridRow {
  std::string method;
  double avg_ir = 0.0;
  double avg_sts = 0.0;
  double avg = 0.0;
};

// Known grid methods: CoDiEmb, InfoNCE, CoSENT, Mixed, IR-only, STS-only.
std::vector<std::string> default_grid_methods();

// Applies a named experiment variant to a base config.
TrainConfig configure_method(const TrainConfig& base, const std::string& method);

// Trains every requested variant, writes per-run artifacts, the comparison
// table (text + CSV) and the per-layer delta profile CSV of the two
// single-task runs under out_dir.
std::vector<GridRow> run_experiment_grid(const TrainConfig& base, const Datasets& data,
                                         const std::vector<std::string>& methods,
                                         const std::string& out_dir);

}  // namespace codiemb::trainer
