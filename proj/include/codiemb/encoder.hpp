// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "codiemb/tensor.hpp"

namespace codiemb::encoder {

enum class Pooling { Mean, FirstToken };

std::string pooling_name(Pooling p);
Pooling pooling_from_name(const std::string& name);

struct EncoderConfig {
  int vocab_size = 2000;
  int dim = 32;
  int layer_count = 2;
  Pooling pooling = Pooling::Mean;
  int mid_layer_index = 1;  // 1-based layer whose pooled output feeds MidNCE
  uint64_t init_seed = 1;
  double init_scale = 0.1;
};

void validate_encoder_config(const EncoderConfig& cfg);

// Parameter names follow the layer-grouping convention consumed by fusion:
// `embed.weight`, `layer.<i>.weight`, `layer.<i>.bias`, i = 1..layer_count.
using ParamMap = std::map<std::string, Tensor>;

struct EncoderState {
  ParamMap params;
};

EncoderState init_encoder(const EncoderConfig& cfg);
ParamMap zeros_like(const ParamMap& params);

struct EncodeCache {
  std::vector<int> token_ids;
  std::vector<bool> mask;           // true = position participates in pooling
  std::vector<Matrix> activations;  // [0] = token embeddings, [i] = tanh output of layer i
};

struct EncodeResult {
  Vec final_emb;
  Vec mid_emb;
  EncodeCache cache;
};

// Embeds tokens, applies layer_count rounds of affine+tanh per position and
// pools over unmasked positions.  mid_emb pools layer mid_layer_index.
EncodeResult encode(const EncoderState& state, const EncoderConfig& cfg,
                    std::span<const int> token_ids, const std::vector<bool>& mask);

// Exact reverse pass for a single encode call; adds parameter gradients into
// grad_accum (caller controls accumulation order across a batch).
void backward(const EncoderState& state, const EncoderConfig& cfg, const EncodeCache& cache,
              std::span<const double> d_final, std::span<const double> d_mid,
              ParamMap& grad_accum);

struct AdamConfig {
  double lr = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamMap m;
  ParamMap v;
  int64_t step = 0;
};

AdamState init_adam(const EncoderState& state);

// Bias-corrected adaptive-moment update.  Throws DegenerateInputError on
// non-finite gradients (message names the offending tensor).
void optimizer_step(EncoderState& state, const ParamMap& grads, AdamState& adam,
                    const AdamConfig& cfg);

}  // namespace codiemb::encoder
