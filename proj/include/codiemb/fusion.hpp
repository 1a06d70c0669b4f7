// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "codiemb/tensor.hpp"

namespace codiemb::fusion {

struct CheckpointMeta {
  std::string config_hash;
  int64_t step = 0;
  uint64_t seed = 0;
};

struct Checkpoint {
  std::map<std::string, Tensor> tensors;
  CheckpointMeta meta;
};

// Binary container: magic "CDEMCKPT", u32 version, u64 header length, JSON
// header (names, shapes, dtype, metadata, byte offsets), raw little-endian
// f64 payloads.  Layout documented in the README.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Layer label of a parameter: "embed" for `embed.*`, "layer.<i>" for
// `layer.<i>.*`; anything else groups under its first dotted component.
std::string layer_label(const std::string& param_name);

// layer label -> L2 norm of the parameter deviation in that layer.
using DeltaProfile = std::map<std::string, double>;

DeltaProfile delta_profile(const Checkpoint& tuned, const Checkpoint& base);

// Per-layer z-scoring of a delta profile (constant profiles map to zeros);
// applied before layer_weights by default so tau is scale-free.
DeltaProfile standardize_profile(const DeltaProfile& profile);

// Uniformly weighted or explicit-weight parameter averaging.  Weights must
// be non-negative and sum to 1 within 1e-9.
Checkpoint soup(const std::vector<Checkpoint>& checkpoints, const std::vector<double>& weights);
Checkpoint uniform_soup(const std::vector<Checkpoint>& checkpoints);

struct FusionWeights {
  std::map<std::string, std::pair<double, double>> by_layer;  // (w_ir, w_sts)
  double tau = 1.0;
};

// Two-way softmax of the per-layer deltas at temperature tau_fuse.
FusionWeights layer_weights(const DeltaProfile& delta_ir, const DeltaProfile& delta_sts,
                            double tau_fuse);

// Per-layer convex combination of the two soups.
Checkpoint hierarchical_fuse(const Checkpoint& soup_ir, const Checkpoint& soup_sts,
                             const FusionWeights& weights);

// Per-layer spherical interpolation of flattened parameter vectors; falls
// back to linear interpolation below an angle of 1e-6.
Checkpoint slerp(const Checkpoint& a, const Checkpoint& b, double t);

}  // namespace codiemb::fusion
