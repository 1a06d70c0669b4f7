// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "codiemb/corpus.hpp"

namespace codiemb::sampler {

enum class SamplerMode { CoDiEmb, Mixed };

std::string mode_name(SamplerMode m);
SamplerMode mode_from_name(const std::string& name);

struct DatasetInfo {
  int id = 0;
  std::string name;
  corpus::TaskKind task = corpus::TaskKind::IR;
  int size = 0;
};

// ratio_ir : ratio_sts controls the interleaved task schedule.  A zero
// component restricts the plan to the other task (single-task runs).
struct SamplerConfig {
  int device_count = 1;
  int batch_size_ir = 8;
  int batch_size_sts = 8;
  int ratio_ir = 1;
  int ratio_sts = 1;
  SamplerMode mode = SamplerMode::CoDiEmb;
  uint64_t seed = 0;
};

void validate_sampler_config(const SamplerConfig& cfg);

struct DeviceBatch {
  int device_id = 0;
  int dataset_id = 0;
  std::vector<int> record_indices;
};

struct IterationPlan {
  int step = 0;
  corpus::TaskKind task = corpus::TaskKind::IR;
  std::vector<DeviceBatch> batches;  // one per device; epoch tails may shrink
  bool cross_device_negatives = false;
};

// Deterministic iteration planner.  In CoDiEmb mode every device of a step
// draws a disjoint shard of one dataset; Mixed mode lets devices pick
// datasets independently (a Mixed step's task field mirrors device 0).
// Records are consumed without replacement per epoch and reshuffled between
// epochs; datasets within a task rotate with size-proportional frequency.
std::vector<IterationPlan> build_plan(const std::vector<DatasetInfo>& datasets,
                                      const SamplerConfig& cfg, int total_steps);

struct PlanViolation {
  int step = -1;
  std::string rule;
  std::string detail;
};

struct PlanReport {
  std::vector<PlanViolation> violations;
  int ir_steps = 0;
  int sts_steps = 0;
  bool ratio_checked = false;  // not applicable in Mixed mode

  bool ok() const { return violations.empty(); }
};

// Verifies single-dataset purity (CoDiEmb mode), shard disjointness, batch
// sizing, per-epoch no-repeat coverage and the task-ratio balance.
PlanReport check_plan(const std::vector<IterationPlan>& plan,
                      const std::vector<DatasetInfo>& datasets, const SamplerConfig& cfg);

std::string format_report(const PlanReport& report);

// JSON line used by the `plan` subcommand.
std::string plan_to_json(const IterationPlan& plan, const std::vector<DatasetInfo>& datasets);

}  // namespace codiemb::sampler
