// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include "codiemb/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "codiemb/rng.hpp"

namespace codiemb::sampler {

using corpus::TaskKind;

std::string mode_name(SamplerMode m) { return m == SamplerMode::CoDiEmb ? "codiemb" : "mixed"; }

SamplerMode mode_from_name(const std::string& name) {
  if (name == "codiemb") return SamplerMode::CoDiEmb;
  if (name == "mixed") return SamplerMode::Mixed;
  throw ConfigError("unknown sampler mode: '" + name + "' (expected codiemb or mixed)");
}

void validate_sampler_config(const SamplerConfig& cfg) {
  if (cfg.device_count < 1) throw ConfigError("device_count must be >= 1");
  if (cfg.batch_size_ir < 1 || cfg.batch_size_sts < 1)
    throw ConfigError("batch sizes must be >= 1");
  if (cfg.ratio_ir < 0 || cfg.ratio_sts < 0 || (cfg.ratio_ir == 0 && cfg.ratio_sts == 0))
    throw ConfigError("task ratio needs at least one positive component");
}

namespace {

// Without-replacement cursor over one dataset: a fresh seeded permutation
// per epoch, consumed front to back.
class EpochStream {
 public:
  EpochStream(int dataset_id, int size, uint64_t seed)
      : dataset_id_(dataset_id), size_(size), seed_(seed) {}

  int remaining() const { return static_cast<int>(perm_.size()) - pos_; }

  std::vector<int> take(int count) {
    if (remaining() == 0) reshuffle();
    count = std::min(count, remaining());
    std::vector<int> out(perm_.begin() + pos_, perm_.begin() + pos_ + count);
    pos_ += count;
    return out;
  }

 private:
  void reshuffle() {
    Rng rng(mix_seed(seed_, mix_seed(static_cast<uint64_t>(dataset_id_), epoch_)));
    perm_ = rng.permutation(size_);
    pos_ = 0;
    ++epoch_;
  }

  int dataset_id_;
  int size_;
  uint64_t seed_;
  uint64_t epoch_ = 0;
  std::vector<int> perm_;
  int pos_ = 0;
};

// Bresenham-style scheduler: pick the entry whose (count+1)/weight is
// smallest; ties resolve to the lower index.
int pick_weighted(const std::vector<int64_t>& counts, const std::vector<int64_t>& weights) {
  int best = -1;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (weights[i] <= 0) continue;
    if (best < 0 || (counts[i] + 1) * weights[best] < (counts[best] + 1) * weights[i]) best = static_cast<int>(i);
  }
  return best;
}

// Splits `indices` into device_count shards: full batches when possible,
// otherwise equal-as-possible tail shards (no repeats, ever).
std::vector<DeviceBatch> shard_indices(const std::vector<int>& indices, int dataset_id,
                                       int device_count, int batch_size) {
  std::vector<DeviceBatch> batches(device_count);
  const int total = static_cast<int>(indices.size());
  int cursor = 0;
  bool full = total == device_count * batch_size;
  for (int dev = 0; dev < device_count; ++dev) {
    int take;
    if (full) {
      take = batch_size;
    } else {
      int devs_left = device_count - dev;
      take = (total - cursor + devs_left - 1) / devs_left;  // ceil split
    }
    batches[dev].device_id = dev;
    batches[dev].dataset_id = dataset_id;
    batches[dev].record_indices.assign(indices.begin() + cursor, indices.begin() + cursor + take);
    cursor += take;
  }
  return batches;
}

}  // namespace

std::vector<IterationPlan> build_plan(const std::vector<DatasetInfo>& datasets,
                                      const SamplerConfig& cfg, int total_steps) {
  validate_sampler_config(cfg);
  if (datasets.empty()) throw ConfigError("sampler needs at least one dataset");
  for (const auto& d : datasets)
    if (d.size < 1) throw ConfigError("dataset '" + d.name + "' is empty");

  std::vector<int> ir_sets, sts_sets;  // positions into `datasets`
  for (size_t i = 0; i < datasets.size(); ++i)
    (datasets[i].task == TaskKind::IR ? ir_sets : sts_sets).push_back(static_cast<int>(i));
  if (cfg.ratio_ir > 0 && ir_sets.empty())
    throw ConfigError("task ratio demands IR but no IR dataset is present");
  if (cfg.ratio_sts > 0 && sts_sets.empty())
    throw ConfigError("task ratio demands STS but no STS dataset is present");
  if (cfg.mode == SamplerMode::Mixed && (ir_sets.empty() && sts_sets.empty()))
    throw ConfigError("no datasets");

  std::vector<EpochStream> streams;
  streams.reserve(datasets.size());
  for (const auto& d : datasets) streams.emplace_back(d.id, d.size, cfg.seed);

  // Task-level interleaving counters, then per-task dataset rotation
  // weighted by dataset size.
  std::vector<int64_t> task_counts(2, 0);
  std::vector<int64_t> task_weights = {cfg.ratio_ir, cfg.ratio_sts};
  std::vector<int64_t> set_counts(datasets.size(), 0);
  std::vector<int64_t> set_weights(datasets.size(), 0);
  for (size_t i = 0; i < datasets.size(); ++i) set_weights[i] = datasets[i].size;

  // Mixed mode rotates one global cursor over all datasets per device slot.
  std::vector<int64_t> mixed_counts(datasets.size(), 0);

  std::vector<IterationPlan> plan;
  plan.reserve(total_steps);
  for (int step = 0; step < total_steps; ++step) {
    IterationPlan it;
    it.step = step;
    if (cfg.mode == SamplerMode::CoDiEmb) {
      int task_idx = pick_weighted(task_counts, task_weights);
      ++task_counts[task_idx];
      TaskKind task = task_idx == 0 ? TaskKind::IR : TaskKind::STS;
      const auto& sets = task_idx == 0 ? ir_sets : sts_sets;

      // Round-robin over this task's datasets, proportional to size.
      std::vector<int64_t> counts, weights;
      for (int s : sets) {
        counts.push_back(set_counts[s]);
        weights.push_back(set_weights[s]);
      }
      int chosen = sets[pick_weighted(counts, weights)];
      ++set_counts[chosen];

      int batch_size = task == TaskKind::IR ? cfg.batch_size_ir : cfg.batch_size_sts;
      std::vector<int> indices = streams[chosen].take(cfg.device_count * batch_size);
      it.task = task;
      it.batches = shard_indices(indices, datasets[chosen].id, cfg.device_count, batch_size);
      it.cross_device_negatives = task == TaskKind::IR;
    } else {
      // Mixed: each device draws independently from the global rotation;
      // the step-level task mirrors device 0 and no cross-device pool forms.
      it.batches.resize(cfg.device_count);
      for (int dev = 0; dev < cfg.device_count; ++dev) {
        int chosen = pick_weighted(mixed_counts, set_weights);
        ++mixed_counts[chosen];
        TaskKind task = datasets[chosen].task;
        int batch_size = task == TaskKind::IR ? cfg.batch_size_ir : cfg.batch_size_sts;
        std::vector<int> indices = streams[chosen].take(batch_size);
        it.batches[dev].device_id = dev;
        it.batches[dev].dataset_id = datasets[chosen].id;
        it.batches[dev].record_indices = std::move(indices);
        if (dev == 0) it.task = task;
      }
      it.cross_device_negatives = false;
    }
    plan.push_back(std::move(it));
  }
  return plan;
}

PlanReport check_plan(const std::vector<IterationPlan>& plan,
                      const std::vector<DatasetInfo>& datasets, const SamplerConfig& cfg) {
  PlanReport report;
  std::map<int, const DatasetInfo*> by_id;
  for (const auto& d : datasets) by_id[d.id] = &d;
  std::map<int, std::vector<int>> consumed;  // dataset id -> index stream

  for (const auto& it : plan) {
    // Rule: single dataset per iteration (CoDiEmb mode only).
    if (cfg.mode == SamplerMode::CoDiEmb) {
      std::set<int> ids;
      for (const auto& b : it.batches)
        if (!b.record_indices.empty()) ids.insert(b.dataset_id);
      if (ids.size() > 1)
        report.violations.push_back(
            {it.step, "same-dataset", std::to_string(ids.size()) + " datasets in one iteration"});
      bool want_cross = it.task == TaskKind::IR;
      if (it.cross_device_negatives != want_cross)
        report.violations.push_back({it.step, "cross-device-flag",
                                     "cross_device_negatives inconsistent with task"});
    }

    // Rule: shard disjointness within a step and per-dataset collection.
    std::map<int, std::set<int>> step_seen;
    for (const auto& b : it.batches) {
      for (int idx : b.record_indices) {
        const DatasetInfo* info = by_id.count(b.dataset_id) ? by_id[b.dataset_id] : nullptr;
        if (!info || idx < 0 || idx >= info->size) {
          report.violations.push_back({it.step, "index-range",
                                       "record index " + std::to_string(idx) +
                                           " invalid for dataset " + std::to_string(b.dataset_id)});
          continue;
        }
        if (!step_seen[b.dataset_id].insert(idx).second)
          report.violations.push_back({it.step, "disjointness",
                                       "record " + std::to_string(idx) + " of dataset " +
                                           std::to_string(b.dataset_id) + " sharded twice"});
        consumed[b.dataset_id].push_back(idx);
      }
    }

    // Rule: batch-size conformance (tails may shrink but never grow).
    for (const auto& b : it.batches) {
      if (!by_id.count(b.dataset_id)) continue;
      TaskKind task = by_id[b.dataset_id]->task;
      int expect = task == TaskKind::IR ? cfg.batch_size_ir : cfg.batch_size_sts;
      if (static_cast<int>(b.record_indices.size()) > expect)
        report.violations.push_back({it.step, "batch-size",
                                     "device batch of " + std::to_string(b.record_indices.size()) +
                                         " exceeds configured " + std::to_string(expect)});
    }

    if (it.task == TaskKind::IR)
      ++report.ir_steps;
    else
      ++report.sts_steps;
  }

  // Rule: per-epoch no-repeat coverage within each dataset.
  for (auto& [id, stream] : consumed) {
    int size = by_id.count(id) ? by_id[id]->size : 0;
    if (size <= 0) continue;
    for (size_t start = 0; start < stream.size(); start += size) {
      size_t end = std::min(stream.size(), start + size);
      // A full-size chunk with no repeats covers every index (pigeonhole),
      // so no-repeat doubles as the coverage check.
      std::set<int> epoch(stream.begin() + start, stream.begin() + end);
      if (epoch.size() != end - start)
        report.violations.push_back({-1, "epoch-no-repeat",
                                     "dataset " + std::to_string(id) +
                                         " repeats a record within one epoch"});
    }
  }

  // Rule: per-task step counts track the configured ratio (single-task
  // iterations only, so Mixed plans skip this check).
  if (cfg.mode == SamplerMode::CoDiEmb) {
    report.ratio_checked = true;
    int64_t lhs = static_cast<int64_t>(report.ir_steps) * cfg.ratio_sts;
    int64_t rhs = static_cast<int64_t>(report.sts_steps) * cfg.ratio_ir;
    int64_t bound = std::max<int64_t>(cfg.ratio_ir, cfg.ratio_sts);
    if (std::llabs(lhs - rhs) > bound)
      report.violations.push_back({-1, "task-ratio",
                                   "IR/STS step counts " + std::to_string(report.ir_steps) + "/" +
                                       std::to_string(report.sts_steps) +
                                       " deviate from configured ratio"});
  }
  return report;
}

std::string format_report(const PlanReport& report) {
  std::ostringstream out;
  out << "plan check: " << (report.ok() ? "OK" : "VIOLATIONS") << "\n";
  out << "  IR steps:  " << report.ir_steps << "\n";
  out << "  STS steps: " << report.sts_steps << "\n";
  if (!report.ratio_checked) out << "  ratio check: n/a (mixed mode)\n";
  for (const auto& v : report.violations) {
    out << "  [" << v.rule << "]";
    if (v.step >= 0) out << " step " << v.step;
    out << ": " << v.detail << "\n";
  }
  return out.str();
}

std::string plan_to_json(const IterationPlan& plan, const std::vector<DatasetInfo>& datasets) {
  nlohmann::json j;
  j["step"] = plan.step;
  j["task"] = corpus::task_name(plan.task);
  j["cross_device_negatives"] = plan.cross_device_negatives;
  j["batches"] = nlohmann::json::array();
  std::map<int, std::string> names;
  for (const auto& d : datasets) names[d.id] = d.name;
  for (const auto& b : plan.batches) {
    nlohmann::json jb;
    jb["device"] = b.device_id;
    jb["dataset"] = names.count(b.dataset_id) ? names[b.dataset_id] : std::to_string(b.dataset_id);
    jb["records"] = b.record_indices;
    j["batches"].push_back(jb);
  }
  return j.dump();
}

}  // namespace codiemb::sampler
