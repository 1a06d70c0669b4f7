// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include "codiemb/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "codiemb/report.hpp"
#include "codiemb/rng.hpp"

namespace codiemb::trainer {

namespace fs = std::filesystem;
using corpus::TaskKind;
using nlohmann::json;

std::string loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::CoDiEmb: return "codiemb";
    case LossMode::InfoNCEOnly: return "infonce";
    case LossMode::CoSENTOnly: return "cosent";
  }
  return "codiemb";
}

LossMode loss_mode_from_name(const std::string& name) {
  if (name == "codiemb") return LossMode::CoDiEmb;
  if (name == "infonce") return LossMode::InfoNCEOnly;
  if (name == "cosent") return LossMode::CoSENTOnly;
  throw ConfigError("unknown loss mode: '" + name + "' (expected codiemb, infonce or cosent)");
}

void validate_train_config(const TrainConfig& cfg) {
  encoder::validate_encoder_config(cfg.enc);
  sampler::validate_sampler_config(cfg.sam);
  losses::validate_weights(cfg.sts);
  if (cfg.k_pos < 1) throw ConfigError("k_pos must be >= 1");
  if (cfg.k_neg < 0) throw ConfigError("k_neg must be >= 0");
  if (!(cfg.tau_cosent > 0)) throw ConfigError("tau_cosent must be positive");
  if (cfg.total_steps < 1) throw ConfigError("total_steps must be >= 1");
  if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (cfg.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (cfg.eval_k < 1) throw ConfigError("eval_k must be >= 1");
  if (cfg.masked_prefix_tokens < 0) throw ConfigError("masked_prefix_tokens must be >= 0");
}

namespace {

std::vector<bool> make_mask(size_t len, int masked_prefix) {
  // Never mask everything: long prefixes clamp to keep one pooled position.
  int prefix = std::min<int>(masked_prefix, static_cast<int>(len) - 1);
  std::vector<bool> mask(len, true);
  for (int i = 0; i < prefix; ++i) mask[i] = false;
  return mask;
}

struct TokenizedRecord {
  std::vector<int> query;
  std::vector<std::vector<int>> positives;
  std::vector<std::vector<int>> negatives;
  std::vector<double> positive_scores;
};

struct TokenizedDataset {
  std::string name;
  TaskKind task = TaskKind::IR;
  std::vector<TokenizedRecord> records;
};

std::vector<TokenizedDataset> pre_tokenize(const std::vector<corpus::Dataset>& datasets,
                                           int vocab_size) {
  std::vector<TokenizedDataset> out;
  out.reserve(datasets.size());
  for (const auto& ds : datasets) {
    TokenizedDataset td;
    td.name = ds.name;
    td.task = ds.task;
    td.records.reserve(ds.records.size());
    for (const auto& rec : ds.records) {
      TokenizedRecord tr;
      tr.query = corpus::tokenize(rec.query, vocab_size);
      for (const auto& p : rec.positives) tr.positives.push_back(corpus::tokenize(p, vocab_size));
      for (const auto& g : rec.negatives) tr.negatives.push_back(corpus::tokenize(g, vocab_size));
      tr.positive_scores = rec.positive_scores;
      td.records.push_back(std::move(tr));
    }
    out.push_back(std::move(td));
  }
  return out;
}

// Chooses k document slots from m available: a seeded without-replacement
// draw, topped up with replacement when m < k.
std::vector<int> choose_slots(int m, int k, Rng& rng) {
  std::vector<int> slots;
  slots.reserve(k);
  if (m >= k) {
    std::vector<int> pool(m);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
      int j = rng.uniform_int(i, m - 1);
      std::swap(pool[i], pool[j]);
      slots.push_back(pool[i]);
    }
  } else {
    for (int i = 0; i < m; ++i) slots.push_back(i);
    for (int i = m; i < k; ++i) slots.push_back(rng.uniform_int(0, m - 1));
  }
  return slots;
}

std::string config_hash(const encoder::EncoderConfig& cfg) {
  // FNV-1a over the fields that define the parameter shapes.
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<uint64_t>(cfg.vocab_size));
  mix(static_cast<uint64_t>(cfg.dim));
  mix(static_cast<uint64_t>(cfg.layer_count));
  mix(static_cast<uint64_t>(cfg.mid_layer_index));
  mix(cfg.init_seed);
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

fusion::Checkpoint snapshot(const encoder::EncoderState& state, const TrainConfig& cfg,
                            int64_t step) {
  fusion::Checkpoint ckpt;
  ckpt.tensors = state.params;
  ckpt.meta.config_hash = config_hash(cfg.enc);
  ckpt.meta.step = step;
  ckpt.meta.seed = cfg.run_seed;
  return ckpt;
}

struct EncodedText {
  Vec final_emb;
  Vec mid_emb;
  encoder::EncodeCache cache;
};

EncodedText encode_tokens(const encoder::EncoderState& state, const encoder::EncoderConfig& cfg,
                          const std::vector<int>& ids, int masked_prefix) {
  auto mask = make_mask(ids.size(), masked_prefix);
  encoder::EncodeResult r = encoder::encode(state, cfg, ids, mask);
  return {std::move(r.final_emb), std::move(r.mid_emb), std::move(r.cache)};
}

double variance(const Vec& v) {
  if (v.size() < 2) return 0.0;
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s;
}

// Per-step loss bookkeeping that lands in the JSONL log.
struct StepStats {
  double loss = 0.0;
  json components = json::object();
  int skipped_shards = 0;
  bool updated = false;
};

class TrainRun {
 public:
  TrainRun(const TrainConfig& cfg, const Datasets& data, const std::string& out_dir)
      : cfg_(cfg), out_dir_(out_dir) {
    validate_train_config(cfg_);
    fs::create_directories(out_dir_);
    train_sets_ = pre_tokenize(data.train, cfg_.enc.vocab_size);
    eval_sets_ = data.eval;
    state_ = encoder::init_encoder(cfg_.enc);
    adam_ = encoder::init_adam(state_);
    for (size_t i = 0; i < data.train.size(); ++i)
      infos_.push_back({static_cast<int>(i), data.train[i].name, data.train[i].task,
                        static_cast<int>(data.train[i].records.size())});
  }

  TrainResult run() {
    auto plan = sampler::build_plan(infos_, cfg_.sam, cfg_.total_steps);
    std::string log_path = (fs::path(out_dir_) / "log.jsonl").string();
    std::ofstream log(log_path, std::ios::binary);
    if (!log) throw FormatError("cannot write training log: " + log_path);

    TrainResult result;
    result.log_path = log_path;
    bool have_best = false;

    for (const auto& it : plan) {
      encoder::ParamMap grads = encoder::zeros_like(state_.params);
      StepStats stats = execute_step(it, grads);
      if (!std::isfinite(stats.loss))
        throw DegenerateInputError("non-finite loss at step " + std::to_string(it.step) +
                                   " (task " + corpus::task_name(it.task) + ")");
      if (stats.updated) encoder::optimizer_step(state_, grads, adam_, cfg_.adam);

      json line;
      line["step"] = it.step;
      line["task"] = corpus::task_name(it.task);
      line["dataset"] = dataset_names_of(it);
      line["loss"] = stats.loss;
      line["components"] = stats.components;
      line["lr"] = cfg_.adam.lr;
      if (stats.skipped_shards > 0) line["skipped_shards"] = stats.skipped_shards;
      if (!stats.updated) line["skipped"] = true;
      log << line.dump() << '\n';

      bool last = it.step + 1 == cfg_.total_steps;
      if ((it.step + 1) % cfg_.eval_every == 0 || last) {
        EvalSnapshot snap = evaluate(state_, cfg_, eval_sets_, it.step + 1);
        json eline;
        eline["step"] = it.step + 1;
        eline["eval"] = {{"avg_ir", snap.avg_ir}, {"avg_sts", snap.avg_sts}, {"avg", snap.avg}};
        log << eline.dump() << '\n';
        if (!have_best || snap.avg > result.best_eval.avg) {
          have_best = true;
          result.best_eval = snap;
          result.best = snapshot(state_, cfg_, snap.step);
        }
        if (last) {
          result.final_eval = snap;
          result.final = snapshot(state_, cfg_, snap.step);
        }
      }
      if (cfg_.checkpoint_every > 0 && (it.step + 1) % cfg_.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof(name), "ckpt_%06d.ckpt", it.step + 1);
        fusion::save_checkpoint(snapshot(state_, cfg_, it.step + 1),
                                (fs::path(out_dir_) / name).string());
      }
    }

    fusion::save_checkpoint(result.best, (fs::path(out_dir_) / "best.ckpt").string());
    fusion::save_checkpoint(result.final, (fs::path(out_dir_) / "final.ckpt").string());
    return result;
  }

 private:
  std::string dataset_names_of(const sampler::IterationPlan& it) const {
    std::string names;
    int last_id = -1;
    for (const auto& b : it.batches) {
      if (b.record_indices.empty() || b.dataset_id == last_id) continue;
      if (!names.empty()) names += "+";
      names += train_sets_[b.dataset_id].name;
      last_id = b.dataset_id;
    }
    return names;
  }

  StepStats execute_step(const sampler::IterationPlan& it, encoder::ParamMap& grads) {
    if (cfg_.sam.mode == sampler::SamplerMode::Mixed) return mixed_step(it, grads);
    // Single-task iteration: gradients derive from exactly one task's loss.
    if (it.task == TaskKind::IR) return ir_step(it, grads);
    return sts_step(it, grads);
  }

  // IR iteration: encode all device shards, gather in ascending device
  // order into one pool and apply the multi-positive contrastive loss with
  // cross-device negatives.
  StepStats ir_step(const sampler::IterationPlan& it, encoder::ParamMap& grads) {
    StepStats stats;
    if (cfg_.loss_mode == LossMode::CoSENTOnly) return cosent_ir_step(it, grads);

    const int d = cfg_.enc.dim;
    std::vector<EncodedText> q_enc;
    std::vector<std::vector<EncodedText>> pos_enc, neg_enc;
    std::vector<int> device_of;

    for (const auto& batch : it.batches) {
      const auto& ds = train_sets_[batch.dataset_id];
      for (int rec_idx : batch.record_indices) {
        const TokenizedRecord& rec = ds.records[rec_idx];
        Rng rng(mix_seed(cfg_.run_seed,
                         mix_seed(static_cast<uint64_t>(it.step), static_cast<uint64_t>(rec_idx))));
        if (rec.positives.empty())
          throw ValidationError("IR record without positives in dataset " + ds.name);
        if (cfg_.k_neg > 0 && rec.negatives.empty())
          throw ValidationError("IR record without negatives (k_neg > 0) in dataset " + ds.name);

        q_enc.push_back(encode_tokens(state_, cfg_.enc, rec.query, cfg_.masked_prefix_tokens));
        std::vector<EncodedText> pos, neg;
        for (int slot : choose_slots(static_cast<int>(rec.positives.size()), cfg_.k_pos, rng))
          pos.push_back(
              encode_tokens(state_, cfg_.enc, rec.positives[slot], cfg_.masked_prefix_tokens));
        if (cfg_.k_neg > 0)
          for (int slot : choose_slots(static_cast<int>(rec.negatives.size()), cfg_.k_neg, rng))
            neg.push_back(
                encode_tokens(state_, cfg_.enc, rec.negatives[slot], cfg_.masked_prefix_tokens));
        pos_enc.push_back(std::move(pos));
        neg_enc.push_back(std::move(neg));
        device_of.push_back(batch.device_id);
      }
    }

    const int n = static_cast<int>(q_enc.size());
    losses::IRBatch batch;
    batch.queries = Matrix(n, d);
    batch.positives = Tensor3(n, cfg_.k_pos, d);
    batch.negatives = Tensor3(n, cfg_.k_neg, d);
    batch.device_of = device_of;
    for (int i = 0; i < n; ++i) {
      std::copy(q_enc[i].final_emb.begin(), q_enc[i].final_emb.end(),
                batch.queries.row(i).begin());
      for (int k = 0; k < cfg_.k_pos; ++k)
        std::copy(pos_enc[i][k].final_emb.begin(), pos_enc[i][k].final_emb.end(),
                  batch.positives.fiber(i, k).begin());
      for (int k = 0; k < cfg_.k_neg; ++k)
        std::copy(neg_enc[i][k].final_emb.begin(), neg_enc[i][k].final_emb.end(),
                  batch.negatives.fiber(i, k).begin());
    }

    losses::IRLossResult res = losses::ir_infonce_multi(batch, cfg_.sts.tau_ir);
    stats.loss = res.value;
    stats.components["ir_infonce"] = res.value;
    stats.updated = true;

    Vec no_mid;
    for (int i = 0; i < n; ++i) {
      Vec gq(res.d_queries.row(i).begin(), res.d_queries.row(i).end());
      encoder::backward(state_, cfg_.enc, q_enc[i].cache, gq, no_mid, grads);
      for (int k = 0; k < cfg_.k_pos; ++k) {
        Vec gp(res.d_positives.fiber(i, k).begin(), res.d_positives.fiber(i, k).end());
        encoder::backward(state_, cfg_.enc, pos_enc[i][k].cache, gp, no_mid, grads);
      }
      for (int k = 0; k < cfg_.k_neg; ++k) {
        Vec gn(res.d_negatives.fiber(i, k).begin(), res.d_negatives.fiber(i, k).end());
        encoder::backward(state_, cfg_.enc, neg_enc[i][k].cache, gn, no_mid, grads);
      }
    }
    return stats;
  }

  // CoSENT-only treatment of IR data: every (query, doc) pair becomes a
  // scored pair with label 1 (positive) or 0 (negative); the pairwise loss
  // runs per device without any cross-device pool.
  StepStats cosent_ir_step(const sampler::IterationPlan& it, encoder::ParamMap& grads) {
    StepStats stats;
    int active_devices = 0;
    for (const auto& b : it.batches)
      if (!b.record_indices.empty()) ++active_devices;
    if (active_devices == 0) return stats;
    double device_scale = 1.0 / active_devices;
    double total = 0.0;

    for (const auto& batch : it.batches) {
      if (batch.record_indices.empty()) continue;
      const auto& ds = train_sets_[batch.dataset_id];
      std::vector<EncodedText> queries, docs;
      std::vector<int> pair_query, pair_doc;
      losses::ScoredPairBatch pairs;
      for (int rec_idx : batch.record_indices) {
        const TokenizedRecord& rec = ds.records[rec_idx];
        queries.push_back(encode_tokens(state_, cfg_.enc, rec.query, cfg_.masked_prefix_tokens));
        int qi = static_cast<int>(queries.size()) - 1;
        for (const auto& ids : rec.positives) {
          docs.push_back(encode_tokens(state_, cfg_.enc, ids, cfg_.masked_prefix_tokens));
          pair_query.push_back(qi);
          pair_doc.push_back(static_cast<int>(docs.size()) - 1);
          pairs.labels.push_back(1.0);
        }
        for (const auto& ids : rec.negatives) {
          docs.push_back(encode_tokens(state_, cfg_.enc, ids, cfg_.masked_prefix_tokens));
          pair_query.push_back(qi);
          pair_doc.push_back(static_cast<int>(docs.size()) - 1);
          pairs.labels.push_back(0.0);
        }
      }
      for (size_t p = 0; p < pair_query.size(); ++p)
        pairs.predicted.push_back(
            losses::cosine(queries[pair_query[p]].final_emb, docs[pair_doc[p]].final_emb));

      losses::ScoreLossResult res = losses::cosent_loss(pairs, cfg_.tau_cosent);
      total += res.value;

      std::vector<Vec> dq(queries.size(), Vec(cfg_.enc.dim, 0.0));
      std::vector<Vec> dd(docs.size(), Vec(cfg_.enc.dim, 0.0));
      for (size_t p = 0; p < pair_query.size(); ++p) {
        double g = device_scale * res.d_predicted[p];
        if (g == 0.0) continue;
        losses::accumulate_cosine_grad(queries[pair_query[p]].final_emb,
                                       docs[pair_doc[p]].final_emb, g, dq[pair_query[p]],
                                       dd[pair_doc[p]]);
      }
      Vec no_mid;
      for (size_t i = 0; i < queries.size(); ++i)
        encoder::backward(state_, cfg_.enc, queries[i].cache, dq[i], no_mid, grads);
      for (size_t i = 0; i < docs.size(); ++i)
        encoder::backward(state_, cfg_.enc, docs[i].cache, dd[i], no_mid, grads);
    }

    stats.loss = total * device_scale;
    stats.components["cosent"] = stats.loss;
    stats.updated = true;
    return stats;
  }

  // STS iteration: the combined loss runs independently per device (no
  // cross-device pooling) and device losses average.
  StepStats sts_step(const sampler::IterationPlan& it, encoder::ParamMap& grads) {
    StepStats stats;
    std::vector<const sampler::DeviceBatch*> usable;
    for (const auto& b : it.batches)
      if (b.record_indices.size() >= 2)
        usable.push_back(&b);
      else if (!b.record_indices.empty())
        ++stats.skipped_shards;  // a lone pair cannot form a ranking batch
    if (usable.empty()) return stats;
    double device_scale = 1.0 / usable.size();

    double total = 0.0;
    double sum_pearson = 0.0, sum_rankkl = 0.0, sum_pro = 0.0, sum_midnce = 0.0,
           sum_infonce = 0.0, sum_cosent = 0.0;
    Vec no_mid;

    for (const auto* batch : usable) {
      const auto& ds = train_sets_[batch->dataset_id];
      const int n = static_cast<int>(batch->record_indices.size());
      std::vector<EncodedText> left, right;
      losses::ScoredPairBatch final_batch;
      for (int rec_idx : batch->record_indices) {
        const TokenizedRecord& rec = ds.records[rec_idx];
        left.push_back(encode_tokens(state_, cfg_.enc, rec.query, cfg_.masked_prefix_tokens));
        right.push_back(
            encode_tokens(state_, cfg_.enc, rec.positives[0], cfg_.masked_prefix_tokens));
        final_batch.predicted.push_back(
            losses::cosine(left.back().final_emb, right.back().final_emb));
        final_batch.labels.push_back(rec.positive_scores[0]);
      }

      const int d = cfg_.enc.dim;
      if (cfg_.loss_mode == LossMode::InfoNCEOnly) {
        losses::PairEmbBatch fin;
        fin.left = Matrix(n, d);
        fin.right = Matrix(n, d);
        fin.labels = final_batch.labels;
        for (int i = 0; i < n; ++i) {
          std::copy(left[i].final_emb.begin(), left[i].final_emb.end(), fin.left.row(i).begin());
          std::copy(right[i].final_emb.begin(), right[i].final_emb.end(),
                    fin.right.row(i).begin());
        }
        losses::PairEmbLossResult res =
            losses::infonce_baseline(fin, cfg_.sts.midnce_threshold, cfg_.sts.tau_ir);
        total += res.value;
        sum_infonce += res.value;
        for (int i = 0; i < n; ++i) {
          Vec gl(d), gr(d);
          for (int j = 0; j < d; ++j) {
            gl[j] = device_scale * res.d_left(i, j);
            gr[j] = device_scale * res.d_right(i, j);
          }
          encoder::backward(state_, cfg_.enc, left[i].cache, gl, no_mid, grads);
          encoder::backward(state_, cfg_.enc, right[i].cache, gr, no_mid, grads);
        }
        continue;
      }

      if (cfg_.loss_mode == LossMode::CoSENTOnly) {
        losses::ScoreLossResult res = losses::cosent_loss(final_batch, cfg_.tau_cosent);
        total += res.value;
        sum_cosent += res.value;
        for (int i = 0; i < n; ++i) {
          double g = device_scale * res.d_predicted[i];
          Vec gl(d, 0.0), gr(d, 0.0);
          if (g != 0.0)
            losses::accumulate_cosine_grad(left[i].final_emb, right[i].final_emb, g, gl, gr);
          encoder::backward(state_, cfg_.enc, left[i].cache, gl, no_mid, grads);
          encoder::backward(state_, cfg_.enc, right[i].cache, gr, no_mid, grads);
        }
        continue;
      }

      // Full combined objective; a shard whose labels or predictions are
      // constant cannot feed the correlation term, so it is dropped there
      // (the rank-based components still apply).
      losses::StsLossWeights w = cfg_.sts;
      if (w.alpha > 0 &&
          (variance(final_batch.labels) == 0.0 || variance(final_batch.predicted) == 0.0)) {
        w.alpha = 0.0;
        ++stats.skipped_shards;
      }
      losses::PairEmbBatch mid;
      mid.left = Matrix(n, d);
      mid.right = Matrix(n, d);
      mid.labels = final_batch.labels;
      for (int i = 0; i < n; ++i) {
        std::copy(left[i].mid_emb.begin(), left[i].mid_emb.end(), mid.left.row(i).begin());
        std::copy(right[i].mid_emb.begin(), right[i].mid_emb.end(), mid.right.row(i).begin());
      }

      losses::StsCombinedResult res = losses::sts_combined(final_batch, mid, w);
      total += res.value;
      sum_pearson += res.pearson_value;
      sum_rankkl += res.rank_kl_value;
      sum_pro += res.pro_value;
      sum_midnce += res.midnce_value;

      for (int i = 0; i < n; ++i) {
        double g = device_scale * res.d_predicted[i];
        Vec gl(d, 0.0), gr(d, 0.0);
        if (g != 0.0)
          losses::accumulate_cosine_grad(left[i].final_emb, right[i].final_emb, g, gl, gr);
        Vec gml(d), gmr(d);
        for (int j = 0; j < d; ++j) {
          gml[j] = device_scale * res.d_left_mid(i, j);
          gmr[j] = device_scale * res.d_right_mid(i, j);
        }
        encoder::backward(state_, cfg_.enc, left[i].cache, gl, gml, grads);
        encoder::backward(state_, cfg_.enc, right[i].cache, gr, gmr, grads);
      }
    }

    stats.loss = total * device_scale;
    stats.updated = true;
    if (cfg_.loss_mode == LossMode::InfoNCEOnly) {
      stats.components["infonce"] = sum_infonce * device_scale;
    } else if (cfg_.loss_mode == LossMode::CoSENTOnly) {
      stats.components["cosent"] = sum_cosent * device_scale;
    } else {
      stats.components["pearson"] = sum_pearson * device_scale;
      stats.components["rank_kl"] = sum_rankkl * device_scale;
      stats.components["pro"] = sum_pro * device_scale;
      stats.components["midnce"] = sum_midnce * device_scale;
    }
    return stats;
  }

  // Mixed-sampler iteration: each device runs its own task's loss on its
  // own shard; the averaged gradient blends tasks (the baseline's defining
  // property).  Handled by borrowing the per-task step bodies on
  // single-device sub-plans.
  StepStats mixed_step(const sampler::IterationPlan& it, encoder::ParamMap& grads) {
    StepStats stats;
    std::vector<const sampler::DeviceBatch*> usable;
    for (const auto& b : it.batches)
      if (!b.record_indices.empty()) usable.push_back(&b);
    if (usable.empty()) return stats;
    double device_scale = 1.0 / usable.size();

    double total = 0.0;
    for (const auto* b : usable) {
      sampler::IterationPlan sub;
      sub.step = it.step;
      sub.task = train_sets_[b->dataset_id].task;
      sub.batches = {*b};
      sub.cross_device_negatives = false;

      encoder::ParamMap local = encoder::zeros_like(state_.params);
      StepStats sub_stats =
          sub.task == TaskKind::IR ? ir_step(sub, local) : sts_step(sub, local);
      stats.skipped_shards += sub_stats.skipped_shards;
      if (!sub_stats.updated) continue;
      total += sub_stats.loss;
      for (auto& [name, g] : local) {
        Tensor& acc = grads.at(name);
        for (size_t i = 0; i < g.data.size(); ++i) acc.data[i] += device_scale * g.data[i];
      }
      for (auto& [key, value] : sub_stats.components.items())
        stats.components[key] =
            stats.components.value(key, 0.0) + value.get<double>() * device_scale;
      stats.updated = true;
    }
    stats.loss = total * device_scale;
    return stats;
  }

  TrainConfig cfg_;
  std::string out_dir_;
  std::vector<TokenizedDataset> train_sets_;
  std::vector<corpus::Dataset> eval_sets_;
  std::vector<sampler::DatasetInfo> infos_;
  encoder::EncoderState state_;
  encoder::AdamState adam_;
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const Datasets& data, const std::string& out_dir) {
  TrainRun run(cfg, data, out_dir);
  return run.run();
}

metrics::EmbedFn make_embed_fn(const encoder::EncoderState& state,
                               const encoder::EncoderConfig& cfg, int masked_prefix_tokens) {
  return [&state, cfg, masked_prefix_tokens](const std::string& text) {
    auto ids = corpus::tokenize(text, cfg.vocab_size);
    auto mask = make_mask(ids.size(), masked_prefix_tokens);
    return encoder::encode(state, cfg, ids, mask).final_emb;
  };
}

geometry::TokenMatrixFn make_token_matrix_fn(const encoder::EncoderState& state,
                                             const encoder::EncoderConfig& cfg,
                                             int masked_prefix_tokens) {
  return [&state, cfg, masked_prefix_tokens](const std::string& text) {
    auto ids = corpus::tokenize(text, cfg.vocab_size);
    auto mask = make_mask(ids.size(), masked_prefix_tokens);
    encoder::EncodeResult r = encoder::encode(state, cfg, ids, mask);
    const Matrix& h = r.cache.activations[cfg.layer_count];
    int rows = 0;
    for (bool m : mask) rows += m ? 1 : 0;
    Matrix out(rows, cfg.dim);
    int at = 0;
    for (int t = 0; t < h.rows; ++t)
      if (mask[t]) {
        for (int j = 0; j < cfg.dim; ++j) out(at, j) = h(t, j);
        ++at;
      }
    return out;
  };
}

EvalSnapshot evaluate(const encoder::EncoderState& state, const TrainConfig& cfg,
                      const std::vector<corpus::Dataset>& eval_sets, int step) {
  metrics::EmbedFn embed = make_embed_fn(state, cfg.enc, cfg.masked_prefix_tokens);
  double ir_sum = 0.0, sts_sum = 0.0;
  int ir_count = 0, sts_count = 0;
  for (const auto& ds : eval_sets) {
    if (ds.task == TaskKind::IR) {
      ir_sum += metrics::evaluate_ir(embed, ds.records, cfg.eval_k).mean_ndcg * 100.0;
      ++ir_count;
    } else {
      sts_sum += metrics::evaluate_sts(embed, ds.records).spearman_x100;
      ++sts_count;
    }
  }
  EvalSnapshot snap;
  snap.step = step;
  snap.avg_ir = ir_count > 0 ? ir_sum / ir_count : 0.0;
  snap.avg_sts = sts_count > 0 ? sts_sum / sts_count : 0.0;
  int parts = (ir_count > 0 ? 1 : 0) + (sts_count > 0 ? 1 : 0);
  snap.avg = parts > 0 ? (snap.avg_ir + snap.avg_sts) / parts : 0.0;
  return snap;
}

std::vector<std::string> default_grid_methods() {
  return {"CoDiEmb", "InfoNCE", "CoSENT", "Mixed", "IR-only", "STS-only"};
}

TrainConfig configure_method(const TrainConfig& base, const std::string& method) {
  TrainConfig cfg = base;
  cfg.sam.mode = sampler::SamplerMode::CoDiEmb;
  cfg.loss_mode = LossMode::CoDiEmb;
  if (method == "CoDiEmb") {
    // base configuration
  } else if (method == "InfoNCE") {
    cfg.loss_mode = LossMode::InfoNCEOnly;
  } else if (method == "CoSENT") {
    cfg.loss_mode = LossMode::CoSENTOnly;
  } else if (method == "Mixed") {
    cfg.sam.mode = sampler::SamplerMode::Mixed;
  } else if (method == "IR-only") {
    cfg.sam.ratio_ir = 1;
    cfg.sam.ratio_sts = 0;
  } else if (method == "STS-only") {
    cfg.sam.ratio_ir = 0;
    cfg.sam.ratio_sts = 1;
  } else {
    throw ConfigError("unknown grid method: '" + method + "'");
  }
  return cfg;
}

namespace {

std::string method_dir_name(const std::string& method) {
  std::string out;
  for (char c : method) out += c == '-' ? '_' : static_cast<char>(std::tolower(c));
  return out;
}

}  // namespace

std::vector<GridRow> run_experiment_grid(const TrainConfig& base, const Datasets& data,
                                         const std::vector<std::string>& methods,
                                         const std::string& out_dir) {
  fs::create_directories(out_dir);
  fusion::Checkpoint base_ckpt;
  base_ckpt.tensors = encoder::init_encoder(base.enc).params;
  base_ckpt.meta.config_hash = config_hash(base.enc);
  base_ckpt.meta.seed = base.run_seed;
  fusion::save_checkpoint(base_ckpt, (fs::path(out_dir) / "base.ckpt").string());

  std::vector<GridRow> rows;
  std::map<std::string, fusion::Checkpoint> finals;
  for (const auto& method : methods) {
    GridRow row;
    row.method = method;
    std::string run_dir = (fs::path(out_dir) / method_dir_name(method)).string();
    try {
      TrainConfig cfg = configure_method(base, method);
      TrainResult res = train(cfg, data, run_dir);
      row.avg_ir = res.best_eval.avg_ir;
      row.avg_sts = res.best_eval.avg_sts;
      row.avg = res.best_eval.avg;
      finals[method] = std::move(res.final);
    } catch (const std::exception& e) {
      row.avg_ir = row.avg_sts = row.avg = std::nan("");
      report::write_file((fs::path(run_dir) / "error.txt").string(), e.what());
    }
    rows.push_back(row);
  }

  std::vector<std::string> headers = {"method", "avg_ir", "avg_sts", "avg"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : rows)
    cells.push_back({row.method, report::fmt_double(row.avg_ir, 2),
                     report::fmt_double(row.avg_sts, 2), report::fmt_double(row.avg, 2)});
  report::write_file((fs::path(out_dir) / "table.txt").string(),
                     report::format_table(headers, cells));
  report::write_file((fs::path(out_dir) / "table.csv").string(), report::to_csv(headers, cells));

  // Per-layer deviation profile of the two specialists against the shared
  // initialization (heatmap-shaped: one row per layer).
  if (finals.count("IR-only") && finals.count("STS-only")) {
    fusion::DeltaProfile ir_delta = fusion::delta_profile(finals["IR-only"], base_ckpt);
    fusion::DeltaProfile sts_delta = fusion::delta_profile(finals["STS-only"], base_ckpt);
    std::vector<std::vector<std::string>> delta_cells;
    for (const auto& [layer, d_ir] : ir_delta)
      delta_cells.push_back({layer, report::fmt_double(d_ir, 6),
                             report::fmt_double(sts_delta.at(layer), 6)});
    report::write_file((fs::path(out_dir) / "deltas.csv").string(),
                       report::to_csv({"layer", "delta_ir", "delta_sts"}, delta_cells));
  }
  return rows;
}

}  // namespace codiemb::trainer
