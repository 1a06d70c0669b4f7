// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include "codiemb/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "codiemb/report.hpp"

namespace codiemb::cli {

namespace fs = std::filesystem;
using corpus::TaskKind;

namespace {

config::RunConfig load_config(const std::string& path, std::optional<uint64_t> seed) {
  config::RunConfig cfg = config::load_run_config(path);
  if (seed) config::override_seed(cfg, *seed);
  return cfg;
}

encoder::EncoderState state_from_checkpoint(const fusion::Checkpoint& ckpt,
                                            const encoder::EncoderConfig& cfg) {
  encoder::EncoderState reference = encoder::init_encoder(cfg);
  for (const auto& [name, t] : reference.params) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end())
      throw ContractError("checkpoint is missing parameter '" + name + "'");
    require_same_shape(t, it->second, name);
  }
  encoder::EncoderState state;
  state.params = ckpt.tensors;
  return state;
}

std::vector<std::string> distinct_texts(const std::vector<corpus::UnifiedRecord>& records) {
  std::vector<std::string> texts;
  std::set<std::string> seen;
  auto add = [&](const std::string& t) {
    if (seen.insert(t).second) texts.push_back(t);
  };
  for (const auto& rec : records) {
    add(rec.query);
    for (const auto& p : rec.positives) add(p);
    for (const auto& n : rec.negatives) add(n);
  }
  return texts;
}

}  // namespace

trainer::Datasets load_datasets(const config::RunConfig& cfg) {
  if (cfg.manifest_path.empty())
    throw ConfigError("no dataset manifest configured; run gen-data and set data.manifest");
  corpus::Manifest manifest = corpus::load_manifest(cfg.manifest_path);
  fs::path base = fs::path(cfg.manifest_path).parent_path();
  trainer::Datasets data;
  for (const auto& entry : manifest.datasets) {
    corpus::Dataset ds;
    ds.name = fs::path(entry.path).stem().string();
    ds.task = entry.task;
    ds.split = entry.split;
    ds.records = corpus::load_records((base / entry.path).string());
    (entry.split == "train" ? data.train : data.eval).push_back(std::move(ds));
  }
  if (data.train.empty()) throw ConfigError("manifest lists no training datasets");
  return data;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir,
                 std::optional<uint64_t> seed) {
  config::RunConfig cfg = load_config(config_path, seed);
  corpus::SynthOutput out = corpus::generate_synthetic(cfg.data);
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  corpus::save_records(out.ir_train, (dir / "ir_train.jsonl").string());
  corpus::save_records(out.sts_train, (dir / "sts_train.jsonl").string());
  corpus::save_records(out.ir_eval, (dir / "ir_eval.jsonl").string());
  corpus::save_records(out.sts_eval, (dir / "sts_eval.jsonl").string());
  corpus::Manifest manifest;
  manifest.batch_size_ir = cfg.train.sam.batch_size_ir;
  manifest.batch_size_sts = cfg.train.sam.batch_size_sts;
  manifest.datasets = {{"ir_train.jsonl", TaskKind::IR, "train"},
                       {"sts_train.jsonl", TaskKind::STS, "train"},
                       {"ir_eval.jsonl", TaskKind::IR, "eval"},
                       {"sts_eval.jsonl", TaskKind::STS, "eval"}};
  corpus::save_manifest(manifest, (dir / "manifest.json").string());
  std::cout << "wrote " << out.ir_train.size() << " IR + " << out.sts_train.size()
            << " STS train records, " << out.ir_eval.size() << " + " << out.sts_eval.size()
            << " eval records to " << out_dir << "\n";
  return 0;
}

int cmd_plan(const std::string& config_path, int steps, const std::string& out_path,
             std::optional<uint64_t> seed) {
  config::RunConfig cfg = load_config(config_path, seed);
  trainer::Datasets data = load_datasets(cfg);
  std::vector<sampler::DatasetInfo> infos;
  for (size_t i = 0; i < data.train.size(); ++i)
    infos.push_back({static_cast<int>(i), data.train[i].name, data.train[i].task,
                     static_cast<int>(data.train[i].records.size())});
  auto plan = sampler::build_plan(infos, cfg.train.sam, steps);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path, std::ios::binary);
    if (!file) throw FormatError("cannot write plan file: " + out_path);
    out = &file;
  }
  for (const auto& it : plan) *out << sampler::plan_to_json(it, infos) << '\n';

  sampler::PlanReport report = sampler::check_plan(plan, infos, cfg.train.sam);
  std::cerr << sampler::format_report(report);
  return report.ok() ? 0 : 1;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<uint64_t> seed) {
  config::RunConfig cfg = load_config(config_path, seed);
  trainer::Datasets data = load_datasets(cfg);
  trainer::TrainResult res = trainer::train(cfg.train, data, out_dir);
  std::cout << "best   step " << res.best_eval.step << "  avg_ir " << report::fmt_double(res.best_eval.avg_ir, 2)
            << "  avg_sts " << report::fmt_double(res.best_eval.avg_sts, 2) << "  avg "
            << report::fmt_double(res.best_eval.avg, 2) << "\n";
  std::cout << "final  step " << res.final_eval.step << "  avg_ir " << report::fmt_double(res.final_eval.avg_ir, 2)
            << "  avg_sts " << report::fmt_double(res.final_eval.avg_sts, 2) << "  avg "
            << report::fmt_double(res.final_eval.avg, 2) << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& out_dir, std::optional<uint64_t> seed) {
  config::RunConfig cfg = load_config(config_path, seed);
  trainer::Datasets data = load_datasets(cfg);
  encoder::EncoderState state =
      state_from_checkpoint(fusion::load_checkpoint(ckpt_path), cfg.train.enc);
  metrics::EmbedFn embed =
      trainer::make_embed_fn(state, cfg.train.enc, cfg.train.masked_prefix_tokens);

  std::vector<std::vector<std::string>> rows;
  double ir_sum = 0.0, sts_sum = 0.0;
  int ir_count = 0, sts_count = 0;
  for (const auto& ds : data.eval) {
    double value;
    std::string metric;
    if (ds.task == TaskKind::IR) {
      value = metrics::evaluate_ir(embed, ds.records, cfg.train.eval_k).mean_ndcg * 100.0;
      metric = "nDCG@" + std::to_string(cfg.train.eval_k) + " x100";
      ir_sum += value;
      ++ir_count;
    } else {
      value = metrics::evaluate_sts(embed, ds.records).spearman_x100;
      metric = "Spearman x100";
      sts_sum += value;
      ++sts_count;
    }
    rows.push_back({ds.name, corpus::task_name(ds.task), metric, report::fmt_double(value, 2)});
  }
  double avg_ir = ir_count ? ir_sum / ir_count : 0.0;
  double avg_sts = sts_count ? sts_sum / sts_count : 0.0;
  int parts = (ir_count ? 1 : 0) + (sts_count ? 1 : 0);
  double avg = parts ? (avg_ir + avg_sts) / parts : 0.0;
  rows.push_back({"Avg IR", "", "", report::fmt_double(avg_ir, 2)});
  rows.push_back({"Avg STS", "", "", report::fmt_double(avg_sts, 2)});
  rows.push_back({"Avg", "", "", report::fmt_double(avg, 2)});

  std::vector<std::string> headers = {"dataset", "task", "metric", "value"};
  std::string table = report::format_table(headers, rows);
  std::cout << table;
  fs::create_directories(out_dir);
  report::write_file((fs::path(out_dir) / "eval.txt").string(), table);
  report::write_file((fs::path(out_dir) / "eval.csv").string(), report::to_csv(headers, rows));
  return 0;
}

int cmd_fuse(const FuseArgs& args) {
  if (args.ir_soup.empty() || args.sts_soup.empty())
    throw ConfigError("fuse needs --ir-soup and --sts-soup checkpoint lists");
  auto load_all = [](const std::vector<std::string>& paths) {
    std::vector<fusion::Checkpoint> out;
    for (const auto& p : paths) out.push_back(fusion::load_checkpoint(p));
    return out;
  };
  fusion::Checkpoint soup_ir = fusion::uniform_soup(load_all(args.ir_soup));
  fusion::Checkpoint soup_sts = fusion::uniform_soup(load_all(args.sts_soup));

  fusion::Checkpoint fused;
  if (args.mode == "soup") {
    std::vector<fusion::Checkpoint> all = load_all(args.ir_soup);
    for (auto& c : load_all(args.sts_soup)) all.push_back(std::move(c));
    fused = fusion::uniform_soup(all);
  } else if (args.mode == "slerp") {
    fused = fusion::slerp(soup_ir, soup_sts, args.t);
  } else if (args.mode == "hierarchical") {
    if (args.base_path.empty()) throw ConfigError("hierarchical fuse needs --base");
    fusion::Checkpoint base = fusion::load_checkpoint(args.base_path);
    fusion::Checkpoint probe_ir =
        args.ir_probe.empty() ? soup_ir : fusion::load_checkpoint(args.ir_probe);
    fusion::Checkpoint probe_sts =
        args.sts_probe.empty() ? soup_sts : fusion::load_checkpoint(args.sts_probe);
    fusion::DeltaProfile d_ir = fusion::delta_profile(probe_ir, base);
    fusion::DeltaProfile d_sts = fusion::delta_profile(probe_sts, base);
    if (!args.raw_deltas) {
      d_ir = fusion::standardize_profile(d_ir);
      d_sts = fusion::standardize_profile(d_sts);
    }
    fusion::FusionWeights w = fusion::layer_weights(d_ir, d_sts, args.tau);
    for (const auto& [layer, pair] : w.by_layer)
      std::cout << layer << "  w_ir=" << report::fmt_double(pair.first, 4)
                << "  w_sts=" << report::fmt_double(pair.second, 4) << "\n";
    fused = fusion::hierarchical_fuse(soup_ir, soup_sts, w);
  } else {
    throw ConfigError("unknown fuse mode: '" + args.mode +
                      "' (expected hierarchical, soup or slerp)");
  }
  fusion::save_checkpoint(fused, args.out_path);
  std::cout << "wrote fused checkpoint to " << args.out_path << "\n";
  return 0;
}

int cmd_diagnose(const std::string& config_path, const std::string& ckpt_path,
                 const std::string& out_dir, std::optional<uint64_t> seed) {
  config::RunConfig cfg = load_config(config_path, seed);
  trainer::Datasets data = load_datasets(cfg);
  encoder::EncoderState state =
      state_from_checkpoint(fusion::load_checkpoint(ckpt_path), cfg.train.enc);
  geometry::TokenMatrixFn token_matrix =
      trainer::make_token_matrix_fn(state, cfg.train.enc, cfg.train.masked_prefix_tokens);

  std::vector<std::string> headers = {"split",       "tok_sim",  "rank",
                                      "condition_number", "cond_inf", "svd_entropy",
                                      "texts",       "skipped"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& ds : data.eval) {
    geometry::GeometryReport rep = geometry::diagnose_corpus(token_matrix, distinct_texts(ds.records));
    rows.push_back({ds.name, report::fmt_double(rep.tok_sim, 4),
                    report::fmt_double(rep.mean_rank, 2),
                    std::isfinite(rep.condition_number)
                        ? report::fmt_double(rep.condition_number, 2)
                        : "inf",
                    std::to_string(rep.condition_inf_count),
                    report::fmt_double(rep.svd_entropy, 4), std::to_string(rep.text_count),
                    std::to_string(rep.skipped_count)});
  }
  std::string table = report::format_table(headers, rows);
  std::cout << table;
  fs::create_directories(out_dir);
  report::write_file((fs::path(out_dir) / "geometry.txt").string(), table);
  report::write_file((fs::path(out_dir) / "geometry.csv").string(),
                     report::to_csv(headers, rows));
  return 0;
}

int cmd_grid(const std::string& config_path, const std::string& out_dir,
             std::optional<uint64_t> seed) {
  config::RunConfig cfg = load_config(config_path, seed);
  trainer::Datasets data = load_datasets(cfg);
  std::vector<trainer::GridRow> rows =
      trainer::run_experiment_grid(cfg.train, data, trainer::default_grid_methods(), out_dir);
  std::cout << report::read_file((fs::path(out_dir) / "table.txt").string());
  return 0;
}

}  // namespace codiemb::cli
