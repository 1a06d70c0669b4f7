// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "codiemb/config.hpp"

namespace codiemb::cli {

// Loads every dataset listed in the run config's manifest.
trainer::Datasets load_datasets(const config::RunConfig& cfg);

int cmd_gen_data(const std::string& config_path, const std::string& out_dir,
                 std::optional<uint64_t> seed);
int cmd_plan(const std::string& config_path, int steps, const std::string& out_path,
             std::optional<uint64_t> seed);
int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<uint64_t> seed);
int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& out_dir, std::optional<uint64_t> seed);

struct FuseArgs {
  std::string base_path;
  std::vector<std::string> ir_soup;
  std::vector<std::string> sts_soup;
  std::string ir_probe;   // optional; defaults to the IR soup itself
  std::string sts_probe;  // optional; defaults to the STS soup itself
  double tau = 1.0;
  double t = 0.5;  // slerp position
  bool raw_deltas = false;
  std::string mode = "hierarchical";
  std::string out_path;
};

int cmd_fuse(const FuseArgs& args);
int cmd_diagnose(const std::string& config_path, const std::string& ckpt_path,
                 const std::string& out_dir, std::optional<uint64_t> seed);
int cmd_grid(const std::string& config_path, const std::string& out_dir,
             std::optional<uint64_t> seed);

}  // namespace codiemb::cli
