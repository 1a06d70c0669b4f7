// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "codiemb/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"codiemb: joint IR/STS embedding training at desk scale"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<uint64_t> seed;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    if (needs_config)
      cmd->add_option("--config", config_path, "run configuration file")->required();
    cmd->add_option("--seed", seed, "override every configured seed");
  };

  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-data", "generate synthetic IR/STS datasets");
  add_common(gen);
  gen->add_option("--out", gen_out, "output directory")->required();

  int plan_steps = 5;
  std::string plan_out;
  CLI::App* plan = app.add_subcommand("plan", "emit and check the first K iteration plans");
  add_common(plan);
  plan->add_option("--steps", plan_steps, "number of iterations to emit")->required();
  plan->add_option("--out", plan_out, "output file ('-' for stdout)");

  std::string train_out;
  CLI::App* train = app.add_subcommand("train", "run the joint-training loop");
  add_common(train);
  train->add_option("--out", train_out, "run directory")->required();

  std::string eval_ckpt, eval_out;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the eval splits");
  add_common(eval);
  eval->add_option("--ckpt", eval_ckpt, "checkpoint to evaluate")->required();
  eval->add_option("--out", eval_out, "output directory")->required();

  codiemb::cli::FuseArgs fuse_args;
  CLI::App* fuse = app.add_subcommand("fuse", "merge checkpoints");
  fuse->add_option("--base", fuse_args.base_path, "pre-training base checkpoint");
  fuse->add_option("--ir-soup", fuse_args.ir_soup, "IR-leaning checkpoints")
      ->required()
      ->delimiter(',');
  fuse->add_option("--sts-soup", fuse_args.sts_soup, "STS-leaning checkpoints")
      ->required()
      ->delimiter(',');
  fuse->add_option("--ir-probe", fuse_args.ir_probe, "IR-only probe run for delta profiling");
  fuse->add_option("--sts-probe", fuse_args.sts_probe, "STS-only probe run for delta profiling");
  fuse->add_option("--tau", fuse_args.tau, "fusion softmax temperature");
  fuse->add_option("--t", fuse_args.t, "slerp interpolation position");
  fuse->add_flag("--raw-deltas", fuse_args.raw_deltas,
                 "skip per-layer delta standardization before the softmax");
  fuse->add_option("--mode", fuse_args.mode, "hierarchical|soup|slerp");
  fuse->add_option("--out", fuse_args.out_path, "fused checkpoint path")->required();

  std::string diag_ckpt, diag_out;
  CLI::App* diagnose = app.add_subcommand("diagnose", "embedding-space geometry diagnostics");
  add_common(diagnose);
  diagnose->add_option("--ckpt", diag_ckpt, "checkpoint to diagnose")->required();
  diagnose->add_option("--out", diag_out, "output directory")->required();

  std::string grid_out;
  CLI::App* grid = app.add_subcommand("grid", "train and compare every method variant");
  add_common(grid);
  grid->add_option("--out", grid_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return codiemb::cli::cmd_gen_data(config_path, gen_out, seed);
    if (plan->parsed()) return codiemb::cli::cmd_plan(config_path, plan_steps, plan_out, seed);
    if (train->parsed()) return codiemb::cli::cmd_train(config_path, train_out, seed);
    if (eval->parsed()) return codiemb::cli::cmd_eval(config_path, eval_ckpt, eval_out, seed);
    if (fuse->parsed()) return codiemb::cli::cmd_fuse(fuse_args);
    if (diagnose->parsed()) return codiemb::cli::cmd_diagnose(config_path, diag_ckpt, diag_out, seed);
    if (grid->parsed()) return codiemb::cli::cmd_grid(config_path, grid_out, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
