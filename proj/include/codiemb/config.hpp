// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <map>
#include <string>

#include "codiemb/corpus.hpp"
#include "codiemb/trainer.hpp"

namespace codiemb::config {

// Minimal TOML subset: [section] headers, `key = value` pairs, # comments.
// Values are quoted strings, booleans, integers or floats.
struct TomlValue {
  enum class Kind { Int, Float, Str, Bool };
  Kind kind = Kind::Str;
  int64_t int_value = 0;
  double float_value = 0.0;
  std::string str_value;
  bool bool_value = false;
  int line = 0;
};

using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

TomlTable parse_toml(const std::string& text);
TomlTable parse_toml_file(const std::string& path);

struct FusionOptions {
  double tau_fuse = 1.0;
  bool standardize_deltas = true;
};

struct RunConfig {
  corpus::SynthConfig data;
  trainer::TrainConfig train;
  FusionOptions fusion;
  std::string manifest_path;  // resolved relative to the config file
};

// Loads, validates and resolves a run config.  Unknown sections or keys are
// rejected; every violation is listed in the ConfigError message.
RunConfig load_run_config(const std::string& path);

// Applies one seed to every seeded subsystem (data, sampler, encoder, run).
void override_seed(RunConfig& cfg, uint64_t seed);

}  // namespace codiemb::config
