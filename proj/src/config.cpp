// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include "codiemb/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace codiemb::config {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

TomlValue parse_value(const std::string& raw, int line) {
  TomlValue v;
  v.line = line;
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    v.kind = TomlValue::Kind::Str;
    std::string out;
    for (size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) {
        ++i;
        out += raw[i] == 'n' ? '\n' : raw[i];
      } else {
        out += raw[i];
      }
    }
    v.str_value = out;
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = TomlValue::Kind::Bool;
    v.bool_value = raw == "true";
    return v;
  }
  if (raw.find('.') == std::string::npos && raw.find('e') == std::string::npos &&
      raw.find('E') == std::string::npos) {
    int64_t iv = 0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), iv);
    if (ec == std::errc() && ptr == raw.data() + raw.size()) {
      v.kind = TomlValue::Kind::Int;
      v.int_value = iv;
      return v;
    }
  }
  try {
    size_t used = 0;
    double dv = std::stod(raw, &used);
    if (used == raw.size()) {
      v.kind = TomlValue::Kind::Float;
      v.float_value = dv;
      return v;
    }
  } catch (const std::exception&) {
  }
  throw ParseError("line " + std::to_string(line) + ": cannot parse value '" + raw + "'");
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ParseError("line " + std::to_string(line_no) + ": unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty())
        throw ParseError("line " + std::to_string(line_no) + ": empty section name");
      table[section];
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty())
      throw ParseError("line " + std::to_string(line_no) + ": empty key");
    if (section.empty())
      throw ParseError("line " + std::to_string(line_no) + ": key outside any [section]");
    if (table[section].count(key))
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    table[section][key] = parse_value(value, line_no);
  }
  return table;
}

TomlTable parse_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str());
}

namespace {

// Schema-driven binder: consumed keys are tracked so anything left over is
// reported as unknown, and every violation is collected before throwing.
class Binder {
 public:
  explicit Binder(const TomlTable& table) : table_(table) {}

  bool has(const std::string& section, const std::string& key) {
    auto s = table_.find(section);
    return s != table_.end() && s->second.count(key) > 0;
  }

  int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) {
    const TomlValue* v = fetch(section, key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::Int) {
      errors_.push_back(section + "." + key + ": expected integer");
      return fallback;
    }
    return v->int_value;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) {
    const TomlValue* v = fetch(section, key);
    if (!v) return fallback;
    if (v->kind == TomlValue::Kind::Float) return v->float_value;
    if (v->kind == TomlValue::Kind::Int) return static_cast<double>(v->int_value);
    errors_.push_back(section + "." + key + ": expected number");
    return fallback;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) {
    const TomlValue* v = fetch(section, key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::Str) {
      errors_.push_back(section + "." + key + ": expected string");
      return fallback;
    }
    return v->str_value;
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) {
    const TomlValue* v = fetch(section, key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::Bool) {
      errors_.push_back(section + "." + key + ": expected true/false");
      return fallback;
    }
    return v->bool_value;
  }

  void note_error(const std::string& msg) { errors_.push_back(msg); }

  void finish() {
    for (const auto& [section, entries] : table_) {
      if (!known_sections_.count(section)) {
        errors_.push_back("unknown section [" + section + "]");
        continue;
      }
      for (const auto& [key, value] : entries)
        if (!consumed_.count(section + "." + key))
          errors_.push_back("unknown key " + section + "." + key);
    }
    if (!errors_.empty()) {
      std::string msg = "invalid config:";
      for (const auto& e : errors_) msg += "\n  - " + e;
      throw ConfigError(msg);
    }
  }

  void register_section(const std::string& section) { known_sections_.insert(section); }

 private:
  const TomlValue* fetch(const std::string& section, const std::string& key) {
    known_sections_.insert(section);
    consumed_.insert(section + "." + key);
    auto s = table_.find(section);
    if (s == table_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    return &k->second;
  }

  const TomlTable& table_;
  std::set<std::string> known_sections_;
  std::set<std::string> consumed_;
  std::vector<std::string> errors_;
};

}  // namespace

RunConfig load_run_config(const std::string& path) {
  TomlTable table = parse_toml_file(path);
  Binder b(table);
  RunConfig cfg;

  cfg.data.topic_count = static_cast<int>(b.get_int("data", "topic_count", 32));
  cfg.data.vocab_size = static_cast<int>(b.get_int("data", "vocab_size", 2000));
  cfg.data.doc_length_min = static_cast<int>(b.get_int("data", "doc_length_min", 24));
  cfg.data.doc_length_max = static_cast<int>(b.get_int("data", "doc_length_max", 48));
  cfg.data.query_length_min = static_cast<int>(b.get_int("data", "query_length_min", 5));
  cfg.data.query_length_max = static_cast<int>(b.get_int("data", "query_length_max", 12));
  cfg.data.sts_score_levels = static_cast<int>(b.get_int("data", "sts_score_levels", 5));
  cfg.data.records_per_task = static_cast<int>(b.get_int("data", "records_per_task", 8000));
  cfg.data.eval_records_per_task =
      static_cast<int>(b.get_int("data", "eval_records_per_task", 500));
  cfg.data.seed = static_cast<uint64_t>(b.get_int("data", "seed", 7));
  std::string manifest = b.get_string("data", "manifest", "");

  auto& sam = cfg.train.sam;
  sam.device_count = static_cast<int>(b.get_int("sampler", "device_count", 4));
  sam.batch_size_ir = static_cast<int>(b.get_int("sampler", "batch_size_ir", 8));
  sam.batch_size_sts = static_cast<int>(b.get_int("sampler", "batch_size_sts", 8));
  sam.ratio_ir = static_cast<int>(b.get_int("sampler", "ratio_ir", 1));
  sam.ratio_sts = static_cast<int>(b.get_int("sampler", "ratio_sts", 1));
  sam.seed = static_cast<uint64_t>(b.get_int("sampler", "seed", 11));
  std::string mode = b.get_string("sampler", "mode", "codiemb");
  try {
    sam.mode = sampler::mode_from_name(mode);
  } catch (const ConfigError& e) {
    b.note_error(e.what());
  }

  auto& enc = cfg.train.enc;
  enc.vocab_size = static_cast<int>(b.get_int("encoder", "vocab_size", cfg.data.vocab_size));
  enc.dim = static_cast<int>(b.get_int("encoder", "dim", 32));
  enc.layer_count = static_cast<int>(b.get_int("encoder", "layer_count", 2));
  enc.mid_layer_index = static_cast<int>(
      b.get_int("encoder", "mid_layer_index", (enc.layer_count + 1) / 2));
  enc.init_seed = static_cast<uint64_t>(b.get_int("encoder", "init_seed", 1));
  enc.init_scale = b.get_double("encoder", "init_scale", 0.1);
  cfg.train.masked_prefix_tokens =
      static_cast<int>(b.get_int("encoder", "masked_prefix_tokens", 1));
  std::string pooling = b.get_string("encoder", "pooling", "mean");
  try {
    enc.pooling = encoder::pooling_from_name(pooling);
  } catch (const ConfigError& e) {
    b.note_error(e.what());
  }

  auto& sts = cfg.train.sts;
  sts.alpha = b.get_double("losses", "alpha", 1.0);
  sts.beta = b.get_double("losses", "beta", 1.0);
  sts.gamma = b.get_double("losses", "gamma", 1.0);
  sts.lambda = b.get_double("losses", "lambda", 0.1);
  sts.tau_rankkl = b.get_double("losses", "tau_rankkl", 0.05);
  sts.tau_pro = b.get_double("losses", "tau_pro", 1.0);
  sts.tau_midnce = b.get_double("losses", "tau_midnce", 0.05);
  sts.tau_ir = b.get_double("losses", "tau_ir", 0.05);
  sts.midnce_threshold = b.get_double("losses", "midnce_threshold", 0.5);
  cfg.train.tau_cosent = b.get_double("losses", "tau_cosent", 0.05);
  cfg.train.k_pos = static_cast<int>(b.get_int("losses", "k_pos", 2));
  cfg.train.k_neg = static_cast<int>(b.get_int("losses", "k_neg", 2));

  cfg.train.adam.lr = b.get_double("optimizer", "lr", 0.02);
  cfg.train.adam.beta1 = b.get_double("optimizer", "beta1", 0.9);
  cfg.train.adam.beta2 = b.get_double("optimizer", "beta2", 0.999);
  cfg.train.adam.eps = b.get_double("optimizer", "eps", 1e-8);

  cfg.train.total_steps = static_cast<int>(b.get_int("train", "total_steps", 1000));
  cfg.train.eval_every = static_cast<int>(b.get_int("train", "eval_every", 200));
  cfg.train.checkpoint_every = static_cast<int>(b.get_int("train", "checkpoint_every", 0));
  cfg.train.run_seed = static_cast<uint64_t>(b.get_int("train", "seed", 3));
  cfg.train.eval_k = static_cast<int>(b.get_int("train", "eval_k", 10));
  std::string loss_mode = b.get_string("train", "loss_mode", "codiemb");
  try {
    cfg.train.loss_mode = trainer::loss_mode_from_name(loss_mode);
  } catch (const ConfigError& e) {
    b.note_error(e.what());
  }

  cfg.fusion.tau_fuse = b.get_double("fusion", "tau_fuse", 1.0);
  cfg.fusion.standardize_deltas = b.get_bool("fusion", "standardize_deltas", true);

  // Validate numeric constraints through the module validators, folding
  // their messages into the collected error list.
  try {
    corpus::validate_synth_config(cfg.data);
  } catch (const std::exception& e) {
    b.note_error(std::string("data: ") + e.what());
  }
  try {
    trainer::validate_train_config(cfg.train);
  } catch (const std::exception& e) {
    b.note_error(std::string("train: ") + e.what());
  }
  if (!(cfg.fusion.tau_fuse > 0)) b.note_error("fusion.tau_fuse must be positive");
  b.finish();

  if (!manifest.empty()) {
    fs::path base = fs::path(path).parent_path();
    cfg.manifest_path = (base / manifest).lexically_normal().string();
  }
  return cfg;
}

void override_seed(RunConfig& cfg, uint64_t seed) {
  cfg.data.seed = seed;
  cfg.train.sam.seed = seed;
  cfg.train.enc.init_seed = seed;
  cfg.train.run_seed = seed;
}

}  // namespace codiemb::config
