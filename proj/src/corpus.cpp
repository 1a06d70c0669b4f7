// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include "codiemb/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "codiemb/rng.hpp"

namespace codiemb::corpus {

using nlohmann::json;

std::string task_name(TaskKind t) { return t == TaskKind::IR ? "IR" : "STS"; }

TaskKind task_from_name(const std::string& name) {
  if (name == "IR") return TaskKind::IR;
  if (name == "STS") return TaskKind::STS;
  throw ValidationError("unknown task kind: '" + name + "' (expected IR or STS)");
}

void validate_record(const UnifiedRecord& rec) {
  if (rec.task == TaskKind::STS) {
    if (rec.positives.size() != 1)
      throw ValidationError("STS requires exactly one positive, got " +
                            std::to_string(rec.positives.size()));
    if (!rec.negatives.empty())
      throw ValidationError("STS requires zero negatives, got " +
                            std::to_string(rec.negatives.size()));
    if (rec.positive_scores.size() != 1)
      throw ValidationError("STS requires exactly one positive score, got " +
                            std::to_string(rec.positive_scores.size()));
    if (!rec.negative_scores.empty())
      throw ValidationError("STS requires no negative scores");
  } else {
    if (rec.positives.empty()) throw ValidationError("IR requires at least one positive");
    if (!rec.positive_scores.empty() && rec.positive_scores.size() != rec.positives.size())
      throw ValidationError("pos_scores length must match pos length");
    if (!rec.negative_scores.empty() && rec.negative_scores.size() != rec.negatives.size())
      throw ValidationError("neg_scores length must match neg length");
  }
  for (double y : rec.positive_scores)
    if (!(y >= 0.0 && y <= 1.0))
      throw ValidationError("positive score outside [0,1]: " + std::to_string(y));
  for (double y : rec.negative_scores)
    if (!(y >= 0.0 && y <= 1.0))
      throw ValidationError("negative score outside [0,1]: " + std::to_string(y));
}

namespace {

std::vector<std::string> read_string_list(const json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  const json& arr = j.at(key);
  if (!arr.is_array()) throw ParseError(std::string("key '") + key + "' must be an array");
  for (const auto& item : arr) {
    if (!item.is_string())
      throw ParseError(std::string("key '") + key + "' must hold strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::vector<double> read_number_list(const json& j, const char* key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  const json& arr = j.at(key);
  if (!arr.is_array()) throw ParseError(std::string("key '") + key + "' must be an array");
  for (const auto& item : arr) {
    if (!item.is_number())
      throw ParseError(std::string("key '") + key + "' must hold numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

}  // namespace

UnifiedRecord parse_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed record at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("record line must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "t" && k != "q" && k != "pos" && k != "neg" && k != "pos_scores" &&
        k != "neg_scores")
      throw ParseError("unknown record key: '" + k + "'");
  }
  if (!j.contains("t") || !j.at("t").is_string()) throw ParseError("missing string key 't'");
  if (!j.contains("q") || !j.at("q").is_string()) throw ParseError("missing string key 'q'");

  UnifiedRecord rec;
  rec.task = task_from_name(j.at("t").get<std::string>());
  rec.query = j.at("q").get<std::string>();
  rec.positives = read_string_list(j, "pos");
  rec.negatives = read_string_list(j, "neg");
  rec.positive_scores = read_number_list(j, "pos_scores");
  rec.negative_scores = read_number_list(j, "neg_scores");
  validate_record(rec);
  return rec;
}

std::string serialize_record(const UnifiedRecord& rec) {
  json j;
  j["t"] = task_name(rec.task);
  j["q"] = rec.query;
  if (!rec.positives.empty()) j["pos"] = rec.positives;
  if (!rec.negatives.empty()) j["neg"] = rec.negatives;
  if (!rec.positive_scores.empty()) j["pos_scores"] = rec.positive_scores;
  if (!rec.negative_scores.empty()) j["neg_scores"] = rec.negative_scores;
  return j.dump();
}

double normalize_score(double y, double lo, double hi) {
  if (!(hi > lo)) throw ValidationError("label range must satisfy hi > lo");
  return (y - lo) / (hi - lo);
}

UnifiedRecord from_sts_triple(const std::string& x1, const std::string& x2, double y) {
  if (!(y >= 0.0 && y <= 1.0))
    throw ValidationError("STS label outside [0,1]: " + std::to_string(y) +
                          " (normalize with normalize_score first)");
  UnifiedRecord rec;
  rec.task = TaskKind::STS;
  rec.query = x1;
  rec.positives = {x2};
  rec.positive_scores = {y};
  return rec;
}

void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.topic_count < 2) throw ConfigError("topic_count must be >= 2");
  if (cfg.vocab_size < cfg.topic_count + 2)
    throw ConfigError("vocab_size too small for topic_count");
  if (cfg.doc_length_min < 1 || cfg.doc_length_max < cfg.doc_length_min)
    throw ConfigError("invalid doc length range");
  if (cfg.query_length_min < 1 || cfg.query_length_max < cfg.query_length_min)
    throw ConfigError("invalid query length range");
  if (cfg.sts_score_levels < 2) throw ConfigError("sts_score_levels must be >= 2");
  if (cfg.records_per_task < 1) throw ConfigError("records_per_task must be >= 1");
  if (cfg.eval_records_per_task < 1) throw ConfigError("eval_records_per_task must be >= 1");
}

namespace {

// First content token id; ids 0 and 1 are the IR / STS task prefixes.
constexpr int kContentBase = 2;
constexpr double kBackgroundRate = 0.10;

// Planted topic model: topic k owns a token window of width 2*spacing
// starting at k*spacing over the content range (windows wrap around), so
// adjacent topics share half their support.
struct TopicModel {
  int topic_count;
  int content_size;
  int spacing;
  int width;

  explicit TopicModel(const SynthConfig& cfg)
      : topic_count(cfg.topic_count),
        content_size(cfg.vocab_size - kContentBase),
        spacing(std::max(1, (cfg.vocab_size - kContentBase) / cfg.topic_count)),
        width(2 * std::max(1, (cfg.vocab_size - kContentBase) / cfg.topic_count)) {}

  int draw_topic_token(int topic, Rng& rng) const {
    int offset = rng.uniform_int(0, width - 1);
    return kContentBase + (topic * spacing + offset) % content_size;
  }

  int draw_token(int topic, Rng& rng) const {
    if (rng.uniform() < kBackgroundRate) return kContentBase + rng.uniform_int(0, content_size - 1);
    return draw_topic_token(topic, rng);
  }

  // Nearest topic by distance between the latent token distributions; the
  // two direct neighbors tie under the window model, so parity breaks it.
  int nearest_topic(int topic) const {
    int prev = (topic + topic_count - 1) % topic_count;
    int next = (topic + 1) % topic_count;
    return (topic % 2 == 0) ? next : prev;
  }

  std::string make_text(int prefix_token, int topic, int length, Rng& rng) const {
    std::ostringstream out;
    out << prefix_token;
    for (int i = 0; i < length; ++i) out << ' ' << draw_token(topic, rng);
    return out.str();
  }

  // Two-topic mixture text: each token comes from topic_b with probability w.
  std::string make_mixture_text(int prefix_token, int topic_a, int topic_b, double w, int length,
                                Rng& rng) const {
    std::ostringstream out;
    out << prefix_token;
    for (int i = 0; i < length; ++i) {
      int topic = rng.uniform() < w ? topic_b : topic_a;
      out << ' ' << draw_token(topic, rng);
    }
    return out.str();
  }
};

std::vector<UnifiedRecord> make_ir_records(const SynthConfig& cfg, const TopicModel& model,
                                           int count, Rng& rng) {
  std::vector<UnifiedRecord> records;
  records.reserve(count);
  for (int r = 0; r < count; ++r) {
    int topic = r % cfg.topic_count;
    UnifiedRecord rec;
    rec.task = TaskKind::IR;
    int qlen = rng.uniform_int(cfg.query_length_min, cfg.query_length_max);
    rec.query = model.make_text(0, topic, qlen, rng);
    int positives = rng.uniform_int(1, 4);
    for (int p = 0; p < positives; ++p) {
      int dlen = rng.uniform_int(cfg.doc_length_min, cfg.doc_length_max);
      rec.positives.push_back(model.make_text(0, topic, dlen, rng));
    }
    int hard_topic = model.nearest_topic(topic);
    for (int h = 0; h < 2; ++h) {
      int dlen = rng.uniform_int(cfg.doc_length_min, cfg.doc_length_max);
      rec.negatives.push_back(model.make_text(0, hard_topic, dlen, rng));
    }
    // One easy distractor from a non-adjacent topic when the model has one.
    int far_topic = cfg.topic_count >= 4
                        ? (topic + 2 + rng.uniform_int(0, cfg.topic_count - 4)) % cfg.topic_count
                        : hard_topic;
    int dlen = rng.uniform_int(cfg.doc_length_min, cfg.doc_length_max);
    rec.negatives.push_back(model.make_text(0, far_topic, dlen, rng));
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<UnifiedRecord> make_sts_records(const SynthConfig& cfg, const TopicModel& model,
                                            int count, Rng& rng) {
  std::vector<UnifiedRecord> records;
  records.reserve(count);
  const int levels = cfg.sts_score_levels;
  for (int r = 0; r < count; ++r) {
    int topic_a = r % cfg.topic_count;
    int topic_b = (topic_a + 1) % cfg.topic_count;
    // Round-robin levels keep every label value populated (tie-rich).
    int level = r % levels;
    double score = static_cast<double>(level) / (levels - 1);
    // Mixture weights live on the label grid so the planted similarity is
    // exactly the quantized overlap 1 - |w1 - w2|.
    int gap_steps = (levels - 1) - level;
    int w1_steps = rng.uniform_int(0, level);
    int w2_steps = w1_steps + gap_steps;
    double w1 = static_cast<double>(w1_steps) / (levels - 1);
    double w2 = static_cast<double>(w2_steps) / (levels - 1);
    int len1 = rng.uniform_int(cfg.doc_length_min, cfg.doc_length_max);
    int len2 = rng.uniform_int(cfg.doc_length_min, cfg.doc_length_max);
    UnifiedRecord rec = from_sts_triple(model.make_mixture_text(1, topic_a, topic_b, w1, len1, rng),
                                        model.make_mixture_text(1, topic_a, topic_b, w2, len2, rng),
                                        score);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

SynthOutput generate_synthetic(const SynthConfig& cfg) {
  validate_synth_config(cfg);
  TopicModel model(cfg);
  SynthOutput out;
  {
    Rng rng(mix_seed(cfg.seed, 0x49525452));  // IR train stream
    out.ir_train = make_ir_records(cfg, model, cfg.records_per_task, rng);
  }
  {
    Rng rng(mix_seed(cfg.seed, 0x53545452));  // STS train stream
    out.sts_train = make_sts_records(cfg, model, cfg.records_per_task, rng);
  }
  {
    Rng rng(mix_seed(cfg.seed, 0x49524556));  // IR eval stream
    out.ir_eval = make_ir_records(cfg, model, cfg.eval_records_per_task, rng);
  }
  {
    Rng rng(mix_seed(cfg.seed, 0x53544556));  // STS eval stream
    out.sts_eval = make_sts_records(cfg, model, cfg.eval_records_per_task, rng);
  }
  return out;
}

std::vector<int> tokenize(const std::string& text, int vocab_size) {
  std::vector<int> ids;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    int id;
    try {
      size_t used = 0;
      id = std::stoi(word, &used);
      if (used != word.size()) throw std::invalid_argument(word);
    } catch (const std::exception&) {
      throw ParseError("non-integer token: '" + word + "'");
    }
    if (id < 0 || id >= vocab_size)
      throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(vocab_size));
    ids.push_back(id);
  }
  if (ids.empty()) throw ValidationError("empty text");
  return ids;
}

std::vector<UnifiedRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset file: " + path);
  std::vector<UnifiedRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(parse_record(line));
    } catch (const std::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void save_records(const std::vector<UnifiedRecord>& recs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write dataset file: " + path);
  for (const auto& rec : recs) out << serialize_record(rec) << '\n';
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("manifest parse error: " + std::string(e.what()));
  }
  Manifest m;
  m.batch_size_ir = j.at("batch_size").at("IR").get<int>();
  m.batch_size_sts = j.at("batch_size").at("STS").get<int>();
  for (const auto& d : j.at("datasets")) {
    ManifestEntry e;
    e.path = d.at("path").get<std::string>();
    e.task = task_from_name(d.at("task").get<std::string>());
    e.split = d.at("split").get<std::string>();
    if (e.split != "train" && e.split != "eval")
      throw ValidationError("manifest split must be train or eval, got '" + e.split + "'");
    m.datasets.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  json j;
  j["batch_size"]["IR"] = m.batch_size_ir;
  j["batch_size"]["STS"] = m.batch_size_sts;
  j["datasets"] = json::array();
  for (const auto& e : m.datasets) {
    json d;
    d["path"] = e.path;
    d["task"] = task_name(e.task);
    d["split"] = e.split;
    j["datasets"].push_back(d);
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace codiemb::corpus
