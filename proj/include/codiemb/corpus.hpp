// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codiemb/errors.hpp"

namespace codiemb::corpus {

enum class TaskKind { IR, STS };

std::string task_name(TaskKind t);
TaskKind task_from_name(const std::string& name);

// One training example in the task-agnostic wire format.
// STS pairs map to (query, positives[0], positive_scores[0]); IR examples
// carry a positive set, an optional hard-negative set and optional scores.
struct UnifiedRecord {
  TaskKind task = TaskKind::IR;
  std::string query;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  std::vector<double> positive_scores;
  std::vector<double> negative_scores;
};

// Throws ValidationError if the record breaks a task invariant.
void validate_record(const UnifiedRecord& rec);

// Parses one JSONL line.  ParseError for malformed syntax (message carries
// the byte offset reported by the JSON parser), ValidationError for records
// that violate task invariants.  Missing keys become empty lists.
UnifiedRecord parse_record(const std::string& line);

// Canonical single-line JSON; empty lists are omitted.
std::string serialize_record(const UnifiedRecord& rec);

// Maps a raw label from [lo, hi] onto [0, 1].
double normalize_score(double y, double lo, double hi);

// Builds an STS record from a scored sentence pair; y must already be
// normalized to [0, 1].
UnifiedRecord from_sts_triple(const std::string& x1, const std::string& x2, double y);

struct SynthConfig {
  int topic_count = 32;
  int vocab_size = 2000;
  int doc_length_min = 24;
  int doc_length_max = 48;
  int query_length_min = 5;
  int query_length_max = 12;
  int sts_score_levels = 5;
  int records_per_task = 8000;
  int eval_records_per_task = 500;
  uint64_t seed = 7;
};

void validate_synth_config(const SynthConfig& cfg);

struct SynthOutput {
  std::vector<UnifiedRecord> ir_train;
  std::vector<UnifiedRecord> sts_train;
  std::vector<UnifiedRecord> ir_eval;
  std::vector<UnifiedRecord> sts_eval;
};

// Planted-topic generator.  Each topic owns a token window over the content
// vocabulary; IR relevance is same-topic with hard negatives drawn from the
// nearest topic, STS labels are the quantized overlap of two-topic mixtures.
// Texts carry a leading task-prefix token (id 0 for IR, 1 for STS) that the
// encoder masks from pooling.  Deterministic given cfg.seed.
SynthOutput generate_synthetic(const SynthConfig& cfg);

// Whitespace tokenizer over the integer-token vocabulary.
std::vector<int> tokenize(const std::string& text, int vocab_size);

struct Dataset {
  std::string name;
  TaskKind task = TaskKind::IR;
  std::string split;  // "train" | "eval"
  std::vector<UnifiedRecord> records;
};

std::vector<UnifiedRecord> load_records(const std::string& path);
void save_records(const std::vector<UnifiedRecord>& recs, const std::string& path);

struct ManifestEntry {
  std::string path;
  TaskKind task = TaskKind::IR;
  std::string split;
};

struct Manifest {
  std::vector<ManifestEntry> datasets;
  int batch_size_ir = 8;
  int batch_size_sts = 8;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

}  // namespace codiemb::corpus
