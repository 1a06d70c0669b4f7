// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include "codiemb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "codiemb/losses.hpp"

namespace codiemb::metrics {

double ndcg_at_k(std::span<const double> ranked_relevances, std::span<const double> ideal_pool,
                 int k) {
  if (k < 1) throw ContractError("ndcg_at_k needs k >= 1");
  if (ideal_pool.empty()) throw DegenerateInputError("ndcg_at_k with empty ideal pool");

  Vec ideal(ideal_pool.begin(), ideal_pool.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());

  double dcg = 0.0;
  for (size_t i = 0; i < ranked_relevances.size() && i < static_cast<size_t>(k); ++i)
    dcg += ranked_relevances[i] / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  for (size_t i = 0; i < ideal.size() && i < static_cast<size_t>(k); ++i)
    idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);

  if (idcg == 0.0) return 0.0;  // no relevant documents
  return dcg / idcg;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("pearson length mismatch");
  const int n = static_cast<int>(a.size());
  if (n < 2) throw DegenerateInputError("pearson needs at least 2 points");
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (int i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateInputError("pearson of constant list");
  return sab / std::sqrt(saa * sbb);
}

double spearman(std::span<const double> predictions, std::span<const double> labels) {
  Vec rp = losses::average_ranks(predictions);
  Vec rl = losses::average_ranks(labels);
  return pearson(rp, rl);
}

IrEvalResult evaluate_ir(const EmbedFn& embed, const std::vector<corpus::UnifiedRecord>& records,
                         int k) {
  if (records.empty()) throw DegenerateInputError("evaluate_ir on empty corpus");

  // Deduplicated document pool; ids assigned in first-seen order.
  std::map<std::string, int> doc_ids;
  std::vector<const std::string*> docs;
  auto intern = [&](const std::string& text) {
    auto [it, inserted] = doc_ids.try_emplace(text, static_cast<int>(docs.size()));
    if (inserted) docs.push_back(&it->first);
    return it->second;
  };
  std::vector<std::vector<int>> positives_of(records.size());
  for (size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.positives.empty())
      throw ValidationError("evaluate_ir record without positives");
    for (const auto& p : rec.positives) positives_of[r].push_back(intern(p));
    for (const auto& ng : rec.negatives) intern(ng);
  }

  std::vector<Vec> doc_embs(docs.size());
  for (size_t i = 0; i < docs.size(); ++i) doc_embs[i] = embed(*docs[i]);

  IrEvalResult res;
  res.pool_size = static_cast<int>(docs.size());
  double total = 0.0;
  for (size_t r = 0; r < records.size(); ++r) {
    Vec q = embed(records[r].query);
    std::vector<std::pair<double, int>> scored(docs.size());
    for (size_t i = 0; i < docs.size(); ++i)
      scored[i] = {losses::cosine(q, doc_embs[i]), static_cast<int>(i)};
    // descending cosine, ties by ascending document id
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });

    std::vector<bool> is_pos(docs.size(), false);
    for (int p : positives_of[r]) is_pos[p] = true;
    Vec ranked(docs.size());
    for (size_t i = 0; i < scored.size(); ++i) ranked[i] = is_pos[scored[i].second] ? 1.0 : 0.0;
    Vec pool(docs.size(), 0.0);
    for (size_t i = 0; i < positives_of[r].size(); ++i) pool[i] = 1.0;
    total += ndcg_at_k(ranked, pool, k);
  }
  res.query_count = static_cast<int>(records.size());
  res.mean_ndcg = total / records.size();
  return res;
}

StsEvalResult evaluate_sts(const EmbedFn& embed,
                           const std::vector<corpus::UnifiedRecord>& records) {
  if (records.empty()) throw DegenerateInputError("evaluate_sts on empty corpus");
  Vec predicted, labels;
  predicted.reserve(records.size());
  labels.reserve(records.size());
  for (const auto& rec : records) {
    if (rec.task != corpus::TaskKind::STS || rec.positives.size() != 1 ||
        rec.positive_scores.size() != 1)
      throw ValidationError("evaluate_sts expects STS records");
    Vec a = embed(rec.query);
    Vec b = embed(rec.positives[0]);
    predicted.push_back(losses::cosine(a, b));
    labels.push_back(rec.positive_scores[0]);
  }
  StsEvalResult res;
  res.pair_count = static_cast<int>(records.size());
  res.spearman_x100 = spearman(predicted, labels) * 100.0;
  return res;
}

}  // namespace codiemb::metrics
