// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
//
// Shared finite-difference driver for every loss operation; used by the
// gradient unit tests and by the acceptance suite.
#pragma once

#include <string>
#include <vector>

#include "codiemb/losses.hpp"
#include "test_util.hpp"

namespace codiemb::gradcheck {

using losses::IRBatch;
using losses::PairEmbBatch;
using losses::ScoredPairBatch;

struct OpReport {
  std::string op;
  double max_rel_err = 0.0;
  int instances = 0;
};

inline ScoredPairBatch random_scored_batch(Rng& rng, bool tie_free) {
  int n = rng.uniform_int(2, 8);
  ScoredPairBatch batch;
  batch.predicted = testutil::random_vec(rng, n, -1, 1);
  if (tie_free) {
    batch.labels.resize(n);
    for (int i = 0; i < n; ++i) batch.labels[i] = rng.uniform(0, 1);
  } else {
    batch.labels = testutil::random_tied_labels(rng, n, 4);
  }
  // keep labels away from constant so pearson preconditions hold
  if (*std::min_element(batch.labels.begin(), batch.labels.end()) ==
      *std::max_element(batch.labels.begin(), batch.labels.end()))
    batch.labels[0] = batch.labels[0] < 0.5 ? batch.labels[0] + 0.5 : batch.labels[0] - 0.5;
  return batch;
}

template <typename LossFn>
OpReport check_score_loss(const std::string& name, LossFn&& loss, int instances, uint64_t seed,
                          bool tie_free = false) {
  OpReport report{name, 0.0, instances};
  Rng rng(seed);
  for (int t = 0; t < instances; ++t) {
    ScoredPairBatch batch = random_scored_batch(rng, tie_free);
    losses::ScoreLossResult res = loss(batch);
    auto f = [&](const Vec& x) {
      ScoredPairBatch probe{x, batch.labels};
      return loss(probe).value;
    };
    report.max_rel_err = std::max(
        report.max_rel_err, testutil::finite_diff_max_err(f, batch.predicted, res.d_predicted));
  }
  return report;
}

inline OpReport check_ir_infonce(int instances, uint64_t seed) {
  OpReport report{"ir_infonce_multi", 0.0, instances};
  Rng rng(seed);
  for (int t = 0; t < instances; ++t) {
    int n = rng.uniform_int(1, 4);
    int kp = rng.uniform_int(1, 3);
    int kn = rng.uniform_int(0, 2);
    int d = rng.uniform_int(2, 16);
    double tau = rng.uniform(0.2, 1.0);
    IRBatch batch;
    batch.queries = Matrix(n, d);
    batch.positives = Tensor3(n, kp, d);
    batch.negatives = Tensor3(n, kn, d);
    batch.device_of.assign(n, 0);
    for (int i = 0; i < n; ++i) {
      Vec q = testutil::random_embedding(rng, d);
      std::copy(q.begin(), q.end(), batch.queries.row(i).begin());
      for (int k = 0; k < kp; ++k) {
        Vec p = testutil::random_embedding(rng, d);
        std::copy(p.begin(), p.end(), batch.positives.fiber(i, k).begin());
      }
      for (int k = 0; k < kn; ++k) {
        Vec g = testutil::random_embedding(rng, d);
        std::copy(g.begin(), g.end(), batch.negatives.fiber(i, k).begin());
      }
    }
    losses::IRLossResult res = losses::ir_infonce_multi(batch, tau);

    // flatten (queries | positives | negatives) into one parameter vector
    Vec x = batch.queries.data;
    x.insert(x.end(), batch.positives.data.begin(), batch.positives.data.end());
    x.insert(x.end(), batch.negatives.data.begin(), batch.negatives.data.end());
    Vec g = res.d_queries.data;
    g.insert(g.end(), res.d_positives.data.begin(), res.d_positives.data.end());
    g.insert(g.end(), res.d_negatives.data.begin(), res.d_negatives.data.end());
    auto f = [&](const Vec& flat) {
      IRBatch probe = batch;
      size_t nq = batch.queries.data.size();
      size_t np = batch.positives.data.size();
      std::copy(flat.begin(), flat.begin() + nq, probe.queries.data.begin());
      std::copy(flat.begin() + nq, flat.begin() + nq + np, probe.positives.data.begin());
      std::copy(flat.begin() + nq + np, flat.end(), probe.negatives.data.begin());
      return losses::ir_infonce_multi(probe, tau).value;
    };
    report.max_rel_err = std::max(report.max_rel_err, testutil::finite_diff_max_err(f, x, g));
  }
  return report;
}

template <typename LossFn>
OpReport check_pair_emb_loss(const std::string& name, LossFn&& loss, int instances,
                             uint64_t seed) {
  OpReport report{name, 0.0, instances};
  Rng rng(seed);
  for (int t = 0; t < instances; ++t) {
    int n = rng.uniform_int(1, 6);
    int d = rng.uniform_int(2, 16);
    PairEmbBatch batch;
    batch.left = Matrix(n, d);
    batch.right = Matrix(n, d);
    batch.labels = testutil::random_tied_labels(rng, n, 5);
    for (int i = 0; i < n; ++i) {
      Vec l = testutil::random_embedding(rng, d);
      Vec r = testutil::random_embedding(rng, d);
      std::copy(l.begin(), l.end(), batch.left.row(i).begin());
      std::copy(r.begin(), r.end(), batch.right.row(i).begin());
    }
    losses::PairEmbLossResult res = loss(batch);
    Vec x = batch.left.data;
    x.insert(x.end(), batch.right.data.begin(), batch.right.data.end());
    Vec g = res.d_left.data;
    g.insert(g.end(), res.d_right.data.begin(), res.d_right.data.end());
    auto f = [&](const Vec& flat) {
      PairEmbBatch probe = batch;
      size_t nl = batch.left.data.size();
      std::copy(flat.begin(), flat.begin() + nl, probe.left.data.begin());
      std::copy(flat.begin() + nl, flat.end(), probe.right.data.begin());
      return loss(probe).value;
    };
    report.max_rel_err = std::max(report.max_rel_err, testutil::finite_diff_max_err(f, x, g));
  }
  return report;
}

inline OpReport check_sts_combined(int instances, uint64_t seed) {
  OpReport report{"sts_combined", 0.0, instances};
  Rng rng(seed);
  losses::StsLossWeights w;  // defaults exercise all four components
  w.tau_rankkl = 0.3;
  w.tau_midnce = 0.3;
  for (int t = 0; t < instances; ++t) {
    int n = rng.uniform_int(2, 8);
    int d = rng.uniform_int(2, 12);
    ScoredPairBatch fin;
    fin.predicted = testutil::random_vec(rng, n, -1, 1);
    fin.labels = testutil::random_tied_labels(rng, n, 4);
    if (*std::min_element(fin.labels.begin(), fin.labels.end()) ==
        *std::max_element(fin.labels.begin(), fin.labels.end()))
      fin.labels[0] = fin.labels[0] < 0.5 ? 1.0 : 0.0;
    PairEmbBatch mid;
    mid.left = Matrix(n, d);
    mid.right = Matrix(n, d);
    mid.labels = fin.labels;
    for (int i = 0; i < n; ++i) {
      Vec l = testutil::random_embedding(rng, d);
      Vec r = testutil::random_embedding(rng, d);
      std::copy(l.begin(), l.end(), mid.left.row(i).begin());
      std::copy(r.begin(), r.end(), mid.right.row(i).begin());
    }
    losses::StsCombinedResult res = losses::sts_combined(fin, mid, w);

    Vec x = fin.predicted;
    x.insert(x.end(), mid.left.data.begin(), mid.left.data.end());
    x.insert(x.end(), mid.right.data.begin(), mid.right.data.end());
    Vec g = res.d_predicted;
    g.insert(g.end(), res.d_left_mid.data.begin(), res.d_left_mid.data.end());
    g.insert(g.end(), res.d_right_mid.data.begin(), res.d_right_mid.data.end());
    auto f = [&](const Vec& flat) {
      ScoredPairBatch pf;
      pf.predicted.assign(flat.begin(), flat.begin() + n);
      pf.labels = fin.labels;
      PairEmbBatch pm = mid;
      size_t nl = mid.left.data.size();
      std::copy(flat.begin() + n, flat.begin() + n + nl, pm.left.data.begin());
      std::copy(flat.begin() + n + nl, flat.end(), pm.right.data.begin());
      return losses::sts_combined(pf, pm, w).value;
    };
    report.max_rel_err = std::max(report.max_rel_err, testutil::finite_diff_max_err(f, x, g));
  }
  return report;
}

// Runs the complete per-op gradient suite (the acceptance criterion's body).
inline std::vector<OpReport> full_suite(int instances, uint64_t seed) {
  std::vector<OpReport> reports;
  reports.push_back(check_ir_infonce(instances, seed + 1));
  reports.push_back(check_score_loss(
      "pearson_loss", [](const ScoredPairBatch& b) { return losses::pearson_loss(b); },
      instances, seed + 2));
  reports.push_back(check_score_loss(
      "rank_kl_loss", [](const ScoredPairBatch& b) { return losses::rank_kl_loss(b, 0.3); },
      instances, seed + 3));
  reports.push_back(check_score_loss(
      "pro_loss", [](const ScoredPairBatch& b) { return losses::pro_loss(b, 1.0); }, instances,
      seed + 4));
  reports.push_back(check_pair_emb_loss(
      "mid_nce_loss",
      [](const PairEmbBatch& b) { return losses::mid_nce_loss(b, 0.5, 0.3); }, instances,
      seed + 5));
  reports.push_back(check_pair_emb_loss(
      "infonce_baseline",
      [](const PairEmbBatch& b) { return losses::infonce_baseline(b, 0.5, 0.3); }, instances,
      seed + 6));
  reports.push_back(check_score_loss(
      "cosent_loss", [](const ScoredPairBatch& b) { return losses::cosent_loss(b, 0.5); },
      instances, seed + 7));
  reports.push_back(check_score_loss(
      "ranknet_loss", [](const ScoredPairBatch& b) { return losses::ranknet_loss(b); },
      instances, seed + 8));
  reports.push_back(check_sts_combined(instances, seed + 9));
  return reports;
}

}  // namespace codiemb::gradcheck
