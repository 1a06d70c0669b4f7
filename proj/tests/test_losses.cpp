// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "codiemb/losses.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace codiemb;
using namespace codiemb::losses;
using doctest::Approx;

TEST_CASE("cosine basics") {
  Vec e1 = {1, 0, 0};
  Vec e2 = {0, 1, 0};
  CHECK(cosine(e1, e1) == Approx(1.0));
  CHECK(cosine(e1, e2) == Approx(0.0));
  Vec a = {1, 1};
  Vec b = {1, 0};
  CHECK(cosine(a, b) == Approx(0.7071067811865475).epsilon(1e-12));
  Vec zero = {0, 0};
  CHECK_THROWS_AS(cosine(zero, b), DegenerateInputError);
}

TEST_CASE("softmax_temp reproduces the published batch examples") {
  Vec pa = softmax_temp(Vec{0.9, 0.88, 0.2}, 0.1);
  CHECK(std::abs(pa[0] - 0.5496) < 5e-4);
  CHECK(std::abs(pa[1] - 0.4499) < 5e-4);
  CHECK(std::abs(pa[2] - 0.0005) < 5e-4);
  Vec pb = softmax_temp(Vec{0.6, 0.2, 0.1}, 0.1);
  CHECK(std::abs(pb[0] - 0.9756) < 5e-4);
  CHECK(std::abs(pb[1] - 0.0179) < 5e-4);
  CHECK(std::abs(pb[2] - 0.0066) < 5e-4);

  Vec uniform = softmax_temp(Vec{0.3, 0.3, 0.3, 0.3}, 0.7);
  for (double p : uniform) CHECK(p == Approx(0.25).epsilon(1e-12));
  double sum = pa[0] + pa[1] + pa[2];
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("average_ranks handles ties with mean positions") {
  CHECK(average_ranks(Vec{0.9, 0.5, 0.1}) == Vec{0, 1, 2});
  CHECK(average_ranks(Vec{1, 1, 0}) == Vec{0.5, 0.5, 2});
  CHECK(average_ranks(Vec{0.4, 0.4, 0.4, 0.4}) == Vec{1.5, 1.5, 1.5, 1.5});
}

TEST_CASE("pearson_loss endpoints and oracle case") {
  ScoredPairBatch same{{0.1, 0.4, 0.9}, {0.1, 0.4, 0.9}};
  CHECK(pearson_loss(same).value == Approx(0.0).epsilon(1e-12));

  ScoredPairBatch flipped{{0.9, 0.6, 0.1}, {0.1, 0.4, 0.9}};
  // exactly anti-correlated after the affine flip
  Vec neg;
  for (double y : flipped.labels) neg.push_back(1.0 - y);
  ScoredPairBatch anti{neg, flipped.labels};
  CHECK(pearson_loss(anti).value == Approx(2.0).epsilon(1e-12));

  ScoredPairBatch mixed{{0.1, 0.4, 0.9}, {0.0, 0.5, 1.0}};
  CHECK(pearson_loss(mixed).value ==
        Approx(1.0 - oracle::pearson_r(mixed.predicted, mixed.labels)).epsilon(1e-12));

  CHECK_THROWS_AS(pearson_loss(ScoredPairBatch{{0.5, 0.5}, {0, 1}}), DegenerateInputError);
  CHECK_THROWS_AS(pearson_loss(ScoredPairBatch{{0.1, 0.6}, {1, 1}}), DegenerateInputError);
}

TEST_CASE("pearson_loss is invariant to positive affine transforms") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    int n = rng.uniform_int(3, 8);
    ScoredPairBatch batch{testutil::random_vec(rng, n), testutil::random_vec(rng, n, 0, 1)};
    double a = rng.uniform(0.1, 3.0);
    double b = rng.uniform(-1.0, 1.0);
    ScoredPairBatch scaled = batch;
    for (double& x : scaled.predicted) x = a * x + b;
    CHECK(pearson_loss(scaled).value == Approx(pearson_loss(batch).value).epsilon(1e-9));
  }
}

TEST_CASE("rank_kl_loss matches the tie oracle and stays non-negative") {
  ScoredPairBatch tied{{0.8, 0.7, 0.1}, {1, 1, 0}};
  double expected = oracle::rank_kl(tied.predicted, tied.labels, 0.5);
  CHECK(rank_kl_loss(tied, 0.5).value == Approx(expected).epsilon(1e-12));

  // y' for [1,1,0] is [0.75, 0.75, 0]
  Vec ranks = average_ranks(tied.labels);
  CHECK(((2.0 - ranks[0]) / 2.0) == Approx(0.75));
  CHECK(((2.0 - ranks[2]) / 2.0) == Approx(0.0));

  // perfect agreement: predictions equal to the normalized rank targets
  int n = 3;
  Vec target(n);
  for (int i = 0; i < n; ++i) target[i] = ((n - 1) - ranks[i]) / (n - 1);
  CHECK(rank_kl_loss(ScoredPairBatch{target, tied.labels}, 0.3).value ==
        Approx(0.0).epsilon(1e-12));

  // shift invariance
  ScoredPairBatch shifted = tied;
  for (double& x : shifted.predicted) x += 0.37;
  CHECK(rank_kl_loss(shifted, 0.5).value == Approx(rank_kl_loss(tied, 0.5).value).epsilon(1e-12));

  CHECK_THROWS_AS(rank_kl_loss(ScoredPairBatch{{0.5}, {1.0}}, 0.5), DegenerateInputError);

  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    int bn = rng.uniform_int(2, 8);
    ScoredPairBatch batch{testutil::random_vec(rng, bn),
                          testutil::random_tied_labels(rng, bn)};
    CHECK(rank_kl_loss(batch, 0.2).value >= -1e-12);
  }
}

TEST_CASE("pro_loss spec examples") {
  ScoredPairBatch single{{0.4}, {1.0}};
  CHECK(pro_loss(single, 1.0).value == Approx(0.0));

  ScoredPairBatch two{{0.3, 0.3}, {1.0, 0.0}};
  CHECK(pro_loss(two, 1.0).value == Approx(std::log(2.0)).epsilon(1e-12));

  ScoredPairBatch three{{0.9, 0.2, 0.8}, {1.0, 0.5, 0.0}};
  // anchor temperatures: T_1^2 = 2, T_1^3 = 1, T_1^1 = 1; T_2^3 = T_2^2 = 2
  double t1 = -std::log(std::exp(0.9 / 1.0) /
                        (std::exp(0.9 / 1.0) + std::exp(0.2 / 2.0) + std::exp(0.8 / 1.0)));
  double t2 = -std::log(std::exp(0.2 / 2.0) / (std::exp(0.2 / 2.0) + std::exp(0.8 / 2.0)));
  CHECK(pro_loss(three, 1.0).value == Approx((t1 + t2) / 2.0).epsilon(1e-12));
  CHECK(pro_loss(three, 1.0).value ==
        Approx(oracle::pro(three.predicted, three.labels, 1.0)).epsilon(1e-12));
}

TEST_CASE("pro_loss ties and shift invariance") {
  Rng rng(47);
  for (int trial = 0; trial < 30; ++trial) {
    int n = rng.uniform_int(2, 8);
    ScoredPairBatch batch{testutil::random_vec(rng, n), testutil::random_tied_labels(rng, n)};
    double tau = rng.uniform(0.3, 2.0);
    CHECK(pro_loss(batch, tau).value ==
          Approx(oracle::pro(batch.predicted, batch.labels, tau)).epsilon(1e-10));
    ScoredPairBatch shifted = batch;
    for (double& x : shifted.predicted) x += 0.73;
    CHECK(pro_loss(shifted, tau).value == Approx(pro_loss(batch, tau).value).epsilon(1e-9));
  }
  // all labels tied: every anchor drops out
  ScoredPairBatch tied{{0.9, 0.1, 0.4}, {0.5, 0.5, 0.5}};
  CHECK(pro_loss(tied, 1.0).value == Approx(0.0));
}

TEST_CASE("cosent_loss examples and oracle") {
  ScoredPairBatch tied{{0.3, 0.8}, {1.0, 1.0}};
  CHECK(cosent_loss(tied, 0.05).value == Approx(0.0));

  ScoredPairBatch two{{0.5, 0.5}, {1.0, 0.0}};
  CHECK(cosent_loss(two, 1.0).value == Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    int n = rng.uniform_int(2, 8);
    ScoredPairBatch batch{testutil::random_vec(rng, n), testutil::random_tied_labels(rng, n)};
    double tau = rng.uniform(0.2, 1.5);
    CHECK(cosent_loss(batch, tau).value ==
          Approx(oracle::cosent(batch.predicted, batch.labels, tau)).epsilon(1e-10));
    ScoredPairBatch shifted = batch;
    for (double& x : shifted.predicted) x -= 0.41;
    CHECK(cosent_loss(shifted, tau).value == Approx(cosent_loss(batch, tau).value).epsilon(1e-9));
  }
}

TEST_CASE("ranknet_loss examples and oracle") {
  ScoredPairBatch flat{{0.2, 0.9}, {0.5, 0.5}};
  CHECK(ranknet_loss(flat).value == Approx(0.0));

  ScoredPairBatch one_pair{{0.4, 0.4}, {1.0, 0.0}};
  CHECK(ranknet_loss(one_pair).value == Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(59);
  for (int trial = 0; trial < 30; ++trial) {
    int n = rng.uniform_int(2, 8);
    ScoredPairBatch batch{testutil::random_vec(rng, n), testutil::random_tied_labels(rng, n)};
    CHECK(ranknet_loss(batch).value ==
          Approx(oracle::ranknet(batch.predicted, batch.labels)).epsilon(1e-10));
  }
}

namespace {

// Wraps library cosine tensors into the oracle's nested-vector layout.
losses::IRCosineLossResult run_ir(const Tensor3& pos, const Tensor3& neg, double tau,
                                  double* oracle_value) {
  std::vector<std::vector<std::vector<double>>> p(pos.n0), g(pos.n0);
  for (int i = 0; i < pos.n0; ++i) {
    p[i].resize(pos.n1);
    g[i].resize(pos.n1);
    for (int j = 0; j < pos.n1; ++j) {
      for (int k = 0; k < pos.n2; ++k) p[i][j].push_back(pos(i, j, k));
      for (int k = 0; k < neg.n2; ++k) g[i][j].push_back(neg(i, j, k));
    }
  }
  *oracle_value = oracle::ir_infonce(p, g, tau);
  return ir_infonce_from_cosines(pos, neg, tau);
}

}  // namespace

TEST_CASE("ir_infonce matches the scalar-expansion oracle") {
  // N=1, K+=1, K-=0: the softmax is trivially 1
  Tensor3 lone(1, 1, 1);
  lone(0, 0, 0) = 0.37;
  Tensor3 none(1, 0, 0);
  CHECK(ir_infonce_from_cosines(lone, none, 0.05).value == Approx(0.0).epsilon(1e-12));

  Rng rng(61);
  for (int trial = 0; trial < 25; ++trial) {
    int n = rng.uniform_int(2, 5);
    int kp = rng.uniform_int(1, 3);
    int kn = rng.uniform_int(0, 3);
    Tensor3 pos(n, n, kp), neg(n, kn > 0 ? n : 0, kn);
    for (double& c : pos.data) c = rng.uniform(-1, 1);
    for (double& c : neg.data) c = rng.uniform(-1, 1);
    double expected = 0.0;
    auto res = run_ir(pos, neg, 0.3, &expected);
    CHECK(res.value == Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("ir_infonce is monotone in each cosine input") {
  Rng rng(67);
  Tensor3 pos(3, 3, 2), neg(3, 3, 2);
  for (double& c : pos.data) c = rng.uniform(-0.9, 0.9);
  for (double& c : neg.data) c = rng.uniform(-0.9, 0.9);
  double base = ir_infonce_from_cosines(pos, neg, 0.2).value;

  // raising an anchor's own positive similarity lowers the loss
  Tensor3 up = pos;
  up(1, 1, 0) += 0.05;
  CHECK(ir_infonce_from_cosines(up, neg, 0.2).value < base);

  // raising any pooled hard-negative similarity raises the loss
  Tensor3 worse = neg;
  worse(2, 0, 1) += 0.05;
  CHECK(ir_infonce_from_cosines(pos, worse, 0.2).value > base);
}

TEST_CASE("ir_infonce_multi is invariant to row permutations") {
  Rng rng(71);
  const int n = 4, kp = 2, kn = 1, d = 6;
  IRBatch batch;
  batch.queries = testutil::random_matrix(rng, n, d);
  batch.positives = Tensor3(n, kp, d);
  batch.negatives = Tensor3(n, kn, d);
  for (double& x : batch.positives.data) x = rng.uniform(-1, 1);
  for (double& x : batch.negatives.data) x = rng.uniform(-1, 1);
  batch.device_of = {0, 0, 1, 1};
  double base = ir_infonce_multi(batch, 0.4).value;

  std::vector<int> perm = {2, 0, 3, 1};
  IRBatch shuffled = batch;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) shuffled.queries(i, j) = batch.queries(perm[i], j);
    for (int k = 0; k < kp; ++k)
      for (int j = 0; j < d; ++j) shuffled.positives(i, k, j) = batch.positives(perm[i], k, j);
    for (int k = 0; k < kn; ++k)
      for (int j = 0; j < d; ++j) shuffled.negatives(i, k, j) = batch.negatives(perm[i], k, j);
    shuffled.device_of[i] = batch.device_of[perm[i]];
  }
  CHECK(ir_infonce_multi(shuffled, 0.4).value == Approx(base).epsilon(1e-12));

  IRBatch empty;
  CHECK_THROWS_AS(ir_infonce_multi(empty, 0.4), DegenerateInputError);
}

TEST_CASE("mid_nce_loss filtering and oracle") {
  Rng rng(73);
  const int d = 5;

  // single row above threshold: softmax over itself
  PairEmbBatch solo;
  solo.left = testutil::random_matrix(rng, 1, d);
  solo.right = testutil::random_matrix(rng, 1, d);
  solo.labels = {0.9};
  CHECK(mid_nce_loss(solo, 0.5, 0.1).value == Approx(0.0).epsilon(1e-12));
  CHECK(mid_nce_loss(solo, 0.5, 0.1).active_rows == 1);

  // every row filtered: zero loss, zero grads
  PairEmbBatch cold = solo;
  cold.labels = {0.1};
  auto res = mid_nce_loss(cold, 0.5, 0.1);
  CHECK(res.value == 0.0);
  CHECK(res.active_rows == 0);
  for (double g : res.d_left.data) CHECK(g == 0.0);

  for (int trial = 0; trial < 25; ++trial) {
    int n = rng.uniform_int(2, 6);
    PairEmbBatch batch;
    batch.left = testutil::random_matrix(rng, n, d);
    batch.right = testutil::random_matrix(rng, n, d);
    batch.labels = testutil::random_tied_labels(rng, n, 5);
    std::vector<Vec> l, r;
    for (int i = 0; i < n; ++i) {
      l.emplace_back(batch.left.row(i).begin(), batch.left.row(i).end());
      r.emplace_back(batch.right.row(i).begin(), batch.right.row(i).end());
    }
    double expected = oracle::filtered_infonce(l, r, batch.labels, 0.5, 0.2);
    CHECK(mid_nce_loss(batch, 0.5, 0.2).value == Approx(expected).epsilon(1e-10));
    CHECK(infonce_baseline(batch, 0.5, 0.2).value == Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("sts_combined composes its components") {
  Rng rng(79);
  const int n = 6, d = 8;
  ScoredPairBatch final_batch{testutil::random_vec(rng, n),
                              testutil::random_tied_labels(rng, n, 5)};
  PairEmbBatch mid;
  mid.left = testutil::random_matrix(rng, n, d);
  mid.right = testutil::random_matrix(rng, n, d);
  mid.labels = final_batch.labels;

  StsLossWeights only_pearson;
  only_pearson.alpha = 1;
  only_pearson.beta = only_pearson.gamma = only_pearson.lambda = 0;
  CHECK(sts_combined(final_batch, mid, only_pearson).value ==
        Approx(pearson_loss(final_batch).value).epsilon(1e-12));

  StsLossWeights only_kl;
  only_kl.alpha = only_kl.gamma = only_kl.lambda = 0;
  only_kl.beta = 0.7;
  CHECK(sts_combined(final_batch, mid, only_kl).value ==
        Approx(0.7 * rank_kl_loss(final_batch, only_kl.tau_rankkl).value).epsilon(1e-12));

  StsLossWeights w;  // defaults: alpha=beta=gamma=1, lambda=0.1
  double assembled = w.alpha * pearson_loss(final_batch).value +
                     w.beta * rank_kl_loss(final_batch, w.tau_rankkl).value +
                     w.gamma * pro_loss(final_batch, w.tau_pro).value +
                     w.lambda * mid_nce_loss(mid, w.midnce_threshold, w.tau_midnce).value;
  CHECK(sts_combined(final_batch, mid, w).value == Approx(assembled).epsilon(1e-12));

  StsLossWeights bad;
  bad.alpha = bad.beta = bad.gamma = bad.lambda = 0;
  CHECK_THROWS_AS(sts_combined(final_batch, mid, bad), ConfigError);
}

TEST_CASE("minimizing rank_kl or pro by gradient descent recovers the ranking") {
  Rng rng(83);
  for (int trial = 0; trial < 5; ++trial) {
    int n = 8;
    // tie-free labels
    Vec labels = testutil::random_vec(rng, n, 0, 1);
    for (int loss_kind = 0; loss_kind < 2; ++loss_kind) {
      Vec predicted = testutil::random_vec(rng, n, -1, 1);
      for (int step = 0; step < 500; ++step) {
        ScoredPairBatch batch{predicted, labels};
        ScoreLossResult res = loss_kind == 0 ? rank_kl_loss(batch, 0.5) : pro_loss(batch, 1.0);
        for (int i = 0; i < n; ++i) predicted[i] -= 1.0 * res.d_predicted[i];
      }
      CHECK(oracle::spearman(predicted, labels) >= 0.99);
    }
  }
}
