// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include "codiemb/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "codiemb/errors.hpp"

namespace codiemb::losses {

namespace {

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double norm(std::span<const double> u) { return std::sqrt(dot(u, u)); }

void check_scored_batch(const ScoredPairBatch& batch) {
  if (batch.predicted.empty()) throw DegenerateInputError("empty score batch");
  if (batch.predicted.size() != batch.labels.size())
    throw ContractError("predicted/labels length mismatch");
}

// log(sum_i exp(x_i)) with max-subtraction.
double log_sum_exp(std::span<const double> x) {
  double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ContractError("cosine: dimension mismatch");
  double nu = norm(u);
  double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw DegenerateInputError("cosine of zero-norm vector");
  return dot(u, v) / (nu * nv);
}

CosineResult cosine_with_grad(std::span<const double> u, std::span<const double> v) {
  CosineResult r;
  r.value = cosine(u, v);
  r.d_u.assign(u.size(), 0.0);
  r.d_v.assign(v.size(), 0.0);
  accumulate_cosine_grad(u, v, 1.0, r.d_u, r.d_v);
  return r;
}

void accumulate_cosine_grad(std::span<const double> u, std::span<const double> v, double g,
                            std::span<double> du, std::span<double> dv) {
  double nu = norm(u);
  double nv = norm(v);
  double c = dot(u, v) / (nu * nv);
  double inv = 1.0 / (nu * nv);
  double cu = c / (nu * nu);
  double cv = c / (nv * nv);
  for (size_t i = 0; i < u.size(); ++i) {
    du[i] += g * (v[i] * inv - cu * u[i]);
    dv[i] += g * (u[i] * inv - cv * v[i]);
  }
}

Vec softmax_temp(std::span<const double> scores, double tau) {
  if (scores.empty()) throw DegenerateInputError("softmax of empty list");
  if (!(tau > 0.0)) throw ContractError("softmax temperature must be positive");
  double m = *std::max_element(scores.begin(), scores.end());
  Vec out(scores.size());
  double z = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - m) / tau);
    z += out[i];
  }
  for (double& p : out) p /= z;
  return out;
}

Vec average_ranks(std::span<const double> labels) {
  if (labels.empty()) throw DegenerateInputError("ranks of empty list");
  const int n = static_cast<int>(labels.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (labels[a] != labels[b]) return labels[a] > labels[b];
    return a < b;
  });
  Vec ranks(n, 0.0);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && labels[order[j]] == labels[order[i]]) ++j;
    double mean_rank = 0.5 * (i + j - 1);
    for (int t = i; t < j; ++t) ranks[order[t]] = mean_rank;
    i = j;
  }
  return ranks;
}

ScoreLossResult pearson_loss(const ScoredPairBatch& batch) {
  check_scored_batch(batch);
  const auto& x = batch.predicted;
  const auto& y = batch.labels;
  const int n = static_cast<int>(x.size());
  if (n < 2) throw DegenerateInputError("pearson_loss needs at least 2 pairs");
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw DegenerateInputError("pearson_loss: predictions have zero variance");
  if (syy == 0.0) throw DegenerateInputError("pearson_loss: labels have zero variance");
  double sx = std::sqrt(sxx);
  double sy = std::sqrt(syy);
  double r = sxy / (sx * sy);

  ScoreLossResult res;
  res.value = 1.0 - r;
  res.d_predicted.assign(n, 0.0);
  // dr/dx_i = (y_i - my)/(sx*sy) - r*(x_i - mx)/sx^2; loss = 1 - r.
  for (int i = 0; i < n; ++i)
    res.d_predicted[i] = -((y[i] - my) / (sx * sy) - r * (x[i] - mx) / sxx);
  return res;
}

ScoreLossResult rank_kl_loss(const ScoredPairBatch& batch, double tau) {
  check_scored_batch(batch);
  const int n = static_cast<int>(batch.predicted.size());
  if (n < 2) throw DegenerateInputError("rank_kl_loss needs at least 2 pairs");
  Vec ranks = average_ranks(batch.labels);
  Vec target(n);
  for (int i = 0; i < n; ++i) target[i] = ((n - 1) - ranks[i]) / (n - 1);
  Vec p = softmax_temp(target, tau);               // constant, no gradient
  Vec q = softmax_temp(batch.predicted, tau);

  ScoreLossResult res;
  res.value = 0.0;
  for (int i = 0; i < n; ++i) res.value += p[i] * std::log(p[i] / q[i]);
  res.d_predicted.assign(n, 0.0);
  for (int i = 0; i < n; ++i) res.d_predicted[i] = (q[i] - p[i]) / tau;
  return res;
}

ScoreLossResult pro_loss(const ScoredPairBatch& batch, double tau) {
  check_scored_batch(batch);
  if (!(tau > 0.0)) throw ContractError("pro_loss temperature must be positive");
  const int n = static_cast<int>(batch.predicted.size());
  ScoreLossResult res;
  res.d_predicted.assign(n, 0.0);
  if (n == 1) return res;  // no anchors

  // Sort by descending label, carrying predictions; original index as
  // tie-break keeps the op deterministic.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (batch.labels[a] != batch.labels[b]) return batch.labels[a] > batch.labels[b];
    return a < b;
  });

  double total = 0.0;
  for (int a = 0; a < n - 1; ++a) {
    double ya = batch.labels[order[a]];
    // Candidates are lower-scored entries with a non-tied label gap.
    std::vector<int> cand;           // positions in sorted order
    std::vector<double> cand_temp;   // T_a^j = tau / (y_a - y_j)
    double max_gap = 0.0;
    for (int j = a + 1; j < n; ++j) {
      double gap = ya - batch.labels[order[j]];
      if (gap < kProTieEpsilon) continue;
      cand.push_back(j);
      cand_temp.push_back(tau / gap);
      max_gap = std::max(max_gap, gap);
    }
    if (cand.empty()) continue;  // tied anchor contributes nothing
    double anchor_temp = tau / max_gap;  // min over candidate temperatures

    // Softmax over {anchor} + candidates with per-entry temperatures.
    std::vector<double> logits(cand.size() + 1);
    logits[0] = batch.predicted[order[a]] / anchor_temp;
    for (size_t c = 0; c < cand.size(); ++c)
      logits[c + 1] = batch.predicted[order[cand[c]]] / cand_temp[c];
    double lse = log_sum_exp(logits);
    total += -(logits[0] - lse);

    // d(-log softmax_0)/d logit_k = softmax_k - [k == 0]; chain the
    // per-entry temperature into each prediction.
    std::vector<double> probs(logits.size());
    double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (size_t k = 0; k < logits.size(); ++k) {
      probs[k] = std::exp(logits[k] - m);
      z += probs[k];
    }
    for (double& pk : probs) pk /= z;
    res.d_predicted[order[a]] += (probs[0] - 1.0) / anchor_temp;
    for (size_t c = 0; c < cand.size(); ++c)
      res.d_predicted[order[cand[c]]] += probs[c + 1] / cand_temp[c];
  }

  double scale = 1.0 / (n - 1);
  res.value = total * scale;
  for (double& g : res.d_predicted) g *= scale;
  return res;
}

ScoreLossResult cosent_loss(const ScoredPairBatch& batch, double tau) {
  check_scored_batch(batch);
  if (!(tau > 0.0)) throw ContractError("cosent_loss temperature must be positive");
  const int n = static_cast<int>(batch.predicted.size());
  // loss = log(1 + sum over y_i > y_j of exp((yhat_j - yhat_i)/tau)),
  // computed against the implicit exp(0) of the leading 1.
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> args;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (batch.labels[i] > batch.labels[j]) {
        pairs.emplace_back(i, j);
        args.push_back((batch.predicted[j] - batch.predicted[i]) / tau);
      }

  ScoreLossResult res;
  res.d_predicted.assign(n, 0.0);
  if (pairs.empty()) return res;  // empty sum -> log 1 = 0

  double m = std::max(0.0, *std::max_element(args.begin(), args.end()));
  double z = std::exp(-m);  // the leading 1
  for (double a : args) z += std::exp(a - m);
  res.value = m + std::log(z);
  for (size_t p = 0; p < pairs.size(); ++p) {
    double w = std::exp(args[p] - m) / z;  // exp(arg)/(1 + sum)
    res.d_predicted[pairs[p].second] += w / tau;
    res.d_predicted[pairs[p].first] -= w / tau;
  }
  return res;
}

ScoreLossResult ranknet_loss(const ScoredPairBatch& batch) {
  check_scored_batch(batch);
  const int n = static_cast<int>(batch.predicted.size());
  ScoreLossResult res;
  res.d_predicted.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (batch.labels[i] > batch.labels[j]) {
        double a = batch.predicted[j] - batch.predicted[i];
        // log(1 + e^a) = max(a,0) + log1p(e^{-|a|})
        res.value += std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a)));
        double sig = 1.0 / (1.0 + std::exp(-a));
        res.d_predicted[j] += sig;
        res.d_predicted[i] -= sig;
      }
  return res;
}

IRCosineLossResult ir_infonce_from_cosines(const Tensor3& pos_cos, const Tensor3& neg_cos,
                                           double tau) {
  if (!(tau > 0.0)) throw ContractError("ir loss temperature must be positive");
  const int n = pos_cos.n0;
  const int k_pos = pos_cos.n2;
  const int k_neg = neg_cos.n2;
  if (n == 0) throw DegenerateInputError("ir_infonce on empty batch");
  if (pos_cos.n1 != n || (k_neg > 0 && (neg_cos.n0 != n || neg_cos.n1 != n)))
    throw ContractError("ir cosine tensors must be N x N x K");
  if (k_pos < 1) throw ContractError("ir loss needs K+ >= 1");

  IRCosineLossResult res;
  res.d_pos_cos = Tensor3(n, n, k_pos);
  res.d_neg_cos = Tensor3(n, k_neg > 0 ? n : 0, k_neg);

  const double scale = 1.0 / (static_cast<double>(n) * k_pos);
  double total = 0.0;
  std::vector<double> logits;
  for (int i = 0; i < n; ++i) {
    // Shared pool for anchor i: positives of all other queries plus every
    // query's hard negatives.
    logits.clear();
    for (int j = 0; j < n; ++j) {
      if (j != i)
        for (int k = 0; k < k_pos; ++k) logits.push_back(pos_cos(i, j, k) / tau);
      for (int k = 0; k < k_neg; ++k) logits.push_back(neg_cos(i, j, k) / tau);
    }
    for (int c = 0; c < k_pos; ++c) {
      double own = pos_cos(i, i, c) / tau;
      double m = own;
      for (double v : logits) m = std::max(m, v);
      double z = std::exp(own - m);
      for (double v : logits) z += std::exp(v - m);
      double lse = m + std::log(z);
      total += -(own - lse);

      // softmax weights over {own} + pool
      double w_own = std::exp(own - lse);
      res.d_pos_cos(i, i, c) += scale * (w_own - 1.0) / tau;
      size_t idx = 0;
      for (int j = 0; j < n; ++j) {
        if (j != i)
          for (int k = 0; k < k_pos; ++k)
            res.d_pos_cos(i, j, k) += scale * std::exp(logits[idx++] - lse) / tau;
        for (int k = 0; k < k_neg; ++k)
          res.d_neg_cos(i, j, k) += scale * std::exp(logits[idx++] - lse) / tau;
      }
    }
  }
  res.value = total * scale;
  return res;
}

IRLossResult ir_infonce_multi(const IRBatch& batch, double tau) {
  const int n = batch.queries.rows;
  const int d = batch.queries.cols;
  if (n == 0) throw DegenerateInputError("ir_infonce_multi on empty batch");
  const int k_pos = batch.positives.n1;
  const int k_neg = batch.negatives.n1;
  if (batch.positives.n0 != n || k_pos < 1)
    throw ContractError("ir batch positives must be N x K+ x d with K+ >= 1");
  if (batch.positives.n2 != d || (k_neg > 0 && batch.negatives.n2 != d))
    throw ContractError("ir batch embedding dimension mismatch");

  // cos(q_i, d_{jk}) for every query i against every row's documents.
  Tensor3 pos_cos(n, n, k_pos);
  Tensor3 neg_cos(n, k_neg > 0 ? n : 0, k_neg);
  for (int i = 0; i < n; ++i) {
    auto q = batch.queries.row(i);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < k_pos; ++k) pos_cos(i, j, k) = cosine(q, batch.positives.fiber(j, k));
      for (int k = 0; k < k_neg; ++k) neg_cos(i, j, k) = cosine(q, batch.negatives.fiber(j, k));
    }
  }

  IRCosineLossResult core = ir_infonce_from_cosines(pos_cos, neg_cos, tau);

  IRLossResult res;
  res.value = core.value;
  res.d_queries = Matrix(n, d);
  res.d_positives = Tensor3(n, k_pos, d);
  res.d_negatives = Tensor3(n, k_neg, d);
  for (int i = 0; i < n; ++i) {
    auto q = batch.queries.row(i);
    auto dq = res.d_queries.row(i);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < k_pos; ++k) {
        double g = core.d_pos_cos(i, j, k);
        if (g != 0.0)
          accumulate_cosine_grad(q, batch.positives.fiber(j, k), g, dq,
                                 res.d_positives.fiber(j, k));
      }
      for (int k = 0; k < k_neg; ++k) {
        double g = core.d_neg_cos(i, j, k);
        if (g != 0.0)
          accumulate_cosine_grad(q, batch.negatives.fiber(j, k), g, dq,
                                 res.d_negatives.fiber(j, k));
      }
    }
  }
  return res;
}

PairEmbLossResult mid_nce_loss(const PairEmbBatch& batch, double threshold, double tau) {
  if (!(tau > 0.0)) throw ContractError("mid_nce temperature must be positive");
  const int n = batch.left.rows;
  const int d = batch.left.cols;
  if (n == 0) throw DegenerateInputError("mid_nce on empty batch");
  if (batch.right.rows != n || batch.right.cols != d)
    throw ContractError("mid_nce embedding shape mismatch");
  if (static_cast<int>(batch.labels.size()) != n)
    throw ContractError("mid_nce labels length mismatch");

  PairEmbLossResult res;
  res.d_left = Matrix(n, d);
  res.d_right = Matrix(n, d);

  std::vector<int> active;
  for (int i = 0; i < n; ++i)
    if (batch.labels[i] >= threshold) active.push_back(i);
  res.active_rows = static_cast<int>(active.size());
  if (active.empty()) return res;  // all rows filtered: zero loss, zero grads

  Matrix cos(n, n);
  for (int i : active)
    for (int j = 0; j < n; ++j) cos(i, j) = cosine(batch.left.row(i), batch.right.row(j));

  Matrix d_cos(n, n);
  const double scale = 1.0 / active.size();
  double total = 0.0;
  Vec logits(n);
  for (int i : active) {
    for (int j = 0; j < n; ++j) logits[j] = cos(i, j) / tau;
    double lse = log_sum_exp(logits);
    total += -(logits[i] - lse);
    for (int j = 0; j < n; ++j) {
      double w = std::exp(logits[j] - lse);
      d_cos(i, j) = scale * (w - (j == i ? 1.0 : 0.0)) / tau;
    }
  }
  res.value = total * scale;

  for (int i : active)
    for (int j = 0; j < n; ++j)
      accumulate_cosine_grad(batch.left.row(i), batch.right.row(j), d_cos(i, j),
                             res.d_left.row(i), res.d_right.row(j));
  return res;
}

PairEmbLossResult infonce_baseline(const PairEmbBatch& batch, double threshold, double tau) {
  // Same objective applied to final-layer embeddings.
  return mid_nce_loss(batch, threshold, tau);
}

void validate_weights(const StsLossWeights& w) {
  if (w.alpha < 0 || w.beta < 0 || w.gamma < 0 || w.lambda < 0)
    throw ConfigError("loss weights must be non-negative");
  if (w.alpha == 0 && w.beta == 0 && w.gamma == 0 && w.lambda == 0)
    throw ConfigError("at least one loss weight must be positive");
  if (!(w.tau_rankkl > 0) || !(w.tau_pro > 0) || !(w.tau_midnce > 0) || !(w.tau_ir > 0))
    throw ConfigError("loss temperatures must be positive");
  if (w.midnce_threshold < 0 || w.midnce_threshold > 1)
    throw ConfigError("midnce_threshold must lie in [0,1]");
}

StsCombinedResult sts_combined(const ScoredPairBatch& final_batch, const PairEmbBatch& mid_batch,
                               const StsLossWeights& w) {
  validate_weights(w);
  const int n = static_cast<int>(final_batch.predicted.size());
  StsCombinedResult res;
  res.d_predicted.assign(n, 0.0);
  res.d_left_mid = Matrix(mid_batch.left.rows, mid_batch.left.cols);
  res.d_right_mid = Matrix(mid_batch.right.rows, mid_batch.right.cols);

  if (w.alpha > 0) {
    ScoreLossResult r = pearson_loss(final_batch);
    res.pearson_value = r.value;
    res.value += w.alpha * r.value;
    for (int i = 0; i < n; ++i) res.d_predicted[i] += w.alpha * r.d_predicted[i];
  }
  if (w.beta > 0) {
    ScoreLossResult r = rank_kl_loss(final_batch, w.tau_rankkl);
    res.rank_kl_value = r.value;
    res.value += w.beta * r.value;
    for (int i = 0; i < n; ++i) res.d_predicted[i] += w.beta * r.d_predicted[i];
  }
  if (w.gamma > 0) {
    ScoreLossResult r = pro_loss(final_batch, w.tau_pro);
    res.pro_value = r.value;
    res.value += w.gamma * r.value;
    for (int i = 0; i < n; ++i) res.d_predicted[i] += w.gamma * r.d_predicted[i];
  }
  if (w.lambda > 0) {
    PairEmbLossResult r = mid_nce_loss(mid_batch, w.midnce_threshold, w.tau_midnce);
    res.midnce_value = r.value;
    res.value += w.lambda * r.value;
    for (size_t i = 0; i < r.d_left.data.size(); ++i) {
      res.d_left_mid.data[i] += w.lambda * r.d_left.data[i];
      res.d_right_mid.data[i] += w.lambda * r.d_right.data[i];
    }
  }
  return res;
}

}  // namespace codiemb::losses
