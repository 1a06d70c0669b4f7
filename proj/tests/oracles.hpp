// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
//
// Brute-force reference implementations used to freeze expected values.
// Everything here expands the defining formulas term by term and stays
// independent of the library's computation paths (no shared helpers, no
// log-sum-exp tricks, counting-based ranks instead of sorting).
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "codiemb/tensor.hpp"

namespace codiemb::oracle {

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine(const Vec& a, const Vec& b) {
  return dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b)));
}

// Eq.-style multi-positive InfoNCE over precomputed cosine grids.
// pos[i][j][k] = cos(q_i, d+_{jk}); neg[i][j][k] = cos(q_i, d-_{jk}).
inline double ir_infonce(const std::vector<std::vector<std::vector<double>>>& pos,
                         const std::vector<std::vector<std::vector<double>>>& neg, double tau) {
  const int n = static_cast<int>(pos.size());
  const int k_pos = static_cast<int>(pos[0][0].size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double z_pos = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int k = 0; k < k_pos; ++k) z_pos += std::exp(pos[i][j][k] / tau);
    }
    double z_neg = 0.0;
    for (int j = 0; j < n; ++j)
      for (double c : neg[i][j]) z_neg += std::exp(c / tau);
    for (int c = 0; c < k_pos; ++c) {
      double own = std::exp(pos[i][i][c] / tau);
      total += std::log(own / (own + z_pos + z_neg));
    }
  }
  return -total / (static_cast<double>(n) * k_pos);
}

inline double pearson_r(const Vec& x, const Vec& y) {
  const int n = static_cast<int>(x.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (int i = 0; i < n; ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  return cov / (std::sqrt(vx) * std::sqrt(vy));
}

// Average ranks by counting: rank_i = #{j : v_j > v_i} + (#ties - 1) / 2.
inline Vec counting_ranks(const Vec& v) {
  const int n = static_cast<int>(v.size());
  Vec ranks(n);
  for (int i = 0; i < n; ++i) {
    int greater = 0, ties = 0;
    for (int j = 0; j < n; ++j) {
      if (v[j] > v[i]) ++greater;
      if (v[j] == v[i]) ++ties;
    }
    ranks[i] = greater + 0.5 * (ties - 1);
  }
  return ranks;
}

inline double spearman(const Vec& predictions, const Vec& labels) {
  return pearson_r(counting_ranks(predictions), counting_ranks(labels));
}

// Tie-free closed form: 1 - 6 sum d_i^2 / (n (n^2 - 1)).
inline double spearman_closed_form(const Vec& predictions, const Vec& labels) {
  Vec rp = counting_ranks(predictions);
  Vec rl = counting_ranks(labels);
  const int n = static_cast<int>(predictions.size());
  double d2 = 0.0;
  for (int i = 0; i < n; ++i) d2 += (rp[i] - rl[i]) * (rp[i] - rl[i]);
  return 1.0 - 6.0 * d2 / (static_cast<double>(n) * (static_cast<double>(n) * n - 1.0));
}

inline Vec softmax(const Vec& scores, double tau) {
  Vec out(scores.size());
  double z = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] / tau);
    z += out[i];
  }
  for (double& p : out) p /= z;
  return out;
}

inline double rank_kl(const Vec& predicted, const Vec& labels, double tau) {
  const int n = static_cast<int>(labels.size());
  Vec ranks = counting_ranks(labels);
  Vec target(n);
  for (int i = 0; i < n; ++i) target[i] = ((n - 1) - ranks[i]) / (n - 1);
  Vec p = softmax(target, tau);
  Vec q = softmax(predicted, tau);
  double kl = 0.0;
  for (int i = 0; i < n; ++i) kl += p[i] * std::log(p[i] / q[i]);
  return kl;
}

inline double pro(const Vec& predicted, const Vec& labels, double tau, double tie_eps = 1e-6) {
  const int n = static_cast<int>(labels.size());
  if (n <= 1) return 0.0;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return labels[a] > labels[b]; });
  double total = 0.0;
  for (int a = 0; a < n - 1; ++a) {
    double best_temp = 0.0;
    bool any = false;
    double denom = 0.0;
    for (int j = a + 1; j < n; ++j) {
      double gap = labels[order[a]] - labels[order[j]];
      if (gap < tie_eps) continue;
      double temp = tau / gap;
      if (!any || temp < best_temp) best_temp = temp;
      any = true;
      denom += std::exp(predicted[order[j]] / temp);
    }
    if (!any) continue;
    double num = std::exp(predicted[order[a]] / best_temp);
    total += std::log(num / (num + denom));
  }
  return -total / (n - 1);
}

inline double cosent(const Vec& predicted, const Vec& labels, double tau) {
  double s = 0.0;
  const int n = static_cast<int>(labels.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (labels[i] > labels[j]) s += std::exp((predicted[j] - predicted[i]) / tau);
  return std::log(1.0 + s);
}

inline double ranknet(const Vec& predicted, const Vec& labels) {
  double s = 0.0;
  const int n = static_cast<int>(labels.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (labels[i] > labels[j]) s += std::log(1.0 + std::exp(predicted[j] - predicted[i]));
  return s;
}

// In-batch InfoNCE over cosine grids with a label filter on the numerator.
inline double filtered_infonce(const std::vector<Vec>& left, const std::vector<Vec>& right,
                               const Vec& labels, double threshold, double tau) {
  const int n = static_cast<int>(left.size());
  double total = 0.0;
  int active = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < threshold) continue;
    ++active;
    double denom = 0.0;
    for (int j = 0; j < n; ++j) denom += std::exp(cosine(left[i], right[j]) / tau);
    total += std::log(std::exp(cosine(left[i], right[i]) / tau) / denom);
  }
  return active == 0 ? 0.0 : -total / active;
}

inline double ndcg_at_k(const Vec& ranked, const Vec& pool, int k) {
  double dcg = 0.0;
  for (int i = 0; i < static_cast<int>(ranked.size()) && i < k; ++i)
    dcg += ranked[i] / (std::log(i + 2.0) / std::log(2.0));
  Vec ideal = pool;
  std::sort(ideal.begin(), ideal.end());
  std::reverse(ideal.begin(), ideal.end());
  double idcg = 0.0;
  for (int i = 0; i < static_cast<int>(ideal.size()) && i < k; ++i)
    idcg += ideal[i] / (std::log(i + 2.0) / std::log(2.0));
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

// Closed-form spherical interpolation of flattened vectors.
inline Vec slerp(const Vec& a, const Vec& b, double t) {
  double na = std::sqrt(dot(a, a));
  double nb = std::sqrt(dot(b, b));
  double omega = std::acos(std::clamp(dot(a, b) / (na * nb), -1.0, 1.0));
  Vec out(a.size());
  double wa = std::sin((1.0 - t) * omega) / std::sin(omega);
  double wb = std::sin(t * omega) / std::sin(omega);
  for (size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

}  // namespace codiemb::oracle
