// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
//
// Test-side oracle for the planted topic model: classifies texts by their
// window-membership histograms and recovers two-topic mixture positions via
// a circular mean.  Mirrors only the generator's published layout (topic k
// owns tokens [k*spacing, k*spacing + 2*spacing) over the content range),
// never the library's encoder or loss paths.
#pragma once

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "codiemb/corpus.hpp"
#include "codiemb/tensor.hpp"

namespace codiemb::planted {

struct Layout {
  int topic_count;
  int content_size;
  int spacing;

  explicit Layout(const corpus::SynthConfig& cfg)
      : topic_count(cfg.topic_count),
        content_size(cfg.vocab_size - 2),
        spacing(std::max(1, (cfg.vocab_size - 2) / cfg.topic_count)) {}
};

inline std::vector<int> parse_tokens(const std::string& text) {
  std::vector<int> ids;
  std::istringstream in(text);
  int id;
  while (in >> id) ids.push_back(id);
  return ids;
}

// Histogram over topic windows; each content token credits the two windows
// covering it with 0.5.
inline Vec window_histogram(const Layout& lay, const std::string& text) {
  Vec h(lay.topic_count, 0.0);
  for (int id : parse_tokens(text)) {
    if (id < 2) continue;  // task prefix
    int x = (id - 2) % lay.content_size;
    int k = x / lay.spacing;
    h[((k % lay.topic_count) + lay.topic_count) % lay.topic_count] += 0.5;
    h[((k - 1) % lay.topic_count + lay.topic_count) % lay.topic_count] += 0.5;
  }
  return h;
}

inline int classify_topic(const Layout& lay, const std::string& text) {
  Vec h = window_histogram(lay, text);
  int best = 0;
  for (int k = 1; k < lay.topic_count; ++k)
    if (h[k] > h[best]) best = k;
  return best;
}

inline double histogram_cosine(const Vec& a, const Vec& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb) + 1e-300);
}

// Circular-mean position of the text's topic mass on the topic ring.
inline double ring_position(const Layout& lay, const std::string& text) {
  Vec h = window_histogram(lay, text);
  double re = 0.0, im = 0.0;
  for (int k = 0; k < lay.topic_count; ++k) {
    double angle = 2.0 * std::numbers::pi * k / lay.topic_count;
    re += h[k] * std::cos(angle);
    im += h[k] * std::sin(angle);
  }
  double angle = std::atan2(im, re);
  double pos = angle * lay.topic_count / (2.0 * std::numbers::pi);
  return pos < 0 ? pos + lay.topic_count : pos;
}

// Snaps a ring position onto the STS mixture grid (1/(levels-1) steps).
inline double snap_position(double pos, int levels) {
  double step = 1.0 / (levels - 1);
  return std::round(pos / step) * step;
}

// Oracle embedder for STS texts: a 2-d point on the unit circle at the
// snapped ring position, so pair cosines take exactly the quantized
// similarity levels.
inline Vec ring_embedding(const Layout& lay, int levels, const std::string& text) {
  double pos = snap_position(ring_position(lay, text), levels);
  double angle = 2.0 * std::numbers::pi * pos / lay.topic_count;
  return {std::cos(angle), std::sin(angle)};
}

// Oracle embedder for IR texts: the normalized window histogram itself.
inline Vec histogram_embedding(const Layout& lay, const std::string& text) {
  Vec h = window_histogram(lay, text);
  double n = 0.0;
  for (double v : h) n += v * v;
  n = std::sqrt(n);
  if (n == 0.0) {
    h[0] = 1.0;
    return h;
  }
  for (double& v : h) v /= n;
  return h;
}

}  // namespace codiemb::planted
