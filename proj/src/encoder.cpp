// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include "codiemb/encoder.hpp"

#include <cmath>

#include "codiemb/rng.hpp"

namespace codiemb::encoder {

std::string pooling_name(Pooling p) { return p == Pooling::Mean ? "mean" : "first_token"; }

Pooling pooling_from_name(const std::string& name) {
  if (name == "mean") return Pooling::Mean;
  if (name == "first_token") return Pooling::FirstToken;
  throw ConfigError("unknown pooling: '" + name + "' (expected mean or first_token)");
}

void validate_encoder_config(const EncoderConfig& cfg) {
  if (cfg.vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
  if (cfg.dim < 1) throw ConfigError("dim must be >= 1");
  if (cfg.layer_count < 1) throw ConfigError("layer_count must be >= 1");
  if (cfg.mid_layer_index < 1 || cfg.mid_layer_index > cfg.layer_count)
    throw ConfigError("mid_layer_index must lie in [1, layer_count]");
  if (!(cfg.init_scale > 0)) throw ConfigError("init_scale must be positive");
}

static std::string layer_param(int i, const char* kind) {
  return "layer." + std::to_string(i) + "." + kind;
}

EncoderState init_encoder(const EncoderConfig& cfg) {
  validate_encoder_config(cfg);
  Rng rng(cfg.init_seed);
  EncoderState state;
  auto fill = [&](Tensor& t) {
    for (double& v : t.data) v = rng.uniform(-cfg.init_scale, cfg.init_scale);
  };
  Tensor embed({cfg.vocab_size, cfg.dim});
  fill(embed);
  state.params["embed.weight"] = std::move(embed);
  for (int i = 1; i <= cfg.layer_count; ++i) {
    Tensor w({cfg.dim, cfg.dim});
    fill(w);
    state.params[layer_param(i, "weight")] = std::move(w);
    Tensor b({cfg.dim});
    fill(b);
    state.params[layer_param(i, "bias")] = std::move(b);
  }
  return state;
}

ParamMap zeros_like(const ParamMap& params) {
  ParamMap out;
  for (const auto& [name, t] : params) out[name] = Tensor(t.shape);
  return out;
}

namespace {

void pool_rows(const Matrix& h, const std::vector<bool>& mask, Pooling pooling, Vec& out) {
  const int dim = h.cols;
  out.assign(dim, 0.0);
  if (pooling == Pooling::FirstToken) {
    for (int t = 0; t < h.rows; ++t)
      if (mask[t]) {
        for (int j = 0; j < dim; ++j) out[j] = h(t, j);
        return;
      }
    return;  // unreachable: encode checks for an unmasked position
  }
  int count = 0;
  for (int t = 0; t < h.rows; ++t)
    if (mask[t]) {
      ++count;
      for (int j = 0; j < dim; ++j) out[j] += h(t, j);
    }
  for (int j = 0; j < dim; ++j) out[j] /= count;
}

}  // namespace

EncodeResult encode(const EncoderState& state, const EncoderConfig& cfg,
                    std::span<const int> token_ids, const std::vector<bool>& mask) {
  if (token_ids.empty()) throw DegenerateInputError("encode of empty sequence");
  if (mask.size() != token_ids.size()) throw ContractError("mask length mismatch");
  bool any = false;
  for (bool m : mask) any = any || m;
  if (!any) throw DegenerateInputError("encode with all positions masked");

  const int dim = cfg.dim;
  const int len = static_cast<int>(token_ids.size());
  const Tensor& embed = state.params.at("embed.weight");

  EncodeResult res;
  res.cache.token_ids.assign(token_ids.begin(), token_ids.end());
  res.cache.mask = mask;
  res.cache.activations.resize(cfg.layer_count + 1);

  Matrix h(len, dim);
  for (int t = 0; t < len; ++t) {
    int id = token_ids[t];
    if (id < 0 || id >= cfg.vocab_size)
      throw ValidationError("token id " + std::to_string(id) + " outside vocabulary");
    for (int j = 0; j < dim; ++j) h(t, j) = embed.data[static_cast<size_t>(id) * dim + j];
  }
  res.cache.activations[0] = h;

  for (int layer = 1; layer <= cfg.layer_count; ++layer) {
    const Tensor& w = state.params.at(layer_param(layer, "weight"));
    const Tensor& b = state.params.at(layer_param(layer, "bias"));
    Matrix next(len, dim);
    for (int t = 0; t < len; ++t) {
      const double* hin = &h.data[static_cast<size_t>(t) * dim];
      for (int o = 0; o < dim; ++o) {
        const double* wrow = &w.data[static_cast<size_t>(o) * dim];
        double z = b.data[o];
        for (int j = 0; j < dim; ++j) z += wrow[j] * hin[j];
        next(t, o) = std::tanh(z);
      }
    }
    h = std::move(next);
    res.cache.activations[layer] = h;
  }

  pool_rows(res.cache.activations[cfg.layer_count], mask, cfg.pooling, res.final_emb);
  pool_rows(res.cache.activations[cfg.mid_layer_index], mask, cfg.pooling, res.mid_emb);
  return res;
}

namespace {

// Scatter a pooled gradient back onto per-position rows.
void unpool(const Vec& g, const std::vector<bool>& mask, Pooling pooling, Matrix& dh) {
  if (g.empty()) return;
  const int dim = dh.cols;
  if (pooling == Pooling::FirstToken) {
    for (int t = 0; t < dh.rows; ++t)
      if (mask[t]) {
        for (int j = 0; j < dim; ++j) dh(t, j) += g[j];
        return;
      }
    return;
  }
  int count = 0;
  for (bool m : mask) count += m ? 1 : 0;
  for (int t = 0; t < dh.rows; ++t)
    if (mask[t])
      for (int j = 0; j < dim; ++j) dh(t, j) += g[j] / count;
}

}  // namespace

void backward(const EncoderState& state, const EncoderConfig& cfg, const EncodeCache& cache,
              std::span<const double> d_final, std::span<const double> d_mid,
              ParamMap& grad_accum) {
  const int dim = cfg.dim;
  const int len = static_cast<int>(cache.token_ids.size());
  if (static_cast<int>(cache.activations.size()) != cfg.layer_count + 1)
    throw ContractError("cache does not match encoder config");
  if (!d_final.empty() && static_cast<int>(d_final.size()) != dim)
    throw ContractError("d_final dimension mismatch");
  if (!d_mid.empty() && static_cast<int>(d_mid.size()) != dim)
    throw ContractError("d_mid dimension mismatch");

  Matrix dh(len, dim);
  Vec gf(d_final.begin(), d_final.end());
  unpool(gf, cache.mask, cfg.pooling, dh);

  for (int layer = cfg.layer_count; layer >= 1; --layer) {
    // The auxiliary mid-layer gradient joins the stream where it was pooled.
    if (layer == cfg.mid_layer_index && !d_mid.empty()) {
      Vec gm(d_mid.begin(), d_mid.end());
      unpool(gm, cache.mask, cfg.pooling, dh);
    }
    const Matrix& out = cache.activations[layer];       // tanh output of this layer
    const Matrix& in = cache.activations[layer - 1];    // input rows
    const Tensor& w = state.params.at(layer_param(layer, "weight"));
    Tensor& dw = grad_accum.at(layer_param(layer, "weight"));
    Tensor& db = grad_accum.at(layer_param(layer, "bias"));

    Matrix dprev(len, dim);
    for (int t = 0; t < len; ++t) {
      for (int o = 0; o < dim; ++o) {
        double a = out(t, o);
        double dz = dh(t, o) * (1.0 - a * a);  // tanh'
        if (dz == 0.0) continue;
        db.data[o] += dz;
        double* dwrow = &dw.data[static_cast<size_t>(o) * dim];
        const double* wrow = &w.data[static_cast<size_t>(o) * dim];
        const double* hin = &in.data[static_cast<size_t>(t) * dim];
        double* dprow = &dprev.data[static_cast<size_t>(t) * dim];
        for (int j = 0; j < dim; ++j) {
          dwrow[j] += dz * hin[j];
          dprow[j] += dz * wrow[j];
        }
      }
    }
    dh = std::move(dprev);
  }

  Tensor& dembed = grad_accum.at("embed.weight");
  for (int t = 0; t < len; ++t) {
    int id = cache.token_ids[t];
    for (int j = 0; j < dim; ++j) dembed.data[static_cast<size_t>(id) * dim + j] += dh(t, j);
  }
}

AdamState init_adam(const EncoderState& state) {
  AdamState adam;
  adam.m = zeros_like(state.params);
  adam.v = zeros_like(state.params);
  return adam;
}

void optimizer_step(EncoderState& state, const ParamMap& grads, AdamState& adam,
                    const AdamConfig& cfg) {
  ++adam.step;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.step));
  for (auto& [name, param] : state.params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw ContractError("missing gradient for " + name);
    require_same_shape(param, git->second, name);
    Tensor& m = adam.m.at(name);
    Tensor& v = adam.v.at(name);
    const auto& g = git->second.data;
    for (size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw DegenerateInputError("non-finite gradient in " + name);
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g[i];
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      param.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace codiemb::encoder
