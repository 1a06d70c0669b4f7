// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#include "codiemb/fusion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace codiemb::fusion {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'D', 'E', 'M', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("truncated checkpoint while reading " + what + " at offset " +
                      std::to_string(static_cast<long long>(in.tellg())));
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_u64(std::istream& in, const std::string& what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw FormatError("truncated checkpoint while reading " + what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void require_same_names(const Checkpoint& a, const Checkpoint& b, const char* what) {
  if (a.tensors.size() != b.tensors.size())
    throw ContractError(std::string(what) + ": tensor name sets differ");
  auto ia = a.tensors.begin();
  auto ib = b.tensors.begin();
  for (; ia != a.tensors.end(); ++ia, ++ib) {
    if (ia->first != ib->first)
      throw ContractError(std::string(what) + ": tensor name sets differ at '" + ia->first + "'");
    if (!ia->second.same_shape(ib->second))
      throw ContractError(std::string(what) + ": shape mismatch for '" + ia->first + "'");
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json header;
  header["metadata"] = {{"config_hash", ckpt.meta.config_hash},
                        {"step", ckpt.meta.step},
                        {"seed", ckpt.meta.seed}};
  header["tensors"] = json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    json jt;
    jt["name"] = name;
    jt["shape"] = t.shape;
    jt["dtype"] = "f64";
    jt["offset"] = offset;
    jt["nbytes"] = t.data.size() * sizeof(double);
    header["tensors"].push_back(jt);
    offset += t.data.size() * sizeof(double);
  }
  std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& [name, t] : ckpt.tensors)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!out) throw FormatError("write failure on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("bad checkpoint magic at offset 0: " + path);
  uint32_t version = read_u32(in, "version");
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  uint64_t header_len = read_u64(in, "header length");
  std::string header_text(header_len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len)))
    throw FormatError("truncated checkpoint header at offset 20: " + path);

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::parse_error& e) {
    throw FormatError("corrupt checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  const auto& meta = header.at("metadata");
  ckpt.meta.config_hash = meta.at("config_hash").get<std::string>();
  ckpt.meta.step = meta.at("step").get<int64_t>();
  ckpt.meta.seed = meta.at("seed").get<uint64_t>();

  uint64_t payload_start = 8 + 4 + 8 + header_len;
  for (const auto& jt : header.at("tensors")) {
    Tensor t;
    t.shape = jt.at("shape").get<std::vector<int64_t>>();
    std::string dtype = jt.at("dtype").get<std::string>();
    if (dtype != "f64") throw FormatError("unsupported dtype: " + dtype);
    uint64_t nbytes = jt.at("nbytes").get<uint64_t>();
    uint64_t offset = jt.at("offset").get<uint64_t>();
    if (nbytes != static_cast<uint64_t>(Tensor::numel_of(t.shape)) * sizeof(double))
      throw FormatError("tensor byte count disagrees with shape for '" +
                        jt.at("name").get<std::string>() + "'");
    t.data.resize(nbytes / sizeof(double));
    in.seekg(static_cast<std::streamoff>(payload_start + offset));
    if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(nbytes)))
      throw FormatError("truncated checkpoint payload at offset " +
                        std::to_string(payload_start + offset) + ": " + path);
    ckpt.tensors[jt.at("name").get<std::string>()] = std::move(t);
  }
  return ckpt;
}

std::string layer_label(const std::string& param_name) {
  if (param_name.rfind("embed", 0) == 0) return "embed";
  if (param_name.rfind("layer.", 0) == 0) {
    size_t dot = param_name.find('.', 6);
    return param_name.substr(0, dot == std::string::npos ? param_name.size() : dot);
  }
  size_t dot = param_name.find('.');
  return dot == std::string::npos ? param_name : param_name.substr(0, dot);
}

DeltaProfile delta_profile(const Checkpoint& tuned, const Checkpoint& base) {
  require_same_names(tuned, base, "delta_profile");
  std::map<std::string, double> sq;
  for (const auto& [name, t] : tuned.tensors) {
    const Tensor& b = base.tensors.at(name);
    double& acc = sq[layer_label(name)];
    for (size_t i = 0; i < t.data.size(); ++i) {
      double d = t.data[i] - b.data[i];
      acc += d * d;
    }
  }
  DeltaProfile profile;
  for (const auto& [label, s] : sq) profile[label] = std::sqrt(s);
  return profile;
}

DeltaProfile standardize_profile(const DeltaProfile& profile) {
  if (profile.empty()) return profile;
  double mean = 0.0;
  for (const auto& [label, d] : profile) mean += d;
  mean /= profile.size();
  double var = 0.0;
  for (const auto& [label, d] : profile) var += (d - mean) * (d - mean);
  double sd = std::sqrt(var / profile.size());
  DeltaProfile out;
  for (const auto& [label, d] : profile) out[label] = sd > 0.0 ? (d - mean) / sd : 0.0;
  return out;
}

Checkpoint soup(const std::vector<Checkpoint>& checkpoints, const std::vector<double>& weights) {
  if (checkpoints.empty()) throw ContractError("soup of zero checkpoints");
  if (checkpoints.size() != weights.size())
    throw ContractError("soup weight count mismatch");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ContractError("soup weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ContractError("soup weights must sum to 1");
  for (size_t i = 1; i < checkpoints.size(); ++i)
    require_same_names(checkpoints[0], checkpoints[i], "soup");

  Checkpoint out;
  out.meta = checkpoints[0].meta;
  for (const auto& [name, t0] : checkpoints[0].tensors) {
    Tensor acc(t0.shape);
    for (size_t c = 0; c < checkpoints.size(); ++c) {
      const Tensor& t = checkpoints[c].tensors.at(name);
      for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += weights[c] * t.data[i];
    }
    out.tensors[name] = std::move(acc);
  }
  return out;
}

Checkpoint uniform_soup(const std::vector<Checkpoint>& checkpoints) {
  std::vector<double> w(checkpoints.size(), 1.0 / checkpoints.size());
  return soup(checkpoints, w);
}

FusionWeights layer_weights(const DeltaProfile& delta_ir, const DeltaProfile& delta_sts,
                            double tau_fuse) {
  if (!(tau_fuse > 0.0)) throw ContractError("tau_fuse must be positive");
  if (delta_ir.size() != delta_sts.size())
    throw ContractError("layer_weights: profiles cover different layers");
  FusionWeights fw;
  fw.tau = tau_fuse;
  auto is = delta_sts.begin();
  for (auto ii = delta_ir.begin(); ii != delta_ir.end(); ++ii, ++is) {
    if (ii->first != is->first)
      throw ContractError("layer_weights: layer label mismatch at '" + ii->first + "'");
    // two-way softmax, computed via the stable logistic form
    double w_ir = 1.0 / (1.0 + std::exp((is->second - ii->second) / tau_fuse));
    fw.by_layer[ii->first] = {w_ir, 1.0 - w_ir};
  }
  return fw;
}

Checkpoint hierarchical_fuse(const Checkpoint& soup_ir, const Checkpoint& soup_sts,
                             const FusionWeights& weights) {
  require_same_names(soup_ir, soup_sts, "hierarchical_fuse");
  Checkpoint out;
  out.meta = soup_ir.meta;
  for (const auto& [name, t_ir] : soup_ir.tensors) {
    std::string label = layer_label(name);
    auto wit = weights.by_layer.find(label);
    if (wit == weights.by_layer.end())
      throw ContractError("hierarchical_fuse: no weight for layer '" + label + "'");
    auto [w_ir, w_sts] = wit->second;
    const Tensor& t_sts = soup_sts.tensors.at(name);
    Tensor fused(t_ir.shape);
    for (size_t i = 0; i < fused.data.size(); ++i)
      fused.data[i] = w_ir * t_ir.data[i] + w_sts * t_sts.data[i];
    out.tensors[name] = std::move(fused);
  }
  return out;
}

Checkpoint slerp(const Checkpoint& a, const Checkpoint& b, double t) {
  require_same_names(a, b, "slerp");
  if (t < 0.0 || t > 1.0) throw ContractError("slerp t must lie in [0,1]");
  if (t == 0.0) return a;
  if (t == 1.0) return b;

  // Group parameter names by layer so each layer interpolates as one
  // flattened vector.
  std::map<std::string, std::vector<std::string>> layers;
  for (const auto& [name, tensor] : a.tensors) layers[layer_label(name)].push_back(name);

  Checkpoint out;
  out.meta = a.meta;
  for (const auto& [label, names] : layers) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& name : names) {
      const auto& ta = a.tensors.at(name).data;
      const auto& tb = b.tensors.at(name).data;
      for (size_t i = 0; i < ta.size(); ++i) {
        dot += ta[i] * tb[i];
        na += ta[i] * ta[i];
        nb += tb[i] * tb[i];
      }
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na == 0.0 || nb == 0.0)
      throw DegenerateInputError("slerp: zero-norm layer '" + label + "'");
    double cosang = std::clamp(dot / (na * nb), -1.0, 1.0);
    double omega = std::acos(cosang);
    double wa, wb;
    if (omega < 1e-6) {  // nearly parallel: fall back to lerp
      wa = 1.0 - t;
      wb = t;
    } else {
      double s = std::sin(omega);
      wa = std::sin((1.0 - t) * omega) / s;
      wb = std::sin(t * omega) / s;
    }
    for (const auto& name : names) {
      const auto& ta = a.tensors.at(name).data;
      const auto& tb = b.tensors.at(name).data;
      Tensor fused(a.tensors.at(name).shape);
      for (size_t i = 0; i < ta.size(); ++i) fused.data[i] = wa * ta[i] + wb * tb[i];
      out.tensors[name] = std::move(fused);
    }
  }
  return out;
}

}  // namespace codiemb::fusion
