#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hashcond/autodiff/ops_basic.hpp"
#include "hashcond/autodiff/ops_nn.hpp"
#include "hashcond/core/rng.hpp"
#include "hashcond/core/serialize.hpp"

namespace hashcond {

// Conv backbone family: `blocks` repetitions of (3x3 conv -> instance norm ->
// relu -> 2x2 avg pool), then a linear hash head on the flattened map.
struct ArchSpec {
  std::string id;
  int blocks = 0;
  int width = 0;
  int input_side = 0;
  int in_channels = 3;

  int pooled_side() const { return input_side >> blocks; }
  int feature_dim() const { return width * pooled_side() * pooled_side(); }
};

inline ArchSpec arch_by_id(const std::string& id) {
  if (id == "convnet3") return {id, 3, 128, 32};
  if (id == "convnet3-w32") return {id, 3, 32, 32};
  if (id == "tinyconv") return {id, 2, 32, 16};
  if (id == "microconv") return {id, 1, 8, 8};  // sub-1k params, for oracles
  throw ConfigError("unsupported arch_id: " + id);
}

template <typename S>
struct NetParams {
  ArchSpec arch;
  int code_bits = 0;
  std::vector<std::pair<std::string, Tensor<S>>> feature_params;
  std::vector<std::pair<std::string, Tensor<S>>> hash_params;

  template <typename T>
  NetParams<T> cast() const {
    NetParams<T> out;
    out.arch = arch;
    out.code_bits = code_bits;
    for (const auto& [n, t] : feature_params) out.feature_params.emplace_back(n, t.template cast<T>());
    for (const auto& [n, t] : hash_params) out.hash_params.emplace_back(n, t.template cast<T>());
    return out;
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& [nm, t] : feature_params) n += t.numel();
    for (const auto& [nm, t] : hash_params) n += t.numel();
    return n;
  }
};

using HashNetParams = NetParams<float>;

// Fan-in-scaled Gaussian init: conv/head weights at std sqrt(2/fan_in) and
// sqrt(1/fan_in), biases zero, norm affine at identity. One sequential draw
// stream per seed keeps the result reproducible bit for bit.
inline HashNetParams init_network(const std::string& arch_id, int code_bits, uint64_t seed) {
  if (code_bits < 1) throw ConfigError("code_bits must be >= 1");
  HashNetParams p;
  p.arch = arch_by_id(arch_id);
  p.code_bits = code_bits;
  Rng rng(derive_seed(seed, 0xA11C));
  int cin = p.arch.in_channels;
  for (int b = 0; b < p.arch.blocks; ++b) {
    const std::string tag = std::to_string(b);
    Tensor<float> w(Shape::of(p.arch.width, cin, 3, 3));
    const float std_w = std::sqrt(2.0f / (float)(cin * 9));
    for (auto& v : w.data) v = (float)rng.normal() * std_w;
    p.feature_params.emplace_back("conv" + tag + ".weight", std::move(w));
    p.feature_params.emplace_back("conv" + tag + ".bias", Tensor<float>::zeros(Shape::of(p.arch.width)));
    p.feature_params.emplace_back("norm" + tag + ".gamma", Tensor<float>::full(Shape::of(p.arch.width), 1.0f));
    p.feature_params.emplace_back("norm" + tag + ".beta", Tensor<float>::zeros(Shape::of(p.arch.width)));
    cin = p.arch.width;
  }
  Tensor<float> hw(Shape::of(code_bits, p.arch.feature_dim()));
  const float std_h = std::sqrt(1.0f / (float)p.arch.feature_dim());
  for (auto& v : hw.data) v = (float)rng.normal() * std_h;
  p.hash_params.emplace_back("head.weight", std::move(hw));
  p.hash_params.emplace_back("head.bias", Tensor<float>::zeros(Shape::of(code_bits)));
  return p;
}

struct PerturbationConfig {
  double alpha = 0.1;
  uint64_t noise_seed = 0;
};

// Parameter-scaled normalized noise: per tensor, draw d ~ N(0,1) and form
// alpha * (d .* W) / ||d_raw||_F. Exposed separately from the addition so the
// linear-in-alpha property holds bit for bit: every arithmetic step commutes
// with scaling alpha by a power of two, while a fused W + delta would round
// the sum and destroy exact doubling on about half the entries.
template <typename S>
NetParams<S> perturb_delta(const NetParams<S>& theta_init, const PerturbationConfig& cfg) {
  if (cfg.alpha < 0) throw ValidationError("perturb: alpha must be >= 0");
  NetParams<S> out = theta_init;
  Rng rng(derive_seed(cfg.noise_seed, 0xD15E));
  auto fill = [&](Tensor<S>& w) {
    std::vector<double> d(w.data.size());
    double norm2 = 0;
    for (auto& v : d) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double norm = std::sqrt(norm2);
    for (size_t i = 0; i < w.data.size(); ++i)
      w.data[i] = (norm == 0) ? S(0) : (S)(cfg.alpha * d[i] / norm) * w.data[i];
  };
  for (auto& [n, t] : out.feature_params) fill(t);
  for (auto& [n, t] : out.hash_params) fill(t);
  return out;
}

template <typename S>
NetParams<S> perturb(const NetParams<S>& theta_init, const PerturbationConfig& cfg) {
  NetParams<S> delta = perturb_delta(theta_init, cfg);
  NetParams<S> out = theta_init;
  if (cfg.alpha == 0) return out;  // identity, bit for bit
  for (size_t k = 0; k < out.feature_params.size(); ++k) {
    auto& w = out.feature_params[k].second.data;
    const auto& d = delta.feature_params[k].second.data;
    for (size_t i = 0; i < w.size(); ++i) w[i] += d[i];
  }
  for (size_t k = 0; k < out.hash_params.size(); ++k) {
    auto& w = out.hash_params[k].second.data;
    const auto& d = delta.hash_params[k].second.data;
    for (size_t i = 0; i < w.size(); ++i) w[i] += d[i];
  }
  return out;
}

// Parameter leaves pushed onto a tape. Ids line up with the params vectors.
template <typename S>
struct NetGraph {
  ArchSpec arch;
  std::vector<int> feat_ids;
  std::vector<int> hash_ids;
};

template <typename S>
NetGraph<S> push_params(Tape<S>& t, const NetParams<S>& p, bool train_features,
                        bool train_hash) {
  NetGraph<S> g;
  g.arch = p.arch;
  for (const auto& [n, w] : p.feature_params) g.feat_ids.push_back(t.leaf(w, train_features));
  for (const auto& [n, w] : p.hash_params) g.hash_ids.push_back(t.leaf(w, train_hash));
  return g;
}

// Feature extractor psi: NCHW batch -> [N, feature_dim].
template <typename S>
int features_graph(Tape<S>& t, const NetGraph<S>& g, int x) {
  const Shape& s = t.val(x).shape;
  if (s.rank != 4 || s.d[1] != g.arch.in_channels || s.d[2] != g.arch.input_side ||
      s.d[3] != g.arch.input_side)
    throw ValidationError("features_graph: batch shape " + s.str() + " does not match arch " +
                          g.arch.id);
  int h = x;
  for (int b = 0; b < g.arch.blocks; ++b) {
    h = conv2d(t, h, g.feat_ids[4 * b], g.feat_ids[4 * b + 1]);
    h = instance_norm(t, h, g.feat_ids[4 * b + 2], g.feat_ids[4 * b + 3]);
    h = relu(t, h);
    h = avg_pool2(t, h);
  }
  return flatten_images(t, h);
}

template <typename S>
int hash_head(Tape<S>& t, const NetGraph<S>& g, int features) {
  return linear(t, features, g.hash_ids[0], g.hash_ids[1]);
}

template <typename S>
int hash_graph(Tape<S>& t, const NetGraph<S>& g, int x) {
  return hash_head(t, g, features_graph(t, g, x));
}

template <typename S>
Tensor<S> extract_features(const NetParams<S>& p, const Tensor<S>& batch) {
  Tape<S> t;
  NetGraph<S> g = push_params(t, p, false, false);
  return t.val(features_graph(t, g, t.leaf(batch)));
}

template <typename S>
Tensor<S> hash_forward(const NetParams<S>& p, const Tensor<S>& batch) {
  Tape<S> t;
  NetGraph<S> g = push_params(t, p, false, false);
  return t.val(hash_graph(t, g, t.leaf(batch)));
}

namespace fs = std::filesystem;

// Params container: same manifest-plus-blob layout as a synthetic archive,
// tagged kind "params", tensors concatenated in declaration order.
inline void save_params(const HashNetParams& p, const fs::path& dir) {
  fs::create_directories(dir);
  json tensors = json::array();
  std::vector<float> blob;
  auto push = [&](const std::string& name, const Tensor<float>& t) {
    json shape = json::array();
    for (int i = 0; i < t.shape.rank; ++i) shape.push_back(t.shape.d[i]);
    tensors.push_back({{"name", name}, {"shape", shape}});
    blob.insert(blob.end(), t.data.begin(), t.data.end());
  };
  for (const auto& [n, t] : p.feature_params) push(n, t);
  for (const auto& [n, t] : p.hash_params) push(n, t);
  json manifest{{"schema_version", kArchiveSchemaVersion},
                {"kind", "params"},
                {"arch_id", p.arch.id},
                {"code_bits", p.code_bits},
                {"tensors", tensors},
                {"byte_order", "little"},
                {"dtype", "float32"}};
  write_json(dir / "manifest.json", manifest);
  write_f32_blob(dir / "params.f32", blob);
}

inline HashNetParams load_params(const fs::path& dir) {
  const json m = read_json(dir / "manifest.json");
  if (m.value("schema_version", -1) != kArchiveSchemaVersion)
    throw VersionError("unsupported params schema_version: " + dir.string());
  if (m.value("kind", "") != "params")
    throw CorruptionError("manifest is not a params container: " + dir.string());
  HashNetParams p = init_network(m.at("arch_id").get<std::string>(),
                                 m.at("code_bits").get<int>(), 0);
  size_t total = 0;
  std::vector<std::pair<std::string, Shape>> decl;
  for (const auto& t : m.at("tensors")) {
    const auto dims = t.at("shape").get<std::vector<int>>();
    Shape s;
    s.rank = (int)dims.size();
    for (size_t i = 0; i < dims.size(); ++i) s.d[i] = dims[i];
    decl.emplace_back(t.at("name").get<std::string>(), s);
    total += (size_t)s.numel();
  }
  const std::vector<float> blob = read_f32_blob(dir / "params.f32", total);
  size_t off = 0;
  auto fill = [&](std::vector<std::pair<std::string, Tensor<float>>>& dst) {
    for (auto& [name, t] : dst) {
      bool found = false;
      for (const auto& [dn, ds] : decl)
        if (dn == name) {
          if (ds != t.shape) throw CorruptionError("tensor shape mismatch for " + name);
          found = true;
        }
      if (!found) throw CorruptionError("missing tensor in container: " + name);
    }
  };
  fill(p.feature_params);
  fill(p.hash_params);
  // blob order equals declaration order
  for (const auto& [dn, ds] : decl) {
    Tensor<float>* dst = nullptr;
    for (auto& [name, t] : p.feature_params)
      if (name == dn) dst = &t;
    for (auto& [name, t] : p.hash_params)
      if (name == dn) dst = &t;
    if (!dst) throw CorruptionError("unknown tensor in container: " + dn);
    std::copy(blob.begin() + off, blob.begin() + off + (size_t)ds.numel(), dst->data.begin());
    off += (size_t)ds.numel();
  }
  return p;
}

}  // namespace hashcond
