#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "hashcond/aug/formation.hpp"
#include "hashcond/aug/policy.hpp"
#include "hashcond/data/dataset.hpp"
#include "hashcond/data/synthetic.hpp"
#include "hashcond/hashing/codebook.hpp"
#include "hashcond/hashing/loss.hpp"
#include "hashcond/models/network.hpp"

namespace hashcond {

struct HashTrainConfig {
  int code_bits = 32;
  double quant_weight = 0.5;
  int epochs = 60;
  double lr = 0.01;
  int batch_size = 64;
  uint64_t seed = 0;
  std::string arch_id = "convnet3-w32";
  std::string loss_id = "center-cos";
  AugmentationPolicy aug_policy = default_policy();

  void validate() const {
    if (code_bits < 1) throw ValidationError("code_bits must be >= 1");
    if (quant_weight < 0) throw ValidationError("quant_weight must be >= 0");
    if (epochs < 0) throw ValidationError("epochs must be >= 0");
    if (!(lr > 0)) throw ValidationError("lr must be positive");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    validate_policy(aug_policy);
  }
};

struct TrainedHashModel {
  HashNetParams params;
  std::vector<double> loss_curve;  // one mean loss per epoch
  Provenance trained_on;
  int train_image_count = 0;  // after formation decoding, if any
};

// Core loop over an already-materialized image/label set (normalized pixels).
// SGD with momentum 0.9 and a cosine-decayed learning rate; one shared
// augmentation draw per mini-batch.
inline TrainedHashModel train_hash_on(const Tensor<float>& images,
                                      const std::vector<int>& labels, int num_classes,
                                      const HashTrainConfig& cfg,
                                      const Provenance& trained_on) {
  cfg.validate();
  const int n = images.shape.d[0];
  if ((int)labels.size() != n) throw ValidationError("train_hash: labels/images mismatch");
  if (n == 0) throw ValidationError("train_hash: empty training set");
  const int side = images.shape.d[2];

  TrainedHashModel model;
  model.trained_on = trained_on;
  model.train_image_count = n;
  model.params = init_network(cfg.arch_id, cfg.code_bits,
                              derive_seed(cfg.seed, 0x7A17));
  if (model.params.arch.input_side != side)
    throw ValidationError("train_hash: arch side does not match images");
  const Tensor<float> codebook = build_codebook(num_classes, cfg.code_bits,
                                                derive_seed(cfg.seed, 0xB00C));
  const HashLossFn<float> loss_fn = hash_loss_by_id<float>(cfg.loss_id);

  HashNetParams velocity = model.params;
  for (auto& [nm, t] : velocity.feature_params) std::fill(t.data.begin(), t.data.end(), 0.f);
  for (auto& [nm, t] : velocity.hash_params) std::fill(t.data.begin(), t.data.end(), 0.f);

  Rng rng(derive_seed(cfg.seed, 0x51EE));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Cosine decay from lr to 0 across the epoch budget.
    const double lr_e =
        cfg.epochs == 1 ? cfg.lr
                        : 0.5 * cfg.lr * (1.0 + std::cos(M_PI * epoch / cfg.epochs));
    const std::vector<int> perm = rng.permutation(n);
    double epoch_loss = 0;
    int batches = 0;
    for (int at = 0; at < n; at += cfg.batch_size) {
      const int take = std::min(cfg.batch_size, n - at);
      std::vector<int> rows(perm.begin() + at, perm.begin() + at + take);
      std::vector<int> batch_labels(take);
      for (int i = 0; i < take; ++i) batch_labels[(size_t)i] = labels[(size_t)rows[(size_t)i]];
      AugmentationParams w = sample_aug(cfg.aug_policy, side, rng);

      Tape<float> t;
      NetGraph<float> g = push_params(t, model.params, true, true);
      int x = t.leaf(gather_rows(images, rows), false);
      int v = hash_graph(t, g, apply_aug(t, x, w));
      int loss = loss_fn(t, v, batch_labels, codebook, (float)cfg.quant_weight);
      const double lv = t.val(loss).data[0];
      if (!std::isfinite(lv))
        throw std::runtime_error("train_hash: non-finite loss at epoch " +
                                 std::to_string(epoch));
      epoch_loss += lv;
      ++batches;
      t.backward(loss);

      auto step = [&](std::vector<std::pair<std::string, Tensor<float>>>& params,
                      std::vector<std::pair<std::string, Tensor<float>>>& vel,
                      const std::vector<int>& ids) {
        for (size_t p = 0; p < params.size(); ++p) {
          const Tensor<float>& grad = t.grad(ids[p]);
          auto& w_ = params[p].second.data;
          auto& v_ = vel[p].second.data;
          for (size_t i = 0; i < w_.size(); ++i) {
            v_[i] = 0.9f * v_[i] + grad.data[i];
            w_[i] -= (float)lr_e * v_[i];
          }
        }
      };
      step(model.params.feature_params, velocity.feature_params, g.feat_ids);
      step(model.params.hash_params, velocity.hash_params, g.hash_ids);
    }
    model.loss_curve.push_back(epoch_loss / std::max(1, batches));
  }
  return model;
}

// Synthetic sets with f > 1 are decoded first: every canvas contributes its
// f*f upscaled patches as independent training images.
inline TrainedHashModel train_hash(const SyntheticSet& set, const HashTrainConfig& cfg) {
  Tensor<float> images = set.pixels;
  std::vector<int> labels = set.labels;
  if (set.formation_factor > 1) {
    FormationConfig fc{set.formation_factor, set.image_side};
    images = decode_value(set.pixels, fc);
    labels.clear();
    const int per = fc.patch_count();
    for (int lab : set.labels)
      for (int i = 0; i < per; ++i) labels.push_back(lab);
  }
  return train_hash_on(images, labels, set.num_classes, cfg, set.provenance);
}

inline TrainedHashModel train_hash(const LabeledDataset& ds, const HashTrainConfig& cfg) {
  Provenance p;
  p.method = "whole-set";
  p.seed = cfg.seed;
  p.iterations = 0;
  p.config_hash = hex64(json_hash(json{{"dataset_checksum", dataset_checksum(ds)}}));
  p.ratio = 1.0;
  return train_hash_on(ds.images, ds.labels, ds.num_classes, cfg, p);
}

inline void save_loss_curve(const std::vector<double>& curve, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write loss curve: " + path);
  for (size_t i = 0; i < curve.size(); ++i)
    f << json{{"epoch", i}, {"loss", curve[i]}}.dump() << "\n";
}

}  // namespace hashcond
