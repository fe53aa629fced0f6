#pragma once

#include <string>
#include <vector>

#include "hashcond/autodiff/ops_basic.hpp"
#include "hashcond/autodiff/ops_image.hpp"
#include "hashcond/core/errors.hpp"
#include "hashcond/core/rng.hpp"

namespace hashcond {

// One transform in an ordered policy. Strength units depend on the kind:
// crop = shift radius in pixels, flip = probability, color = jitter range
// (contrast 1 +- s, brightness +- s), cutout = hole side as a fraction of the
// image side.
struct AugmentationOp {
  std::string kind;
  double strength = 0;
};

using AugmentationPolicy = std::vector<AugmentationOp>;

inline AugmentationPolicy identity_policy() { return {}; }

inline AugmentationPolicy default_policy() {
  return {{"crop", 4}, {"flip", 0.5}, {"color", 0.25}, {"cutout", 0.25}};
}

// One concrete draw of shared transform parameters. The policy travels with
// the draw so application replays exactly the transforms that were sampled,
// in order. Inactive fields keep their no-op values.
struct AugmentationParams {
  AugmentationPolicy policy;
  int side = 0;
  int dy = 0, dx = 0;
  bool flip = false;
  double contrast = 1.0;
  double brightness = 0.0;
  int cut_y = 0, cut_x = 0, cut_size = 0;
};

inline void validate_policy(const AugmentationPolicy& policy) {
  for (const auto& op : policy) {
    if (op.kind == "crop") {
      if (op.strength < 0) throw ConfigError("crop shift radius must be >= 0");
    } else if (op.kind == "flip") {
      if (op.strength < 0 || op.strength > 1)
        throw ConfigError("flip probability must lie in [0, 1]");
    } else if (op.kind == "color") {
      if (op.strength < 0 || op.strength >= 1)
        throw ConfigError("color jitter must lie in [0, 1)");
    } else if (op.kind == "cutout") {
      if (op.strength <= 0 || op.strength > 1)
        throw ConfigError("cutout fraction must lie in (0, 1]");
    } else {
      throw ConfigError("unknown augmentation kind: " + op.kind);
    }
  }
}

inline AugmentationParams sample_aug(const AugmentationPolicy& policy, int side, Rng& rng) {
  validate_policy(policy);
  if (side <= 0) throw ValidationError("sample_aug: side must be positive");
  AugmentationParams w;
  w.policy = policy;
  w.side = side;
  for (const auto& op : policy) {
    if (op.kind == "crop") {
      const int pad = (int)op.strength;
      w.dy = (int)rng.uniform_int(-pad, pad);
      w.dx = (int)rng.uniform_int(-pad, pad);
    } else if (op.kind == "flip") {
      w.flip = rng.uniform() < op.strength;
    } else if (op.kind == "color") {
      w.contrast = rng.uniform(1 - op.strength, 1 + op.strength);
      w.brightness = rng.uniform(-op.strength, op.strength);
    } else if (op.kind == "cutout") {
      w.cut_y = (int)rng.uniform_int(0, side - 1);
      w.cut_x = (int)rng.uniform_int(0, side - 1);
      w.cut_size = std::max(1, (int)std::lround(op.strength * side));
    }
  }
  return w;
}

// Zero-filled box mask centered on (cut_y, cut_x); the box is clipped at the
// borders, so holes near an edge shrink rather than wrap.
template <typename S>
Tensor<S> cutout_mask(const AugmentationParams& w) {
  Tensor<S> mask = Tensor<S>::full(Shape::of(w.side, w.side), S(1));
  const int half = w.cut_size / 2;
  const int y0 = std::max(0, w.cut_y - half), y1 = std::min(w.side, w.cut_y + half);
  const int x0 = std::max(0, w.cut_x - half), x1 = std::min(w.side, w.cut_x + half);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) mask.data[(size_t)y * w.side + x] = S(0);
  return mask;
}

// Replays the sampled transforms in policy order. The same w applied to the
// paired real and synthetic batches keeps the augmentation shared, which is
// what makes the matching loss comparable across the pair.
template <typename S>
int apply_aug(Tape<S>& t, int batch, const AugmentationParams& w) {
  const Shape& s = t.val(batch).shape;
  if (s.rank != 4 || s.d[2] != w.side || s.d[3] != w.side)
    throw ValidationError("apply_aug: batch shape " + s.str() + " does not match side " +
                          std::to_string(w.side));
  int cur = batch;
  for (const auto& op : w.policy) {
    if (op.kind == "crop") {
      if (w.dy != 0 || w.dx != 0) cur = translate(t, cur, w.dy, w.dx);
    } else if (op.kind == "flip") {
      if (w.flip) cur = flip_h(t, cur);
    } else if (op.kind == "color") {
      cur = photometric(t, cur, (S)w.contrast, (S)w.brightness);
    } else if (op.kind == "cutout") {
      cur = mul_mask(t, cur, cutout_mask<S>(w));
    } else {
      throw ConfigError("unknown augmentation kind: " + op.kind);
    }
  }
  return cur;
}

// Non-tape convenience for consumers that only need augmented pixels.
template <typename S>
Tensor<S> apply_aug_value(const Tensor<S>& batch, const AugmentationParams& w) {
  Tape<S> t;
  return t.val(apply_aug(t, t.leaf(batch), w));
}

}  // namespace hashcond
