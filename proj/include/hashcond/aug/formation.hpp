#pragma once

#include "hashcond/autodiff/ops_image.hpp"
#include "hashcond/core/errors.hpp"

namespace hashcond {

// Grid parameterization of one synthetic canvas: factor f means f*f source
// patches per canvas. f=1 degenerates to a plain image.
struct FormationConfig {
  int factor = 1;
  int image_side = 32;

  int patch_count() const { return factor * factor; }

  void validate() const {
    if (factor < 1) throw ValidationError("formation factor must be >= 1");
    if (image_side < 1) throw ValidationError("formation side must be >= 1");
    if (image_side % factor != 0)
      throw ValidationError("formation factor " + std::to_string(factor) +
                            " does not divide side " + std::to_string(image_side));
  }
};

// [f*f, C, l, l] class images -> [1, C, l, l] canvas: each image shrinks to
// (l/f)x(l/f) and lands in its row-major cell. Gradients reach every source.
template <typename S>
int assemble(Tape<S>& t, int class_images, const FormationConfig& cfg) {
  cfg.validate();
  const Shape& s = t.val(class_images).shape;
  if (s.rank != 4 || s.d[0] != cfg.patch_count() || s.d[2] != cfg.image_side ||
      s.d[3] != cfg.image_side)
    throw ValidationError("assemble: expected " + std::to_string(cfg.patch_count()) +
                          " images of side " + std::to_string(cfg.image_side) + ", got " +
                          s.str());
  if (cfg.factor == 1) return class_images;
  const int p = cfg.image_side / cfg.factor;
  return tile_grid(t, bilinear_resize(t, class_images, p, p), cfg.factor);
}

// [N, C, l, l] canvases -> [N*f*f, C, l, l]: the inverse traversal, each cell
// upscaled back to full resolution, patches grouped by source canvas.
template <typename S>
int decode(Tape<S>& t, int canvases, const FormationConfig& cfg) {
  cfg.validate();
  const Shape& s = t.val(canvases).shape;
  if (s.rank != 4 || s.d[2] != cfg.image_side || s.d[3] != cfg.image_side)
    throw ValidationError("decode: expected canvases of side " +
                          std::to_string(cfg.image_side) + ", got " + s.str());
  if (cfg.factor == 1) return canvases;
  return bilinear_resize(t, slice_grid(t, canvases, cfg.factor), cfg.image_side,
                         cfg.image_side);
}

template <typename S>
Tensor<S> assemble_value(const Tensor<S>& class_images, const FormationConfig& cfg) {
  Tape<S> t;
  return t.val(assemble(t, t.leaf(class_images), cfg));
}

template <typename S>
Tensor<S> decode_value(const Tensor<S>& canvases, const FormationConfig& cfg) {
  Tape<S> t;
  return t.val(decode(t, t.leaf(canvases), cfg));
}

}  // namespace hashcond
