#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hashcond/autodiff/tape.hpp"

namespace hashcond {

namespace detail {

// Half-pixel source coordinates for a 1-d resize: src = (i+0.5)*in/out - 0.5,
// clamped at the borders. At an integer downscale factor every sample lands
// midway between two sources, so a 2x reduction is exactly the 2x2 box
// average and the image mean is preserved.
struct ResizeAxis {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

inline ResizeAxis resize_axis(int in, int out) {
  ResizeAxis ax;
  ax.i0.resize(out);
  ax.i1.resize(out);
  ax.frac.resize(out);
  for (int i = 0; i < out; ++i) {
    double s = (i + 0.5) * (double)in / out - 0.5;
    s = std::min(std::max(s, 0.0), (double)(in - 1));
    int lo = (int)s;
    if (lo > in - 1) lo = in - 1;
    ax.i0[i] = lo;
    ax.i1[i] = (lo + 1 < in) ? lo + 1 : in - 1;
    ax.frac[i] = s - lo;
  }
  return ax;
}

}  // namespace detail

// Plain forward resize, shared by the tape op and non-differentiable callers
// (dataset generation, decode-for-training). Half-pixel sampling; the
// factored interpolation p00 + fx*(p01-p00) keeps constant images bit-exact
// fixed points.
template <typename S>
Tensor<S> bilinear_resize_value(const Tensor<S>& in, int oh, int ow) {
  const Shape& s = in.shape;
  if (s.rank != 4) throw ValidationError("bilinear_resize: need NCHW input");
  if (oh < 1 || ow < 1) throw ValidationError("bilinear_resize: bad target size");
  const int n = s.d[0], c = s.d[1], h = s.d[2], w = s.d[3];
  const detail::ResizeAxis ay = detail::resize_axis(h, oh);
  const detail::ResizeAxis ax = detail::resize_axis(w, ow);
  Tensor<S> v(Shape::of(n, c, oh, ow));
  for (int i = 0; i < n; ++i) {
    for (int ci = 0; ci < c; ++ci) {
      const S* p = in.image(i) + (size_t)ci * h * w;
      S* q = v.image(i) + (size_t)ci * oh * ow;
      for (int y = 0; y < oh; ++y) {
        const int y0 = ay.i0[y], y1 = ay.i1[y];
        const S fy = S(ay.frac[y]);
        for (int x = 0; x < ow; ++x) {
          const int x0 = ax.i0[x], x1 = ax.i1[x];
          const S fx = S(ax.frac[x]);
          const S top = p[y0 * w + x0] + fx * (p[y0 * w + x1] - p[y0 * w + x0]);
          const S bot = p[y1 * w + x0] + fx * (p[y1 * w + x1] - p[y1 * w + x0]);
          q[y * ow + x] = top + fy * (bot - top);
        }
      }
    }
  }
  return v;
}

template <typename S>
int bilinear_resize(Tape<S>& t, int a, int oh, int ow) {
  Tensor<S> v = bilinear_resize_value(t.val(a), oh, ow);
  const Shape& s = t.val(a).shape;
  const int n = s.d[0], c = s.d[1], h = s.d[2], w = s.d[3];
  const detail::ResizeAxis ay = detail::resize_axis(h, oh);
  const detail::ResizeAxis ax = detail::resize_axis(w, ow);
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a, n, c, h, w, oh, ow, ay, ax](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Tensor<S>& ga = tp.grad(a);
    for (int i = 0; i < n; ++i) {
      for (int ci = 0; ci < c; ++ci) {
        S* gp = ga.image(i) + (size_t)ci * h * w;
        const S* gq = g.image(i) + (size_t)ci * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int y0 = ay.i0[y], y1 = ay.i1[y];
          const S fy = S(ay.frac[y]);
          for (int x = 0; x < ow; ++x) {
            const int x0 = ax.i0[x], x1 = ax.i1[x];
            const S fx = S(ax.frac[x]);
            const S gv = gq[y * ow + x];
            gp[y0 * w + x0] += (S(1) - fy) * (S(1) - fx) * gv;
            gp[y0 * w + x1] += (S(1) - fy) * fx * gv;
            gp[y1 * w + x0] += fy * (S(1) - fx) * gv;
            gp[y1 * w + x1] += fy * fx * gv;
          }
        }
      }
    }
  });
  return out;
}

// Integer shift with zero fill: out[y,x] = in[y-dy, x-dx]. The crop-from-pad
// augmentation in shift form.
template <typename S>
int translate(Tape<S>& t, int a, int dy, int dx) {
  const Shape& s = t.val(a).shape;
  if (s.rank != 4) throw ValidationError("translate: need NCHW input");
  const int n = s.d[0], c = s.d[1], h = s.d[2], w = s.d[3];
  Tensor<S> v = Tensor<S>::zeros(s);
  for (int i = 0; i < n; ++i)
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y < h; ++y) {
        const int sy = y - dy;
        if (sy < 0 || sy >= h) continue;
        for (int x = 0; x < w; ++x) {
          const int sx = x - dx;
          if (sx >= 0 && sx < w) v.at(i, ci, y, x) = t.val(a).at(i, ci, sy, sx);
        }
      }
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a, dy, dx, n, c, h, w](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Tensor<S>& ga = tp.grad(a);
    for (int i = 0; i < n; ++i)
      for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y) {
          const int sy = y - dy;
          if (sy < 0 || sy >= h) continue;
          for (int x = 0; x < w; ++x) {
            const int sx = x - dx;
            if (sx >= 0 && sx < w) ga.at(i, ci, sy, sx) += g.at(i, ci, y, x);
          }
        }
  });
  return out;
}

template <typename S>
int flip_h(Tape<S>& t, int a) {
  const Shape& s = t.val(a).shape;
  if (s.rank != 4) throw ValidationError("flip_h: need NCHW input");
  const int n = s.d[0], c = s.d[1], h = s.d[2], w = s.d[3];
  Tensor<S> v(s);
  for (int i = 0; i < n; ++i)
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) v.at(i, ci, y, x) = t.val(a).at(i, ci, y, w - 1 - x);
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a, n, c, h, w](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Tensor<S>& ga = tp.grad(a);
    for (int i = 0; i < n; ++i)
      for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) ga.at(i, ci, y, w - 1 - x) += g.at(i, ci, y, x);
  });
  return out;
}

// Contrast about the per-image mean plus a brightness shift:
// out = k*(x - m) + m + b with m the mean over all channels and pixels.
template <typename S>
int photometric(Tape<S>& t, int a, S k, S b) {
  const Shape& s = t.val(a).shape;
  if (s.rank != 4) throw ValidationError("photometric: need NCHW input");
  const int n = s.d[0];
  const int64_t per = t.val(a).image_size();
  if (per == 0) throw ValidationError("photometric: empty image");
  Tensor<S> v = t.val(a);
  for (int i = 0; i < n; ++i) {
    S* p = v.image(i);
    S m = S(0);
    for (int64_t j = 0; j < per; ++j) m += p[j];
    m /= S(per);
    for (int64_t j = 0; j < per; ++j) p[j] = k * (p[j] - m) + m + b;
  }
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a, k, n, per](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Tensor<S>& ga = tp.grad(a);
    for (int i = 0; i < n; ++i) {
      const S* gq = g.image(i);
      S* gp = ga.image(i);
      S sum = S(0);
      for (int64_t j = 0; j < per; ++j) sum += gq[j];
      const S spread = (S(1) - k) * sum / S(per);
      for (int64_t j = 0; j < per; ++j) gp[j] += k * gq[j] + spread;
    }
  });
  return out;
}

// [f*f, C, p, p] -> [1, C, f*p, f*p], patches placed row-major.
template <typename S>
int tile_grid(Tape<S>& t, int a, int f) {
  const Shape& s = t.val(a).shape;
  if (s.rank != 4) throw ValidationError("tile_grid: need NCHW input");
  if (s.d[0] != f * f) throw ValidationError("tile_grid: patch count must be f*f");
  const int c = s.d[1], p = s.d[2];
  if (s.d[3] != p) throw ValidationError("tile_grid: patches must be square");
  const int l = f * p;
  Tensor<S> v(Shape::of(1, c, l, l));
  for (int r = 0; r < f; ++r)
    for (int q = 0; q < f; ++q)
      for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < p; ++y)
          for (int x = 0; x < p; ++x)
            v.at(0, ci, r * p + y, q * p + x) = t.val(a).at(r * f + q, ci, y, x);
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a, f, c, p](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Tensor<S>& ga = tp.grad(a);
    for (int r = 0; r < f; ++r)
      for (int q = 0; q < f; ++q)
        for (int ci = 0; ci < c; ++ci)
          for (int y = 0; y < p; ++y)
            for (int x = 0; x < p; ++x)
              ga.at(r * f + q, ci, y, x) += g.at(0, ci, r * p + y, q * p + x);
  });
  return out;
}

// [N, C, l, l] -> [N*f*f, C, p, p]: each image split into its f*f grid
// patches, row-major, grouped by source image.
template <typename S>
int slice_grid(Tape<S>& t, int a, int f) {
  const Shape& s = t.val(a).shape;
  if (s.rank != 4) throw ValidationError("slice_grid: need NCHW input");
  const int n = s.d[0], c = s.d[1], l = s.d[2];
  if (s.d[3] != l) throw ValidationError("slice_grid: images must be square");
  if (l % f) throw ValidationError("slice_grid: f must divide the image side");
  const int p = l / f;
  Tensor<S> v(Shape::of(n * f * f, c, p, p));
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < f; ++r)
      for (int q = 0; q < f; ++q)
        for (int ci = 0; ci < c; ++ci)
          for (int y = 0; y < p; ++y)
            for (int x = 0; x < p; ++x)
              v.at((i * f + r) * f + q, ci, y, x) = t.val(a).at(i, ci, r * p + y, q * p + x);
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a, f, n, c, p](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Tensor<S>& ga = tp.grad(a);
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < f; ++r)
        for (int q = 0; q < f; ++q)
          for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < p; ++y)
              for (int x = 0; x < p; ++x)
                ga.at(i, ci, r * p + y, q * p + x) += g.at((i * f + r) * f + q, ci, y, x);
  });
  return out;
}

}  // namespace hashcond
