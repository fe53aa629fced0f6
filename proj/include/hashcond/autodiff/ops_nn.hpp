#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <vector>

#include "hashcond/autodiff/tape.hpp"

namespace hashcond {

template <typename S>
using MatR = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

// 3x3/pad-1 patch matrix of one image: rows cin*9, cols h*w.
template <typename S>
void im2col3(const S* img, int cin, int h, int w, S* col) {
  const int hw = h * w;
  for (int ci = 0; ci < cin; ++ci) {
    const S* plane = img + (size_t)ci * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        S* row = col + ((size_t)ci * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) {
            for (int x = 0; x < w; ++x) row[y * w + x] = S(0);
            continue;
          }
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            row[y * w + x] = (sx < 0 || sx >= w) ? S(0) : plane[sy * w + sx];
          }
        }
      }
    }
  }
}

// Scatter-add of a patch-matrix gradient back onto one image.
template <typename S>
void col2im3(const S* col, int cin, int h, int w, S* img) {
  const int hw = h * w;
  for (int ci = 0; ci < cin; ++ci) {
    S* plane = img + (size_t)ci * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const S* row = col + ((size_t)ci * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            if (sx >= 0 && sx < w) plane[sy * w + sx] += row[y * w + x];
          }
        }
      }
    }
  }
}

}  // namespace detail

// 3x3 convolution, stride 1, zero padding 1; spatial size is preserved.
// weight [cout,cin,3,3], bias [cout]. The patch matrix is rebuilt from the
// saved input during backprop instead of being stored.
template <typename S>
int conv2d(Tape<S>& t, int x, int weight, int bias) {
  const Shape& xs = t.val(x).shape;
  const Shape& ws = t.val(weight).shape;
  if (xs.rank != 4 || ws.rank != 4 || ws.d[2] != 3 || ws.d[3] != 3)
    throw ValidationError("conv2d: need NCHW input and [cout,cin,3,3] weight");
  if (ws.d[1] != xs.d[1]) throw ValidationError("conv2d: channel mismatch");
  const int n = xs.d[0], cin = xs.d[1], h = xs.d[2], w = xs.d[3];
  const int cout = ws.d[0], hw = h * w, patch = cin * 9;
  check_shape(t.val(bias), Shape::of(cout), "conv2d bias");

  Tensor<S> v(Shape::of(n, cout, h, w));
  {
    std::vector<S> col((size_t)patch * hw);
    Eigen::Map<const MatR<S>> W(t.val(weight).ptr(), cout, patch);
    for (int i = 0; i < n; ++i) {
      detail::im2col3(t.val(x).image(i), cin, h, w, col.data());
      Eigen::Map<const MatR<S>> C(col.data(), patch, hw);
      Eigen::Map<MatR<S>> O(v.image(i), cout, hw);
      O.noalias() = W * C;
      for (int co = 0; co < cout; ++co)
        O.row(co).array() += t.val(bias).data[co];
    }
  }
  bool rg = t.requires_grad(x) || t.requires_grad(weight) || t.requires_grad(bias);
  int out = t.make(std::move(v), rg);
  t.set_backprop(out, [out, x, weight, bias, n, cin, cout, h, w](Tape<S>& tp) {
    const int hw = h * w, patch = cin * 9;
    const Tensor<S>& g = tp.grad(out);
    std::vector<S> col((size_t)patch * hw);
    const bool need_x = tp.requires_grad(x);
    const bool need_w = tp.requires_grad(weight);
    const bool need_b = tp.requires_grad(bias);
    Eigen::Map<const MatR<S>> W(tp.val(weight).ptr(), cout, patch);
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const MatR<S>> GO(g.image(i), cout, hw);
      if (need_w || need_x)
        detail::im2col3(tp.val(x).image(i), cin, h, w, col.data());
      if (need_w) {
        Eigen::Map<const MatR<S>> C(col.data(), patch, hw);
        Eigen::Map<MatR<S>> GW(tp.grad(weight).ptr(), cout, patch);
        GW.noalias() += GO * C.transpose();
      }
      if (need_b) {
        Tensor<S>& gb = tp.grad(bias);
        for (int co = 0; co < cout; ++co) gb.data[co] += GO.row(co).sum();
      }
      if (need_x) {
        Eigen::Map<MatR<S>> GC(col.data(), patch, hw);
        GC.noalias() = W.transpose() * GO;
        detail::col2im3(col.data(), cin, h, w, tp.grad(x).image(i));
      }
    }
  });
  return out;
}

// Per-image, per-channel normalization with affine gamma/beta [c]. Biased
// variance over the spatial plane; statistics are recomputed in backprop.
template <typename S>
int instance_norm(Tape<S>& t, int x, int gamma, int beta, S eps = S(1e-5)) {
  const Shape& xs = t.val(x).shape;
  if (xs.rank != 4) throw ValidationError("instance_norm: need NCHW input");
  const int n = xs.d[0], c = xs.d[1], h = xs.d[2], w = xs.d[3];
  check_shape(t.val(gamma), Shape::of(c), "instance_norm gamma");
  check_shape(t.val(beta), Shape::of(c), "instance_norm beta");
  const int hw = h * w;
  if (hw < 2) throw ValidationError("instance_norm: plane too small");

  Tensor<S> v(xs);
  for (int i = 0; i < n; ++i) {
    for (int ci = 0; ci < c; ++ci) {
      const S* p = t.val(x).image(i) + (size_t)ci * hw;
      S* q = v.image(i) + (size_t)ci * hw;
      S mu = S(0);
      for (int k = 0; k < hw; ++k) mu += p[k];
      mu /= S(hw);
      S var = S(0);
      for (int k = 0; k < hw; ++k) var += (p[k] - mu) * (p[k] - mu);
      var /= S(hw);
      const S inv = S(1) / std::sqrt(var + eps);
      const S ga = t.val(gamma).data[ci], be = t.val(beta).data[ci];
      for (int k = 0; k < hw; ++k) q[k] = ga * (p[k] - mu) * inv + be;
    }
  }
  bool rg = t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta);
  int out = t.make(std::move(v), rg);
  t.set_backprop(out, [out, x, gamma, beta, eps, n, c, hw](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    const bool need_x = tp.requires_grad(x);
    const bool need_g = tp.requires_grad(gamma);
    const bool need_b = tp.requires_grad(beta);
    std::vector<S> xhat(hw);
    for (int i = 0; i < n; ++i) {
      for (int ci = 0; ci < c; ++ci) {
        const S* p = tp.val(x).image(i) + (size_t)ci * hw;
        const S* go = g.image(i) + (size_t)ci * hw;
        S mu = S(0);
        for (int k = 0; k < hw; ++k) mu += p[k];
        mu /= S(hw);
        S var = S(0);
        for (int k = 0; k < hw; ++k) var += (p[k] - mu) * (p[k] - mu);
        var /= S(hw);
        const S inv = S(1) / std::sqrt(var + eps);
        for (int k = 0; k < hw; ++k) xhat[k] = (p[k] - mu) * inv;
        const S ga = tp.val(gamma).data[ci];
        if (need_g || need_b) {
          S sg = S(0), sb = S(0);
          for (int k = 0; k < hw; ++k) {
            sg += go[k] * xhat[k];
            sb += go[k];
          }
          if (need_g) tp.grad(gamma).data[ci] += sg;
          if (need_b) tp.grad(beta).data[ci] += sb;
        }
        if (need_x) {
          S m1 = S(0), m2 = S(0);
          for (int k = 0; k < hw; ++k) {
            m1 += ga * go[k];
            m2 += ga * go[k] * xhat[k];
          }
          m1 /= S(hw);
          m2 /= S(hw);
          S* gx = tp.grad(x).image(i) + (size_t)ci * hw;
          for (int k = 0; k < hw; ++k)
            gx[k] += (ga * go[k] - m1 - xhat[k] * m2) * inv;
        }
      }
    }
  });
  return out;
}

template <typename S>
int relu(Tape<S>& t, int a) {
  Tensor<S> v = t.val(a);
  for (auto& x : v.data)
    if (x < S(0)) x = S(0);
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    const auto& va = tp.val(a).data;
    Tensor<S>& ga = tp.grad(a);
    for (size_t i = 0; i < ga.data.size(); ++i)
      if (va[i] > S(0)) ga.data[i] += g.data[i];
  });
  return out;
}

// 2x2 average pooling, stride 2; spatial dims must be even.
template <typename S>
int avg_pool2(Tape<S>& t, int a) {
  const Shape& s = t.val(a).shape;
  if (s.rank != 4) throw ValidationError("avg_pool2: need NCHW input");
  const int n = s.d[0], c = s.d[1], h = s.d[2], w = s.d[3];
  if (h % 2 || w % 2) throw ValidationError("avg_pool2: odd spatial size");
  const int oh = h / 2, ow = w / 2;
  Tensor<S> v(Shape::of(n, c, oh, ow));
  for (int i = 0; i < n; ++i)
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
          v.at(i, ci, y, x) =
              (t.val(a).at(i, ci, 2 * y, 2 * x) + t.val(a).at(i, ci, 2 * y, 2 * x + 1) +
               t.val(a).at(i, ci, 2 * y + 1, 2 * x) + t.val(a).at(i, ci, 2 * y + 1, 2 * x + 1)) /
              S(4);
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a, n, c, oh, ow](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Tensor<S>& ga = tp.grad(a);
    for (int i = 0; i < n; ++i)
      for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < oh; ++y)
          for (int x = 0; x < ow; ++x) {
            const S q = g.at(i, ci, y, x) / S(4);
            ga.at(i, ci, 2 * y, 2 * x) += q;
            ga.at(i, ci, 2 * y, 2 * x + 1) += q;
            ga.at(i, ci, 2 * y + 1, 2 * x) += q;
            ga.at(i, ci, 2 * y + 1, 2 * x + 1) += q;
          }
  });
  return out;
}

// [N,C,H,W] -> [N, C*H*W]; NCHW row-major order makes this a pure reshape.
template <typename S>
int flatten_images(Tape<S>& t, int a) {
  const Shape& s = t.val(a).shape;
  if (s.rank != 4) throw ValidationError("flatten_images: need NCHW input");
  const int n = s.d[0];
  const int d = s.d[1] * s.d[2] * s.d[3];
  Tensor<S> v = t.val(a);
  v.shape = Shape::of(n, d);
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a](Tape<S>& tp) {
    accumulate(tp.grad(a), tp.grad(out));
  });
  return out;
}

// x [N,Din] * weight [Dout,Din]^T + bias [Dout].
template <typename S>
int linear(Tape<S>& t, int x, int weight, int bias) {
  const Shape& xs = t.val(x).shape;
  const Shape& ws = t.val(weight).shape;
  if (xs.rank != 2 || ws.rank != 2 || ws.d[1] != xs.d[1])
    throw ValidationError("linear: shape mismatch");
  const int n = xs.d[0], din = xs.d[1], dout = ws.d[0];
  check_shape(t.val(bias), Shape::of(dout), "linear bias");

  Tensor<S> v(Shape::of(n, dout));
  {
    Eigen::Map<const MatR<S>> X(t.val(x).ptr(), n, din);
    Eigen::Map<const MatR<S>> W(t.val(weight).ptr(), dout, din);
    Eigen::Map<MatR<S>> O(v.ptr(), n, dout);
    O.noalias() = X * W.transpose();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dout; ++j) v.data[(size_t)i * dout + j] += t.val(bias).data[j];
  }
  bool rg = t.requires_grad(x) || t.requires_grad(weight) || t.requires_grad(bias);
  int out = t.make(std::move(v), rg);
  t.set_backprop(out, [out, x, weight, bias, n, din, dout](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Eigen::Map<const MatR<S>> GO(g.ptr(), n, dout);
    if (tp.requires_grad(x)) {
      Eigen::Map<const MatR<S>> W(tp.val(weight).ptr(), dout, din);
      Eigen::Map<MatR<S>> GX(tp.grad(x).ptr(), n, din);
      GX.noalias() += GO * W;
    }
    if (tp.requires_grad(weight)) {
      Eigen::Map<const MatR<S>> X(tp.val(x).ptr(), n, din);
      Eigen::Map<MatR<S>> GW(tp.grad(weight).ptr(), dout, din);
      GW.noalias() += GO.transpose() * X;
    }
    if (tp.requires_grad(bias)) {
      Tensor<S>& gb = tp.grad(bias);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < dout; ++j) gb.data[j] += g.data[(size_t)i * dout + j];
    }
  });
  return out;
}

}  // namespace hashcond
