#pragma once

#include <cstddef>
#include <vector>

#include "hashcond/autodiff/tape.hpp"

namespace hashcond {

// Elementwise and reduction ops. Every op creates the output node first, then
// attaches a closure capturing only node ids; set_backprop drops the closure
// when no input needs gradients, so forward-only graphs carry no overhead.

template <typename S>
int add(Tape<S>& t, int a, int b) {
  check_shape(t.val(b), t.val(a).shape, "add");
  Tensor<S> v = t.val(a);
  const auto& vb = t.val(b).data;
  for (size_t i = 0; i < v.data.size(); ++i) v.data[i] += vb[i];
  int out = t.make(std::move(v), t.requires_grad(a) || t.requires_grad(b));
  t.set_backprop(out, [out, a, b](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    if (tp.requires_grad(a)) accumulate(tp.grad(a), g);
    if (tp.requires_grad(b)) accumulate(tp.grad(b), g);
  });
  return out;
}

template <typename S>
int sub(Tape<S>& t, int a, int b) {
  check_shape(t.val(b), t.val(a).shape, "sub");
  Tensor<S> v = t.val(a);
  const auto& vb = t.val(b).data;
  for (size_t i = 0; i < v.data.size(); ++i) v.data[i] -= vb[i];
  int out = t.make(std::move(v), t.requires_grad(a) || t.requires_grad(b));
  t.set_backprop(out, [out, a, b](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    if (tp.requires_grad(a)) accumulate(tp.grad(a), g);
    if (tp.requires_grad(b)) {
      Tensor<S>& gb = tp.grad(b);
      for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= g.data[i];
    }
  });
  return out;
}

template <typename S>
int scale(Tape<S>& t, int a, S k) {
  Tensor<S> v = t.val(a);
  for (auto& x : v.data) x *= k;
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a, k](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Tensor<S>& ga = tp.grad(a);
    for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += k * g.data[i];
  });
  return out;
}

// Sum of scalar nodes; used to accumulate per-class loss terms in a fixed
// order so the reduction is deterministic.
template <typename S>
int add_many(Tape<S>& t, const std::vector<int>& terms) {
  if (terms.empty()) throw ValidationError("add_many: no terms");
  S total = S(0);
  for (int id : terms) {
    if (t.val(id).shape.numel() != 1)
      throw ValidationError("add_many: all terms must be scalar");
    total += t.val(id).data[0];
  }
  bool rg = false;
  for (int id : terms) rg = rg || t.requires_grad(id);
  int out = t.make(Tensor<S>::scalar(total), rg);
  std::vector<int> ids = terms;
  t.set_backprop(out, [out, ids](Tape<S>& tp) {
    S g = tp.grad(out).data[0];
    for (int id : ids)
      if (tp.requires_grad(id)) tp.grad(id).data[0] += g;
  });
  return out;
}

// Broadcast multiply by a constant [H,W] mask over every image and channel.
template <typename S>
int mul_mask(Tape<S>& t, int a, const Tensor<S>& mask) {
  const Shape& s = t.val(a).shape;
  if (s.rank != 4) throw ValidationError("mul_mask: need a 4-d batch");
  if (mask.shape.rank != 2 || mask.shape.d[0] != s.d[2] || mask.shape.d[1] != s.d[3])
    throw ValidationError("mul_mask: mask must match spatial dims");
  const int plane = s.d[2] * s.d[3];
  Tensor<S> v = t.val(a);
  for (size_t i = 0; i < v.data.size(); ++i) v.data[i] *= mask.data[i % plane];
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a, mask, plane](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Tensor<S>& ga = tp.grad(a);
    for (size_t i = 0; i < ga.data.size(); ++i)
      ga.data[i] += g.data[i] * mask.data[i % plane];
  });
  return out;
}

// [N,D] -> [D]: column means over rows. The embedding-mean of Eq.-style
// distribution matching; rejects empty batches.
template <typename S>
int mean_rows(Tape<S>& t, int a) {
  const Shape& s = t.val(a).shape;
  if (s.rank != 2) throw ValidationError("mean_rows: need a 2-d matrix");
  const int n = s.d[0], d = s.d[1];
  if (n == 0) throw ValidationError("mean_rows: empty batch");
  Tensor<S> v = Tensor<S>::zeros(Shape::of(d));
  const auto& va = t.val(a).data;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) v.data[c] += va[(size_t)r * d + c];
  for (auto& x : v.data) x /= S(n);
  int out = t.make(std::move(v), t.requires_grad(a));
  t.set_backprop(out, [out, a, n, d](Tape<S>& tp) {
    const Tensor<S>& g = tp.grad(out);
    Tensor<S>& ga = tp.grad(a);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) ga.data[(size_t)r * d + c] += g.data[c] / S(n);
  });
  return out;
}

template <typename S>
int sum_squares(Tape<S>& t, int a) {
  const auto& va = t.val(a).data;
  S total = S(0);
  for (S x : va) total += x * x;
  int out = t.make(Tensor<S>::scalar(total), t.requires_grad(a));
  t.set_backprop(out, [out, a](Tape<S>& tp) {
    S g = tp.grad(out).data[0];
    const auto& va = tp.val(a).data;
    Tensor<S>& ga = tp.grad(a);
    for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += S(2) * va[i] * g;
  });
  return out;
}

}  // namespace hashcond
