#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "hashcond/autodiff/tape.hpp"
#include "hashcond/core/errors.hpp"

namespace hashcond {

namespace detail {

template <typename S>
void check_code_inputs(const Tensor<S>& v, const std::vector<int>& labels,
                       const Tensor<S>& codebook) {
  if (v.shape.rank != 2) throw ValidationError("hash_loss: codes must be [N, K]");
  if (codebook.shape.rank != 2 || codebook.shape.d[1] != v.shape.d[1])
    throw ValidationError("hash_loss: codebook width does not match codes");
  if ((int)labels.size() != v.shape.d[0])
    throw ValidationError("hash_loss: one label per code row required");
  for (int y : labels)
    if (y < 0 || y >= codebook.shape.d[0])
      throw ValidationError("hash_loss: label out of codebook range");
}

}  // namespace detail

// mean_i [1 - cos(v_i, t_{y_i})] + lambda * mean_{i,k} (|v_ik| - 1)^2, with
// the class targets held constant. Fused forward/backward because cosine
// against a constant row is cheaper by hand than via primitive composition.
template <typename S>
int hash_center_loss(Tape<S>& t, int v_id, const std::vector<int>& labels,
                     const Tensor<S>& codebook, S lambda) {
  const Tensor<S>& v = t.val(v_id);
  detail::check_code_inputs(v, labels, codebook);
  if (lambda < 0) throw ValidationError("hash_loss: quant_weight must be >= 0");
  const int n = v.shape.d[0], k = v.shape.d[1];
  if (n == 0) throw ValidationError("hash_loss: empty batch");

  const S tnorm = std::sqrt((S)k);
  const S eps = (S)1e-12;
  S total = 0;
  std::vector<S> vnorm((size_t)n), vdot((size_t)n);
  for (int i = 0; i < n; ++i) {
    const S* vi = v.data.data() + (size_t)i * k;
    const S* ti = codebook.data.data() + (size_t)labels[(size_t)i] * k;
    S n2 = 0, dot = 0;
    for (int j = 0; j < k; ++j) {
      n2 += vi[j] * vi[j];
      dot += vi[j] * ti[j];
    }
    vnorm[(size_t)i] = std::sqrt(n2);
    vdot[(size_t)i] = dot;
    const S cosv = dot / (std::max(vnorm[(size_t)i], eps) * tnorm);
    total += 1 - cosv;
    for (int j = 0; j < k; ++j) {
      const S q = std::abs(vi[j]) - 1;
      total += lambda * q * q / (S)k;
    }
  }
  int out = t.make(Tensor<S>::scalar(total / (S)n), t.requires_grad(v_id));
  Tensor<S> cb = codebook;
  std::vector<int> ls = labels;
  t.set_backprop(out, [out, v_id, cb, ls, lambda, n, k, tnorm, eps, vnorm,
                       vdot](Tape<S>& tp) {
    if (!tp.requires_grad(v_id)) return;
    const S g = tp.grad(out).data[0];
    const Tensor<S>& v = tp.val(v_id);
    Tensor<S>& gv = tp.grad(v_id);
    for (int i = 0; i < n; ++i) {
      const S* vi = v.data.data() + (size_t)i * k;
      const S* ti = cb.data.data() + (size_t)ls[(size_t)i] * k;
      S* gi = gv.data.data() + (size_t)i * k;
      const S nv = std::max(vnorm[(size_t)i], eps);
      const S inv = 1 / (nv * tnorm);
      const S dscale = vdot[(size_t)i] / (nv * nv);
      for (int j = 0; j < k; ++j) {
        // d(1-cos)/dv = -(t/(|v||t|) - v <v,t>/(|v|^3 |t|))
        S dcos = -(ti[j] - vi[j] * dscale) * inv;
        S sign = vi[j] > 0 ? S(1) : (vi[j] < 0 ? S(-1) : S(0));
        S dquant = 2 * lambda * (std::abs(vi[j]) - 1) * sign / (S)k;
        gi[j] += g * (dcos + dquant) / (S)n;
      }
    }
  });
  return out;
}

// mean_i ||v_i - t_{y_i}||^2 / K + the same quantization term: an alternative
// center loss for the generalization harness.
template <typename S>
int hash_center_l2_loss(Tape<S>& t, int v_id, const std::vector<int>& labels,
                        const Tensor<S>& codebook, S lambda) {
  const Tensor<S>& v = t.val(v_id);
  detail::check_code_inputs(v, labels, codebook);
  if (lambda < 0) throw ValidationError("hash_loss: quant_weight must be >= 0");
  const int n = v.shape.d[0], k = v.shape.d[1];
  if (n == 0) throw ValidationError("hash_loss: empty batch");
  S total = 0;
  for (int i = 0; i < n; ++i) {
    const S* vi = v.data.data() + (size_t)i * k;
    const S* ti = codebook.data.data() + (size_t)labels[(size_t)i] * k;
    for (int j = 0; j < k; ++j) {
      const S d = vi[j] - ti[j];
      const S q = std::abs(vi[j]) - 1;
      total += (d * d + lambda * q * q) / (S)k;
    }
  }
  int out = t.make(Tensor<S>::scalar(total / (S)n), t.requires_grad(v_id));
  Tensor<S> cb = codebook;
  std::vector<int> ls = labels;
  t.set_backprop(out, [out, v_id, cb, ls, lambda, n, k](Tape<S>& tp) {
    if (!tp.requires_grad(v_id)) return;
    const S g = tp.grad(out).data[0];
    const Tensor<S>& v = tp.val(v_id);
    Tensor<S>& gv = tp.grad(v_id);
    for (int i = 0; i < n; ++i) {
      const S* vi = v.data.data() + (size_t)i * k;
      const S* ti = cb.data.data() + (size_t)ls[(size_t)i] * k;
      S* gi = gv.data.data() + (size_t)i * k;
      for (int j = 0; j < k; ++j) {
        S sign = vi[j] > 0 ? S(1) : (vi[j] < 0 ? S(-1) : S(0));
        gi[j] += g * 2 * (vi[j] - ti[j] + lambda * (std::abs(vi[j]) - 1) * sign) /
                 (S)(n * k);
      }
    }
  });
  return out;
}

// Loss plugins by name; the generalization harness iterates over these.
template <typename S>
using HashLossFn = std::function<int(Tape<S>&, int, const std::vector<int>&,
                                     const Tensor<S>&, S)>;

template <typename S>
const std::map<std::string, HashLossFn<S>>& hash_loss_registry() {
  static const std::map<std::string, HashLossFn<S>> reg{
      {"center-cos", [](Tape<S>& t, int v, const std::vector<int>& l, const Tensor<S>& cb,
                        S lam) { return hash_center_loss(t, v, l, cb, lam); }},
      {"center-l2", [](Tape<S>& t, int v, const std::vector<int>& l, const Tensor<S>& cb,
                       S lam) { return hash_center_l2_loss(t, v, l, cb, lam); }}};
  return reg;
}

template <typename S>
HashLossFn<S> hash_loss_by_id(const std::string& id) {
  const auto& reg = hash_loss_registry<S>();
  auto it = reg.find(id);
  if (it == reg.end()) throw ConfigError("unknown hash loss: " + id);
  return it->second;
}

}  // namespace hashcond
