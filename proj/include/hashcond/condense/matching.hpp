#pragma once

#include <map>

#include "hashcond/aug/policy.hpp"
#include "hashcond/autodiff/ops_basic.hpp"
#include "hashcond/models/network.hpp"

namespace hashcond {

// Class-wise feature-mean discrepancy built on an existing tape. `features`
// maps a batch node to a [N, D] feature node; each class contributes the
// squared distance between the real and synthetic feature means under one
// shared augmentation draw. Classes reduce in ascending order so the sum is
// reproducible.
template <typename S, typename F>
int matching_loss_graph(Tape<S>& t, F&& features, const std::map<int, int>& real_batches,
                        const std::map<int, int>& syn_batches,
                        const std::map<int, AugmentationParams>& w_per_class) {
  if (syn_batches.size() != real_batches.size() ||
      w_per_class.size() != real_batches.size())
    throw ValidationError("matching_loss: class maps differ in size");
  std::vector<int> terms;
  auto si = syn_batches.begin();
  auto wi = w_per_class.begin();
  for (auto ri = real_batches.begin(); ri != real_batches.end(); ++ri, ++si, ++wi) {
    if (ri->first != si->first || ri->first != wi->first)
      throw ValidationError("matching_loss: class maps cover different classes");
    int ar = apply_aug(t, ri->second, wi->second);
    int as = apply_aug(t, si->second, wi->second);
    int diff = sub(t, mean_rows(t, features(t, ar)), mean_rows(t, features(t, as)));
    terms.push_back(sum_squares(t, diff));
  }
  return add_many(t, terms);
}

// Standalone evaluation against a concrete network: real batches are held
// constant, synthetic batches are the differentiable inputs. Returns the
// scalar loss; per-class pixel gradients land in `syn_grads` when requested.
template <typename S>
S matching_loss(const NetParams<S>& theta_aug, const std::map<int, Tensor<S>>& real_batches,
                const std::map<int, Tensor<S>>& syn_batches,
                const std::map<int, AugmentationParams>& w_per_class,
                std::map<int, Tensor<S>>* syn_grads = nullptr) {
  Tape<S> t;
  NetGraph<S> g = push_params(t, theta_aug, false, false);
  std::map<int, int> real_ids, syn_ids;
  for (const auto& [c, x] : real_batches) real_ids[c] = t.leaf(x, false);
  for (const auto& [c, x] : syn_batches) syn_ids[c] = t.leaf(x, syn_grads != nullptr);
  int loss = matching_loss_graph(
      t, [&](Tape<S>& tp, int batch) { return features_graph(tp, g, batch); }, real_ids,
      syn_ids, w_per_class);
  if (syn_grads) {
    t.backward(loss);
    for (const auto& [c, id] : syn_ids) (*syn_grads)[c] = t.grad(id);
  }
  return t.val(loss).data[0];
}

}  // namespace hashcond
