#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "hashcond/core/tensor.hpp"

namespace hashcond {

// Reverse-mode tape over Tensor<S>. Nodes are created in topological order by
// the op functions (see autodiff/ops_*.hpp), so backward() is a single reverse
// sweep. A node only records a backprop closure when some input requires
// gradients; forward-only subgraphs (real batches, evaluation) cost nothing
// extra. One tape per loss evaluation; scrap it afterwards.
template <typename S>
class Tape {
 public:
  using Id = int;

  struct Node {
    Tensor<S> value;
    Tensor<S> grad;  // allocated lazily; empty until touched
    bool requires_grad = false;
    std::function<void(Tape&)> backprop;
  };

  Id leaf(Tensor<S> v, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(v), {}, requires_grad, {}});
    return static_cast<Id>(nodes_.size() - 1);
  }

  // Creates a node; the backprop closure (which captures this id) is attached
  // afterwards via set_backprop, and only when requires_grad is set.
  Id make(Tensor<S> v, bool requires_grad) {
    nodes_.push_back(Node{std::move(v), {}, requires_grad, {}});
    return static_cast<Id>(nodes_.size() - 1);
  }

  void set_backprop(Id id, std::function<void(Tape&)> bp) {
    if (nodes_[id].requires_grad) nodes_[id].backprop = std::move(bp);
  }

  const Tensor<S>& val(Id id) const { return nodes_[id].value; }
  Tensor<S>& val(Id id) { return nodes_[id].value; }

  bool requires_grad(Id id) const { return nodes_[id].requires_grad; }
  bool has_grad(Id id) const { return !nodes_[id].grad.data.empty(); }

  // Gradient buffer for a node, allocated as zeros on first access.
  Tensor<S>& grad(Id id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty()) n.grad = Tensor<S>::zeros(n.value.shape);
    return n.grad;
  }

  void backward(Id root) {
    if (nodes_[root].value.shape.numel() != 1)
      throw ValidationError("backward: root must be a scalar node");
    grad(root).data[0] = S(1);
    sweep(root);
  }

  // Seeds the sweep at an arbitrary node with an externally computed gradient.
  void backward_from(Id node, const Tensor<S>& seed) {
    check_shape(seed, nodes_[node].value.shape, "backward_from");
    Tensor<S>& g = grad(node);
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += seed.data[i];
    sweep(node);
  }

  size_t size() const { return nodes_.size(); }

 private:
  void sweep(Id from) {
    for (Id i = from; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.backprop && !n.grad.data.empty()) n.backprop(*this);
    }
  }

  std::vector<Node> nodes_;
};

template <typename S>
inline void accumulate(Tensor<S>& dst, const Tensor<S>& src) {
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace hashcond
