#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "ego/tensor.hpp"

namespace ego {

// Reverse-mode gradient tape. Operations append nodes in topological order
// (inputs always precede outputs); backward() walks the list once in reverse.
// Construction and backward are single-threaded; recorded values are
// immutable after emission.
template <typename S>
class Tape {
 public:
  // Accumulates this node's output gradient into its inputs' gradients.
  using BackwardFn = std::function<void(Tape&, int self)>;

  struct Node {
    Tensor<S> value;
    Tensor<S> grad;  // allocated lazily during backward
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
  };

  // When set, every emitted forward value is checked for NaN/Inf.
  bool finite_checks = true;

  int leaf(Tensor<S> value, bool requires_grad) {
    return emit(std::move(value), {}, nullptr, requires_grad);
  }
  int leaf(const Tensor<S>& value) { return leaf(value, value.requires_grad); }
  int constant(Tensor<S> value) { return leaf(std::move(value), false); }

  int emit(Tensor<S> value, std::vector<int> inputs, BackwardFn backward,
           bool force_requires_grad = false) {
    if (finite_checks && !value.all_finite())
      throw NumericError("non-finite value produced at tape node " +
                         std::to_string(nodes_.size()));
    bool rg = force_requires_grad;
    for (int i : inputs) {
      if (i < 0 || i >= static_cast<int>(nodes_.size()))
        throw DimensionError("tape input id out of order");
      rg = rg || nodes_[static_cast<std::size_t>(i)].requires_grad;
    }
    Node n;
    n.value = std::move(value);
    n.requires_grad = rg;
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Tensor<S>& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  bool requires_grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).requires_grad; }
  const std::vector<int>& inputs(int id) const { return nodes_.at(static_cast<std::size_t>(id)).inputs; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient accumulator for a node, allocated on first use.
  Tensor<S>& grad(int id) {
    Node& n = nodes_.at(static_cast<std::size_t>(id));
    if (!n.has_grad) {
      n.grad = Tensor<S>(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  bool has_grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).has_grad; }

  // Reverse sweep from a scalar loss. Every upstream requires_grad node gets
  // a gradient; leaves off the active path keep a zero gradient of matching
  // shape. Calling backward twice without reset() is an error.
  void backward(int loss_id) {
    if (backward_done_)
      throw NumericError("backward already ran on this tape; reset() first");
    const Node& loss = nodes_.at(static_cast<std::size_t>(loss_id));
    if (loss.value.numel() != 1)
      throw DimensionError("backward requires a scalar loss, got shape " +
                           Tensor<S>::shape_str(loss.value.shape()));
    grad(loss_id).flat().setConstant(S(1));
    for (int id = loss_id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.requires_grad || !n.has_grad || !n.backward) continue;
      n.backward(*this, id);
    }
    // Materialize zero grads for requires_grad leaves that were disconnected.
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      Node& n = nodes_[id];
      if (n.requires_grad && n.inputs.empty() && !n.has_grad) grad(static_cast<int>(id));
    }
    backward_done_ = true;
  }

  void reset() {
    nodes_.clear();
    backward_done_ = false;
  }

 private:
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Lightweight handle for expression-style op composition.
template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  const Tensor<S>& value() const { return tape->value(id); }
  const Tensor<S>& grad() const { return tape->grad(id); }
  const std::vector<int>& shape() const { return tape->value(id).shape(); }
  std::int64_t numel() const { return tape->value(id).numel(); }
  S scalar() const {
    if (value().numel() != 1) throw DimensionError("scalar() on non-scalar var");
    return value()[0];
  }
};

template <typename S>
Var<S> make_leaf(Tape<S>& t, Tensor<S> v, bool requires_grad) {
  return Var<S>{&t, t.leaf(std::move(v), requires_grad)};
}

template <typename S>
Var<S> make_constant(Tape<S>& t, Tensor<S> v) {
  return Var<S>{&t, t.constant(std::move(v))};
}

}  // namespace ego
