// SPDX-License-Identifier: Apache-2.0
#include "vstlm/numerics/tape.hpp"

#include "vstlm/numerics/error.hpp"

namespace vstlm::nn {

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.view = &p.value;
  n.param = &p;
  n.needs_grad = grad_enabled_ && p.trainable;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  Node n;
  n.owned = std::move(value);
  if (grad_enabled_) {
    for (auto in : inputs) n.needs_grad = n.needs_grad || nodes_[in.id].needs_grad;
    if (n.needs_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.view ? *n.view : n.owned;
}

Tensor& Tape::grad(Var v) {
  Node& n = nodes_[v.id];
  if (n.param) {
    if (!n.param->grad.same_shape(n.param->value)) n.param->grad = Tensor::zeros_like(n.param->value);
    return n.param->grad;
  }
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.owned);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var root) {
  if (!grad_enabled_) throw ConfigError("backward() on a tape with gradients disabled");
  if (value(root).size() != 1) {
    throw ShapeError("backward() needs a scalar root, got " + shape_string(value(root).shape()));
  }
  if (!nodes_[root.id].needs_grad) return;
  grad(root).fill(1.0);
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || !n.has_grad) continue;
    // Move the closure out so it may call grad() (which can touch nodes_) safely.
    Backward fn = std::move(n.backward);
    fn(*this, n.grad);
  }
}

}  // namespace vstlm::nn
