// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <vector>

#include "vstlm/numerics/tensor.hpp"

namespace vstlm::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = UINT32_MAX;
};

/// Records a forward computation so it can be differentiated in reverse.
///
/// Leaves are either constants or bound Parameters. A Parameter leaf
/// accumulates its gradient straight into Parameter::grad, so several
/// tapes run back to back sum their contributions. Frozen parameters and
/// constants do not need gradients; ops whose inputs need none skip their
/// backward entirely. A tape built with gradients disabled never stores
/// backward closures (inference mode).
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Parameter& p);

  /// Appends an op output. `backward` is kept only if some input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);

  const Tensor& value(Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  /// Gradient buffer of `v`, zero-initialized on first access.
  Tensor& grad(Var v);

  /// Seeds d(root)/d(root) = 1 and runs every recorded backward in reverse.
  void backward(Var root);

  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* view = nullptr;
    Parameter* param = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    Backward backward;
  };

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

}  // namespace vstlm::nn
