// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "vstlm/numerics/tape.hpp"

namespace vstlm::nn {

struct GradCheckOptions {
  double step = 1e-5;
  /// Denominator floor: |a - n| / max(|a|, |n|, floor). Keeps near-zero
  /// gradients from turning rounding noise into large relative errors.
  double floor = 1e-4;
  /// Elements probed per parameter, evenly spaced; 0 probes all of them.
  std::size_t max_per_parameter = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t probed = 0;
  /// A frozen parameter received a nonzero gradient.
  bool frozen_leak = false;

  bool passed(double tolerance) const { return !frozen_leak && max_rel_error < tolerance; }
};

/// Builds the scalar loss on the tape it is given.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares backward-pass gradients against central finite differences
/// (f(p + h) - f(p - h)) / 2h for every trainable parameter. Frozen
/// parameters are excluded but must end with a zero gradient. Throws
/// ConfigError when two evaluations at the same point differ.
GradCheckResult grad_check(const LossBuilder& loss, std::span<Parameter* const> params,
                           const GradCheckOptions& options = {});

}  // namespace vstlm::nn
