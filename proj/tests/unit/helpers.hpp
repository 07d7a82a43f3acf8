// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vstlm/numerics/ops.hpp"
#include "vstlm/numerics/rng.hpp"
#include "vstlm/numerics/tensor.hpp"

namespace vstlm::testing {

inline nn::Tensor random_tensor(nn::Shape shape, std::uint64_t seed, double stddev = 1.0) {
  auto rng = nn::keyed_stream(seed, {0x7e57});
  return nn::gaussian(std::move(shape), stddev, rng);
}

/// Scalar readout with a generic (non-constant) upstream gradient.
inline nn::Var readout(nn::Tape& t, nn::Var x, std::uint64_t seed) {
  return nn::mean_squared_error(t, x, random_tensor(t.value(x).shape(), seed));
}

}  // namespace vstlm::testing
