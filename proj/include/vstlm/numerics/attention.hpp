// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "vstlm/numerics/tape.hpp"

namespace vstlm::nn {

/// Scaled dot-product attention over per-head column blocks of q, k, v
/// (each [M x d], d divisible by `heads`), scale 1/sqrt(d/heads). With
/// `causal`, position i attends only to positions <= i. If `weights` is
/// given it receives the attention probabilities as [heads x M x M].
Var scaled_dot_product_attention(Tape& t, Var q, Var k, Var v, std::size_t heads, bool causal,
                                 Tensor* weights = nullptr);

/// Batched form: rows are split into consecutive segments of the given
/// lengths (summing to M), and each segment attends only within itself.
/// Weights, if requested, are [heads x M x M] with zeros across segments.
Var scaled_dot_product_attention(Tape& t, Var q, Var k, Var v, std::size_t heads, bool causal,
                                 std::span<const std::size_t> segments, Tensor* weights = nullptr);

}  // namespace vstlm::nn
