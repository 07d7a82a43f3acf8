// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "vstlm/numerics/tape.hpp"

namespace vstlm::nn {

inline constexpr double kLayerNormEps = 1e-5;
/// Target id that cross_entropy skips.
inline constexpr int kIgnoreTarget = -1;

// Differentiable ops. Every op validates extents and throws ShapeError
// naming both operands on mismatch.

/// a [n x k] * b [k x m]
Var matmul(Tape& t, Var a, Var b);
/// a [n x k] * b^T, b [m x k]
Var matmul_nt(Tape& t, Var a, Var b);
/// x [n x d_in] * W [d_in x d_out] + b [d_out], row by row.
Var affine(Tape& t, Var x, Var w, Var b);
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
/// Sum of all elements, as a scalar.
Var sum(Tape& t, Var a);
/// tanh-form GELU.
Var gelu(Tape& t, Var x);
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = kLayerNormEps);
/// Softmax along `axis`, max-subtracted.
Var softmax(Tape& t, Var x, std::size_t axis);
/// Rows `ids` of `table` [V x d].
Var gather_rows(Tape& t, Var table, std::span<const int> ids);
/// `base` with rows [offset, offset + rows.rows()) replaced by `rows`.
Var replace_rows(Tape& t, Var base, Var rows, std::size_t offset);
/// Column means, [n x d] -> [1 x d].
Var mean_rows(Tape& t, Var x);
/// Forward value `quantized`, gradient passed to `z` unchanged:
/// z + stop_gradient(quantized - z).
Var straight_through(Tape& t, Var z, const Tensor& quantized);
/// Mean over elements of (a - target)^2; target gets no gradient.
Var mean_squared_error(Tape& t, Var a, const Tensor& target);
/// Mean over non-ignored rows of -log softmax(logits)[target].
Var cross_entropy(Tape& t, Var logits, std::span<const int> targets);
/// Inverted dropout; identity when p == 0.
Var dropout(Tape& t, Var x, double p, std::mt19937_64& rng);
/// Row segment i draws its mask from rngs[i], so each sequence in a batch
/// gets the same mask it would get alone.
Var dropout(Tape& t, Var x, double p, std::span<std::mt19937_64> rngs, std::span<const std::size_t> segments);

// Plain evaluation helpers.
Tensor softmax(const Tensor& x, std::size_t axis);
double gelu(double x);

}  // namespace vstlm::nn
