// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "vstlm/numerics/tensor.hpp"

namespace vstlm::vst {

/// Learnable token vocabulary: V embedding rows moved by exponential moving
/// averages of the encoder outputs assigned to them (never by the optimizer).
class Codebook {
 public:
  Codebook() = default;
  Codebook(std::size_t size, std::size_t dim, std::mt19937_64& rng);

  std::size_t size() const { return embeddings.value.rows(); }
  std::size_t dim() const { return embeddings.value.cols(); }

  /// Overwrites every row with a row of `samples`, drawn without replacement
  /// while enough distinct rows remain. Resets the EMA state.
  void seed_from(const nn::Tensor& samples, std::mt19937_64& rng);

  /// One EMA step over a batch of assigned rows:
  ///   N_i <- g N_i + (1 - g) n_i,  m_i <- g m_i + (1 - g) sum(z),  e_i <- m_i / N_i
  /// Rows with no assignment keep their embedding unchanged.
  void ema_update(const nn::Tensor& z, std::span<const int> ids, double decay, std::int64_t step);

  /// Rows unused for at least `patience` steps are re-seeded to random rows of
  /// `recent`. Returns how many were re-seeded.
  std::size_t reseed_dead(const nn::Tensor& recent, std::int64_t step, std::int64_t patience, std::mt19937_64& rng);

  nn::Parameter embeddings;            // [V x d_e], role kCodebook, not trainable
  std::vector<double> ema_count;       // N_i
  nn::Tensor ema_sum;                  // m_i, [V x d_e]
  std::vector<std::int64_t> last_used;
  std::vector<std::uint64_t> usage;    // cumulative assignment counts
};

struct Quantized {
  std::vector<int> ids;
  nn::Tensor rows;  // selected codebook rows, same shape as the input
};

/// Nearest codebook row per input row under squared Euclidean distance; ties
/// go to the lowest index.
Quantized quantize(const nn::Tensor& z, const nn::Tensor& codebook);

}  // namespace vstlm::vst
