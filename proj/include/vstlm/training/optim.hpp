// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "vstlm/numerics/tensor.hpp"

namespace vstlm::train {

/// lr_min + (lr_max - lr_min) * (1 + cos(pi t / T)) / 2; t beyond T yields lr_min.
double cosine_lr(std::int64_t t, std::int64_t total, double lr_max, double lr_min = 0.0);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with bias correction and decoupled weight decay. Decay touches
/// weight matrices only; biases, gains and codebooks are exempt. Only
/// trainable, non-codebook parameters are stepped.
class AdamW {
 public:
  AdamW(std::vector<nn::Parameter*> params, AdamWConfig config);

  /// One update from the gradients currently held by the parameters.
  /// Throws DivergenceError naming the parameter on a non-finite gradient.
  void step(double lr);
  void zero_grad();

  std::int64_t steps() const noexcept { return step_; }
  const std::vector<nn::Parameter*>& parameters() const noexcept { return params_; }
  const AdamWConfig& config() const noexcept { return config_; }

  nn::Tensor& first_moment(std::size_t i) { return m_[i]; }
  nn::Tensor& second_moment(std::size_t i) { return v_[i]; }
  const nn::Tensor& first_moment(std::size_t i) const { return m_[i]; }
  const nn::Tensor& second_moment(std::size_t i) const { return v_[i]; }
  void set_steps(std::int64_t steps) { step_ = steps; }

 private:
  std::vector<nn::Parameter*> params_;
  AdamWConfig config_;
  std::vector<nn::Tensor> m_;
  std::vector<nn::Tensor> v_;
  std::int64_t step_ = 0;
};

/// Runs the mean loss over samples [begin, end), back-propagates
/// weight * loss, and returns the unweighted mean loss.
using MicroStep = std::function<double(std::size_t begin, std::size_t end, double weight)>;

struct Accumulated {
  double loss = 0.0;  // mean loss over the full batch
  std::size_t micro_steps = 0;
};

/// Splits a batch into micro-batches and sums their gradients, each weighted
/// by micro / batch, so the result equals the full-batch gradient of the
/// mean loss.
Accumulated accumulate_gradients(std::size_t batch_size, std::size_t micro_batch_size, const MicroStep& micro_step);

}  // namespace vstlm::train
