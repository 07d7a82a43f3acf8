// SPDX-License-Identifier: Apache-2.0
#include "vstlm/training/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vstlm/numerics/error.hpp"

namespace vstlm::train {

double cosine_lr(std::int64_t t, std::int64_t total, double lr_max, double lr_min) {
  if (total < 1) throw ConfigError("cosine_lr: total steps must be >= 1");
  if (t >= total) return lr_min;
  if (t <= 0) return lr_max;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

AdamW::AdamW(std::vector<nn::Parameter*> params, AdamWConfig config) : config_(config) {
  for (auto* p : params) {
    if (!p->trainable || p->role == nn::ParamRole::kCodebook) continue;
    params_.push_back(p);
    m_.push_back(nn::Tensor::zeros_like(p->value));
    v_.push_back(nn::Tensor::zeros_like(p->value));
  }
}

void AdamW::step(double lr) {
  for (auto* p : params_) {
    if (!p->grad.all_finite()) throw DivergenceError("non-finite gradient in parameter " + p->name);
  }
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    nn::Parameter& p = *params_[i];
    const double decay = p.decays() ? lr * config_.weight_decay : 0.0;
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= decay * w[k];
      w[k] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

Accumulated accumulate_gradients(std::size_t batch_size, std::size_t micro_batch_size, const MicroStep& micro_step) {
  if (micro_batch_size == 0 || batch_size == 0 || batch_size % micro_batch_size != 0) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " is not a multiple of micro-batch size " +
                      std::to_string(micro_batch_size));
  }
  const double weight = static_cast<double>(micro_batch_size) / static_cast<double>(batch_size);
  Accumulated acc;
  for (std::size_t begin = 0; begin < batch_size; begin += micro_batch_size) {
    acc.loss += weight * micro_step(begin, begin + micro_batch_size, weight);
    ++acc.micro_steps;
  }
  return acc;
}

}  // namespace vstlm::train
