// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vstlm/numerics/layers.hpp"

namespace vstlm::lora {

struct LoraConfig {
  std::size_t rank = 8;
  double alpha = 16.0;
  double dropout = 0.1;
  double init_std = 0.02;
  /// A Linear is adapted when its name ends with one of these suffixes.
  std::vector<std::string> targets = {"attn.query", "attn.value"};

  /// Throws ConfigError unless rank >= 1, alpha > 0 and 0 <= dropout < 1.
  void validate() const;
};

/// Low-rank branch (alpha / r) * dropout(x) A^T B^T added to a frozen
/// x W0 + b. A is [r x d_in], B is [d_out x r] and starts at zero.
class LoraAdapter final : public nn::Adapter {
 public:
  LoraAdapter(const std::string& target, std::size_t d_in, std::size_t d_out, const LoraConfig& config,
              std::mt19937_64& rng);

  nn::Var apply(nn::Tape& t, nn::Var x, const nn::ForwardContext& ctx) override;
  std::vector<nn::Parameter*> parameters() override;
  std::unique_ptr<nn::Adapter> clone() const override;

  double scale() const noexcept { return alpha / static_cast<double>(rank); }
  /// (alpha / r) A^T B^T in the [d_in x d_out] orientation of W0.
  nn::Tensor delta() const;

  std::string target;
  std::size_t rank;
  double alpha;
  double dropout;
  nn::Parameter a;  // [r x d_in]
  nn::Parameter b;  // [d_out x r]
};

/// Attaches an adapter to every selected Linear and freezes its W0 and bias.
/// Streams are keyed by (seed, position in `linears`). Throws ConfigError if
/// nothing matches or a selected Linear already carries an adapter.
std::vector<LoraAdapter*> attach_adapters(std::span<nn::Linear* const> linears, const LoraConfig& config,
                                          std::uint64_t seed);

LoraAdapter* adapter_of(nn::Linear& linear);

/// x W0 + b + adapter branch: the adapted forward of one Linear.
nn::Var lora_forward(nn::Tape& t, nn::Var x, nn::Linear& linear, const nn::ForwardContext& ctx);

/// W0 + (alpha / r) A^T B^T.
nn::Tensor merge(const nn::Linear& linear);
/// Folds every adapter into its weight and detaches it. Returns the count.
std::size_t merge_adapters(std::span<nn::Linear* const> linears);

/// Trainable scalars over all scalars (adapters included).
double trainable_fraction(std::span<nn::Parameter* const> params);

}  // namespace vstlm::lora
