// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vstlm/numerics/tape.hpp"

namespace vstlm::nn {

struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // dropout draws; required when training with dropout
  // Per-sequence dropout streams for stacked batches; overrides `rng`.
  std::span<std::mt19937_64> sample_rngs;
  std::span<const std::size_t> segments;
};

/// Dropout under the context's mode and streams; identity at evaluation.
Var dropout(Tape& t, Var x, double p, const ForwardContext& ctx);

/// Extra branch added to a Linear's output (implemented by LoRA).
class Adapter {
 public:
  virtual ~Adapter() = default;
  virtual Var apply(Tape& t, Var x, const ForwardContext& ctx) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::unique_ptr<Adapter> clone() const = 0;
};

/// y = x W + b, plus the adapter branch when one is attached.
struct Linear {
  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out, double init_std, std::mt19937_64& rng);
  Linear(const Linear& other);
  Linear& operator=(const Linear& other);
  Linear(Linear&&) noexcept = default;
  Linear& operator=(Linear&&) noexcept = default;

  Var forward(Tape& t, Var x, const ForwardContext& ctx);
  void collect(std::vector<Parameter*>& out);

  std::string name;
  Parameter weight;  // [in x out]
  Parameter bias;    // [out]
  std::unique_ptr<Adapter> adapter;
};

struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t width);
  Var forward(Tape& t, Var x);
  void collect(std::vector<Parameter*>& out);

  Parameter gain;
  Parameter bias;
};

struct SelfAttention {
  SelfAttention() = default;
  SelfAttention(const std::string& name, std::size_t width, std::size_t heads, bool causal, double init_std,
                std::mt19937_64& rng);
  void collect(std::vector<Parameter*>& out);

  Linear query, key, value, output;
  std::size_t heads = 1;
  bool causal = false;
};

/// Projects x to queries/keys/values, attends per head, projects back.
/// Nonempty `segments` splits the rows into independent sequences.
Var multi_head_self_attention(Tape& t, Var x, SelfAttention& attn, const ForwardContext& ctx,
                              Tensor* weights = nullptr, std::span<const std::size_t> segments = {});

struct FeedForward {
  FeedForward() = default;
  FeedForward(const std::string& name, std::size_t width, std::size_t hidden, double init_std, std::mt19937_64& rng);
  Var forward(Tape& t, Var x, const ForwardContext& ctx);
  void collect(std::vector<Parameter*>& out);

  Linear up, down;
};

/// Pre-norm residual block: x + attn(ln(x)), then + ffn(ln(x)).
struct TransformerBlock {
  TransformerBlock() = default;
  TransformerBlock(const std::string& name, std::size_t width, std::size_t heads, std::size_t hidden, bool causal,
                   double init_std, std::mt19937_64& rng);
  Var forward(Tape& t, Var x, const ForwardContext& ctx, std::span<const std::size_t> segments = {});
  void collect(std::vector<Parameter*>& out);
  /// Zeroes the residual-branch output projections, making the block the identity.
  void zero_residual_branches();

  LayerNorm ln_attn;
  SelfAttention attn;
  LayerNorm ln_ffn;
  FeedForward ffn;
};

}  // namespace vstlm::nn
