// SPDX-License-Identifier: Apache-2.0
#include "vstlm/numerics/layers.hpp"

#include "vstlm/numerics/attention.hpp"
#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/ops.hpp"
#include "vstlm/numerics/rng.hpp"

namespace vstlm::nn {

Linear::Linear(std::string name_, std::size_t in, std::size_t out, double init_std, std::mt19937_64& rng)
    : name(std::move(name_)),
      weight(name + ".weight", gaussian({in, out}, init_std, rng), ParamRole::kWeight),
      bias(name + ".bias", Tensor({out}), ParamRole::kBias) {}

Linear::Linear(const Linear& other)
    : name(other.name), weight(other.weight), bias(other.bias), adapter(other.adapter ? other.adapter->clone() : nullptr) {}

Linear& Linear::operator=(const Linear& other) {
  if (this != &other) {
    name = other.name;
    weight = other.weight;
    bias = other.bias;
    adapter = other.adapter ? other.adapter->clone() : nullptr;
  }
  return *this;
}

Var Linear::forward(Tape& t, Var x, const ForwardContext& ctx) {
  Var y = affine(t, x, t.parameter(weight), t.parameter(bias));
  if (adapter) y = add(t, y, adapter->apply(t, x, ctx));
  return y;
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
  if (adapter) {
    for (auto* p : adapter->parameters()) out.push_back(p);
  }
}

LayerNorm::LayerNorm(const std::string& name, std::size_t width)
    : gain(name + ".gain", Tensor({width}, 1.0), ParamRole::kGain),
      bias(name + ".bias", Tensor({width}), ParamRole::kBias) {}

Var LayerNorm::forward(Tape& t, Var x) { return layer_norm(t, x, t.parameter(gain), t.parameter(bias)); }

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

SelfAttention::SelfAttention(const std::string& name, std::size_t width, std::size_t heads_, bool causal_,
                             double init_std, std::mt19937_64& rng)
    : query(name + ".query", width, width, init_std, rng),
      key(name + ".key", width, width, init_std, rng),
      value(name + ".value", width, width, init_std, rng),
      output(name + ".output", width, width, init_std, rng),
      heads(heads_),
      causal(causal_) {}

void SelfAttention::collect(std::vector<Parameter*>& out) {
  query.collect(out);
  key.collect(out);
  value.collect(out);
  output.collect(out);
}

Var dropout(Tape& t, Var x, double p, const ForwardContext& ctx) {
  if (!ctx.training || p == 0.0) return x;
  if (!ctx.sample_rngs.empty()) return dropout(t, x, p, ctx.sample_rngs, ctx.segments);
  if (!ctx.rng) throw ConfigError("training-mode dropout needs a random stream");
  return dropout(t, x, p, *ctx.rng);
}

Var multi_head_self_attention(Tape& t, Var x, SelfAttention& attn, const ForwardContext& ctx, Tensor* weights,
                              std::span<const std::size_t> segments) {
  Var q = attn.query.forward(t, x, ctx);
  Var k = attn.key.forward(t, x, ctx);
  Var v = attn.value.forward(t, x, ctx);
  Var mixed = segments.empty() ? scaled_dot_product_attention(t, q, k, v, attn.heads, attn.causal, weights)
                               : scaled_dot_product_attention(t, q, k, v, attn.heads, attn.causal, segments, weights);
  return attn.output.forward(t, mixed, ctx);
}

FeedForward::FeedForward(const std::string& name, std::size_t width, std::size_t hidden, double init_std,
                         std::mt19937_64& rng)
    : up(name + ".up", width, hidden, init_std, rng), down(name + ".down", hidden, width, init_std, rng) {}

Var FeedForward::forward(Tape& t, Var x, const ForwardContext& ctx) {
  return down.forward(t, gelu(t, up.forward(t, x, ctx)), ctx);
}

void FeedForward::collect(std::vector<Parameter*>& out) {
  up.collect(out);
  down.collect(out);
}

TransformerBlock::TransformerBlock(const std::string& name, std::size_t width, std::size_t heads, std::size_t hidden,
                                   bool causal, double init_std, std::mt19937_64& rng)
    : ln_attn(name + ".ln_attn", width),
      attn(name + ".attn", width, heads, causal, init_std, rng),
      ln_ffn(name + ".ln_ffn", width),
      ffn(name + ".ffn", width, hidden, init_std, rng) {}

Var TransformerBlock::forward(Tape& t, Var x, const ForwardContext& ctx, std::span<const std::size_t> segments) {
  Var h = add(t, x, multi_head_self_attention(t, ln_attn.forward(t, x), attn, ctx, nullptr, segments));
  return add(t, h, ffn.forward(t, ln_ffn.forward(t, h), ctx));
}

void TransformerBlock::collect(std::vector<Parameter*>& out) {
  ln_attn.collect(out);
  attn.collect(out);
  ln_ffn.collect(out);
  ffn.collect(out);
}

void TransformerBlock::zero_residual_branches() {
  attn.output.weight.value.fill(0.0);
  attn.output.bias.value.fill(0.0);
  ffn.down.weight.value.fill(0.0);
  ffn.down.bias.value.fill(0.0);
}

}  // namespace vstlm::nn
