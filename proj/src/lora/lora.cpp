// SPDX-License-Identifier: Apache-2.0
#include "vstlm/lora/lora.hpp"

#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/ops.hpp"
#include "vstlm/numerics/rng.hpp"

namespace vstlm::lora {
namespace {

constexpr std::uint64_t kLoraStream = 0x4c6f5241;

bool selected(const std::string& name, const std::vector<std::string>& targets) {
  for (const auto& suffix : targets) {
    if (name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return true;
    }
  }
  return false;
}

}  // namespace

void LoraConfig::validate() const {
  if (rank < 1) throw ConfigError("lora: rank must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("lora: alpha must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("lora: dropout must lie in [0, 1)");
  if (!(init_std >= 0.0)) throw ConfigError("lora: init_std must be >= 0");
  if (targets.empty()) throw ConfigError("lora: no target names");
}

LoraAdapter::LoraAdapter(const std::string& target_name, std::size_t d_in, std::size_t d_out,
                         const LoraConfig& config, std::mt19937_64& rng)
    : target(target_name),
      rank(config.rank),
      alpha(config.alpha),
      dropout(config.dropout),
      a(target_name + ".lora_a", nn::gaussian({config.rank, d_in}, config.init_std, rng)),
      b(target_name + ".lora_b", nn::Tensor({d_out, config.rank})) {
  config.validate();
}

nn::Var LoraAdapter::apply(nn::Tape& t, nn::Var x, const nn::ForwardContext& ctx) {
  nn::Var h = nn::dropout(t, x, dropout, ctx);
  nn::Var low = nn::matmul_nt(t, h, t.parameter(a));
  return nn::scale(t, nn::matmul_nt(t, low, t.parameter(b)), scale());
}

std::vector<nn::Parameter*> LoraAdapter::parameters() { return {&a, &b}; }

std::unique_ptr<nn::Adapter> LoraAdapter::clone() const { return std::make_unique<LoraAdapter>(*this); }

nn::Tensor LoraAdapter::delta() const {
  const std::size_t d_in = a.value.cols();
  const std::size_t d_out = b.value.rows();
  nn::Tensor d({d_in, d_out});
  for (std::size_t i = 0; i < d_in; ++i) {
    for (std::size_t o = 0; o < d_out; ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < rank; ++k) acc += a.value.at(k, i) * b.value.at(o, k);
      d.at(i, o) = scale() * acc;
    }
  }
  return d;
}

std::vector<LoraAdapter*> attach_adapters(std::span<nn::Linear* const> linears, const LoraConfig& config,
                                          std::uint64_t seed) {
  config.validate();
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < linears.size(); ++i) {
    if (!selected(linears[i]->name, config.targets)) continue;
    if (linears[i]->adapter) throw ConfigError("lora: '" + linears[i]->name + "' already has an adapter");
    picks.push_back(i);
  }
  if (picks.empty()) {
    std::string names;
    for (const auto& s : config.targets) names += (names.empty() ? "" : ", ") + s;
    throw ConfigError("lora: target selector {" + names + "} matches no linear layer");
  }
  std::vector<LoraAdapter*> out;
  for (std::size_t i : picks) {
    nn::Linear& lin = *linears[i];
    auto rng = nn::keyed_stream(seed, {nn::stream::kInit, kLoraStream, i});
    auto adapter = std::make_unique<LoraAdapter>(lin.name, lin.weight.value.rows(), lin.weight.value.cols(), config, rng);
    out.push_back(adapter.get());
    lin.adapter = std::move(adapter);
    lin.weight.trainable = false;
    lin.bias.trainable = false;
  }
  return out;
}

LoraAdapter* adapter_of(nn::Linear& linear) { return dynamic_cast<LoraAdapter*>(linear.adapter.get()); }

nn::Var lora_forward(nn::Tape& t, nn::Var x, nn::Linear& linear, const nn::ForwardContext& ctx) {
  return linear.forward(t, x, ctx);
}

nn::Tensor merge(const nn::Linear& linear) {
  nn::Tensor w = linear.weight.value;
  if (const auto* a = dynamic_cast<const LoraAdapter*>(linear.adapter.get())) w += a->delta();
  return w;
}

std::size_t merge_adapters(std::span<nn::Linear* const> linears) {
  std::size_t merged = 0;
  for (auto* lin : linears) {
    if (!adapter_of(*lin)) continue;
    lin->weight.value = merge(*lin);
    lin->adapter.reset();
    ++merged;
  }
  return merged;
}

double trainable_fraction(std::span<nn::Parameter* const> params) {
  const std::size_t total = nn::count_scalars(params, false);
  if (total == 0) throw ConfigError("trainable_fraction: model has no parameters");
  return static_cast<double>(nn::count_scalars(params, true)) / static_cast<double>(total);
}

}  // namespace vstlm::lora
