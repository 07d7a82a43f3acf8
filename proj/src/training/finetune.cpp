// SPDX-License-Identifier: Apache-2.0
#include "vstlm/training/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/ops.hpp"
#include "vstlm/numerics/rng.hpp"

namespace vstlm::train {
namespace {

constexpr std::uint64_t kLoraTag = 0x4c4f;

std::string join(const std::vector<std::string>& words, char sep) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += sep;
    out += w;
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, sep);) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::vector<nn::Parameter*> adapter_parameters(lm::ActionLm& model) {
  std::vector<nn::Parameter*> out;
  for (auto* lin : model.linears()) {
    if (lin->adapter) {
      for (auto* p : lin->adapter->parameters()) out.push_back(p);
    }
  }
  return out;
}

LoraTrainer::LoraTrainer(lm::ActionLm& model, std::span<const LmExample> examples, TrainConfig config)
    : model_(model), examples_(examples), config_(config), optimizer_(adapter_parameters(model), config.adam) {
  config_.validate();
  if (examples_.empty()) throw DataError(DataError::Kind::kInvalid, "finetune: empty dataset");
  if (optimizer_.parameters().empty()) throw ConfigError("finetune: no adapters are attached");
  for (auto* p : model_.base_parameters()) {
    if (p->trainable) throw ConfigError("finetune: base parameter '" + p->name + "' is not frozen");
  }
}

double LoraTrainer::step() {
  const std::int64_t s = steps_done();
  const auto su = static_cast<std::uint64_t>(s);
  const std::size_t batch = config_.batch_size;
  std::vector<std::size_t> picks(batch);
  {
    auto rng = nn::keyed_stream(config_.seed, {nn::stream::kBatch, kLoraTag, su});
    std::uniform_int_distribution<std::size_t> pick(0, examples_.size() - 1);
    for (auto& p : picks) p = pick(rng);
  }
  std::size_t correct = 0;
  const auto acc = accumulate_gradients(batch, config_.micro_batch_size, [&](std::size_t begin, std::size_t end,
                                                                             double weight) {
    lm::LmBatch lb;
    std::vector<int> targets;
    std::vector<std::mt19937_64> rngs;
    std::vector<std::size_t> answer_rows;
    for (std::size_t i = begin; i < end; ++i) {
      const LmExample& ex = examples_[picks[i]];
      const std::size_t offset = lb.ids.size();
      lb.add(ex.ids);
      targets.insert(targets.end(), ex.targets.begin(), ex.targets.end());
      if (ex.semantic_rows.size() > 0) lb.overrides.push_back({offset + ex.semantic_offset, ex.semantic_rows});
      rngs.push_back(nn::keyed_stream(config_.seed, {nn::stream::kDropout, kLoraTag, su, i}));
      answer_rows.push_back(offset + ex.answer_position);
    }
    nn::ForwardContext ctx;
    ctx.training = true;
    ctx.sample_rngs = rngs;
    nn::Tape t;
    const nn::Var logits = model_.forward(t, lb, ctx);
    const nn::Var loss = nn::cross_entropy(t, logits, targets);
    const double mean = t.value(loss).item();
    if (!std::isfinite(mean)) throw DivergenceError("finetune loss is not finite at step " + std::to_string(s));
    const nn::Tensor& lv = t.value(logits);
    for (std::size_t row : answer_rows) {
      auto r = lv.row(row);
      const auto best = std::max_element(r.begin(), r.end()) - r.begin();
      if (best == targets[row]) ++correct;
    }
    t.backward(nn::scale(t, loss, weight));
    return mean;
  });
  optimizer_.step(cosine_lr(s, config_.iterations, config_.lr, config_.lr_min));
  optimizer_.zero_grad();
  last_accuracy_ = static_cast<double>(correct) / static_cast<double>(batch);
  return acc.loss;
}

void LoraTrainer::run(const LogSink& sink) {
  while (steps_done() < config_.iterations) {
    const std::int64_t s = steps_done();
    const double lr = cosine_lr(s, config_.iterations, config_.lr, config_.lr_min);
    const double loss = step();
    const bool log = (s + 1) % config_.log_every == 0 || s + 1 == config_.iterations || s == 0;
    if (sink && log) sink({s + 1, loss, lr, last_accuracy_});
  }
}

Checkpoint LoraTrainer::checkpoint(Checkpoint base) const {
  base.metadata["stage"] = stage_name(Stage::kLora);
  base.metadata["step"] = std::to_string(steps_done());
  config_.to_metadata(base.metadata, "train.");
  store_optimizer(base, optimizer_);
  return base;
}

void LoraTrainer::restore(const Checkpoint& ckpt) {
  if (ckpt.meta("stage") != stage_name(Stage::kLora)) {
    throw DataError(DataError::Kind::kInvalid, "checkpoint stage is '" + ckpt.meta("stage") + "', expected lora");
  }
  restore_parameters(ckpt, model_.parameters());
  restore_optimizer(ckpt, optimizer_);
}

Checkpoint lm_checkpoint(LmBundle& bundle) {
  Checkpoint ckpt;
  auto& m = ckpt.metadata;
  const auto& c = bundle.model.config();
  m["lm.vocab_size"] = std::to_string(c.vocab_size);
  m["lm.layers"] = std::to_string(c.layers);
  m["lm.heads"] = std::to_string(c.heads);
  m["lm.embed_dim"] = std::to_string(c.embed_dim);
  m["lm.context"] = std::to_string(c.context);
  m["lm.ffn_mult"] = std::to_string(c.ffn_mult);
  m["lm.init_std"] = format_double(c.init_std);
  m["vocab.words"] = join(bundle.vocab.word_list(), ' ');
  m["vocab.semantic"] = std::to_string(bundle.vocab.semantic_tokens());
  m["vocab.classes"] = std::to_string(bundle.vocab.classes());
  m["lora.attached"] = bundle.lora ? "1" : "0";
  if (bundle.lora) {
    m["lora.rank"] = std::to_string(bundle.lora->rank);
    m["lora.alpha"] = format_double(bundle.lora->alpha);
    m["lora.dropout"] = format_double(bundle.lora->dropout);
    m["lora.init_std"] = format_double(bundle.lora->init_std);
    m["lora.targets"] = join(bundle.lora->targets, ',');
  }
  store_parameters(ckpt, bundle.model.parameters());
  return ckpt;
}

LmBundle load_lm(const Checkpoint& ckpt) {
  const auto& m = ckpt.metadata;
  lm::LmConfig c;
  c.vocab_size = parse_meta<std::size_t>(m, "lm.vocab_size");
  c.layers = parse_meta<std::size_t>(m, "lm.layers");
  c.heads = parse_meta<std::size_t>(m, "lm.heads");
  c.embed_dim = parse_meta<std::size_t>(m, "lm.embed_dim");
  c.context = parse_meta<std::size_t>(m, "lm.context");
  c.ffn_mult = parse_meta<std::size_t>(m, "lm.ffn_mult");
  c.init_std = parse_meta<double>(m, "lm.init_std");
  LmBundle out;
  out.vocab = lm::Vocabulary(split(ckpt.meta("vocab.words"), ' '), parse_meta<std::size_t>(m, "vocab.semantic"),
                             parse_meta<std::size_t>(m, "vocab.classes"));
  if (out.vocab.size() != c.vocab_size) {
    throw DataError(DataError::Kind::kInvalid, "checkpoint vocabulary does not match lm.vocab_size");
  }
  out.model = lm::ActionLm(c, 0);
  if (ckpt.meta("lora.attached") == "1") {
    lora::LoraConfig lc;
    lc.rank = parse_meta<std::size_t>(m, "lora.rank");
    lc.alpha = parse_meta<double>(m, "lora.alpha");
    lc.dropout = parse_meta<double>(m, "lora.dropout");
    lc.init_std = parse_meta<double>(m, "lora.init_std");
    lc.targets = split(ckpt.meta("lora.targets"), ',');
    out.model.freeze_base();
    const auto linears = out.model.linears();
    lora::attach_adapters(linears, lc, 0);
    out.lora = lc;
  }
  restore_parameters(ckpt, out.model.parameters());
  return out;
}

}  // namespace vstlm::train
