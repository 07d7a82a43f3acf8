// SPDX-License-Identifier: Apache-2.0
#include "vstlm/lm/pretrain.hpp"

#include <cmath>
#include <random>

#include "vstlm/data/corpus.hpp"
#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/ops.hpp"
#include "vstlm/numerics/rng.hpp"
#include "vstlm/training/optim.hpp"

namespace vstlm::lm {

void PretrainConfig::validate() const {
  if (batch < 1) throw ConfigError("pretrain batch must be >= 1");
  if (!(lr > 0.0) || lr_min < 0.0 || lr_min > lr) throw ConfigError("pretrain needs 0 <= lr_min <= lr, lr > 0");
}

std::vector<int> sentence_ids(const Vocabulary& vocab, const std::string& sentence) {
  std::vector<int> ids{Vocabulary::kBos};
  for (const auto& w : data::split_words(sentence)) ids.push_back(vocab.word(w));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

namespace {

// Appends one sentence to the batch with shifted next-token targets.
void add_sentence(LmBatch& batch, std::vector<int>& targets, const std::vector<int>& ids) {
  batch.add(ids);
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) targets.push_back(ids[i + 1]);
  targets.push_back(nn::kIgnoreTarget);
}

}  // namespace

std::vector<double> pretrain_base(ActionLm& model, const Vocabulary& vocab, const std::vector<std::string>& corpus,
                                  const PretrainConfig& config, const train::LogSink& sink) {
  config.validate();
  std::vector<double> losses;
  if (config.steps == 0) return losses;
  if (corpus.empty()) throw DataError(DataError::Kind::kInvalid, "pretraining corpus is empty");

  std::vector<std::vector<int>> encoded;
  encoded.reserve(corpus.size());
  for (const auto& s : corpus) encoded.push_back(sentence_ids(vocab, s));

  train::AdamW optimizer(model.base_parameters(), train::AdamWConfig{});
  const auto total = static_cast<std::int64_t>(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    auto rng = nn::keyed_stream(config.seed, {nn::stream::kBatch, 0x4c4d, step});
    std::uniform_int_distribution<std::size_t> pick(0, encoded.size() - 1);
    LmBatch batch;
    std::vector<int> targets;
    for (std::size_t b = 0; b < config.batch; ++b) add_sentence(batch, targets, encoded[pick(rng)]);

    optimizer.zero_grad();
    nn::Tape t;
    const nn::Var loss = nn::cross_entropy(t, model.forward(t, batch, nn::ForwardContext{}), targets);
    const double value = t.value(loss).item();
    if (!std::isfinite(value)) throw DivergenceError("pretraining loss is not finite at step " + std::to_string(step));
    t.backward(loss);
    const double lr = train::cosine_lr(static_cast<std::int64_t>(step), total, config.lr, config.lr_min);
    optimizer.step(lr);
    losses.push_back(value);
    const std::size_t done = step + 1;
    if (sink && (done == 1 || done % config.log_every == 0 || done == config.steps)) {
      sink(train::LogRecord{static_cast<std::int64_t>(done), value, lr, std::exp(value)});
    }
  }
  return losses;
}

double perplexity(ActionLm& model, const Vocabulary& vocab, const std::vector<std::string>& sentences) {
  double nll = 0.0;
  std::size_t count = 0;
  for (const auto& s : sentences) {
    LmBatch batch;
    std::vector<int> targets;
    add_sentence(batch, targets, sentence_ids(vocab, s));
    nn::Tape t(false);
    const double loss = t.value(nn::cross_entropy(t, model.forward(t, batch, nn::ForwardContext{}), targets)).item();
    const std::size_t n = batch.ids.size() - 1;
    nll += loss * static_cast<double>(n);
    count += n;
  }
  if (count == 0) throw DataError(DataError::Kind::kInvalid, "perplexity needs at least one sentence");
  return std::exp(nll / static_cast<double>(count));
}

}  // namespace vstlm::lm
