// SPDX-License-Identifier: Apache-2.0
#include "vstlm/lm/action_lm.hpp"

#include <algorithm>
#include <numeric>

#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/ops.hpp"
#include "vstlm/numerics/rng.hpp"

namespace vstlm::lm {

void LmConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("lm config: " + what); };
  if (vocab_size < 1) fail("vocab_size must be >= 1");
  if (layers < 1) fail("layers must be >= 1");
  if (heads < 1 || embed_dim % heads != 0) fail("embed_dim must be divisible by heads");
  if (context < 1) fail("context must be >= 1");
  if (ffn_mult < 1) fail("ffn_mult must be >= 1");
  if (!(init_std > 0.0)) fail("init_std must be > 0");
}

void LmBatch::add(std::span<const int> sequence) {
  ids.insert(ids.end(), sequence.begin(), sequence.end());
  lengths.push_back(sequence.size());
}

ActionLm::ActionLm(const LmConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  auto rng = nn::keyed_stream(seed, {nn::stream::kInit, 0x4c4d});
  const std::size_t d = config_.embed_dim;
  const double s = config_.init_std;
  token_embedding = nn::Parameter("lm.token_embedding", nn::gaussian({config_.vocab_size, d}, s, rng));
  positions = nn::Parameter("lm.positions", nn::gaussian({config_.context, d}, s, rng));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    blocks.emplace_back("lm.blocks." + std::to_string(l), d, config_.heads, d * config_.ffn_mult, true, s, rng);
  }
  final_norm = nn::LayerNorm("lm.final_norm", d);
  head = nn::Linear("lm.head", d, config_.vocab_size, s, rng);
}

nn::Var ActionLm::forward(nn::Tape& t, std::span<const int> ids, const nn::ForwardContext& ctx) {
  LmBatch batch;
  batch.add(ids);
  return forward(t, batch, ctx);
}

nn::Var ActionLm::forward(nn::Tape& t, const LmBatch& batch, const nn::ForwardContext& ctx) {
  const std::size_t rows = batch.ids.size();
  if (rows == 0 || std::accumulate(batch.lengths.begin(), batch.lengths.end(), std::size_t{0}) != rows) {
    throw ShapeError("lm forward: sequence lengths do not cover the " + std::to_string(rows) + " input ids");
  }
  std::vector<int> pos;
  pos.reserve(rows);
  for (std::size_t len : batch.lengths) {
    if (len > config_.context) {
      throw ConfigError("sequence of " + std::to_string(len) + " tokens exceeds context " +
                        std::to_string(config_.context));
    }
    for (std::size_t i = 0; i < len; ++i) pos.push_back(static_cast<int>(i));
  }
  for (int id : batch.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw DataError(DataError::Kind::kInvalid,
                      "token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(config_.vocab_size));
    }
  }
  nn::Var tok = nn::gather_rows(t, t.parameter(token_embedding), batch.ids);
  for (const auto& o : batch.overrides) tok = nn::replace_rows(t, tok, t.constant(o.rows), o.row);
  nn::Var x = nn::add(t, tok, nn::gather_rows(t, t.parameter(positions), pos));
  const std::span<const std::size_t> segments =
      batch.lengths.size() == 1 ? std::span<const std::size_t>{} : std::span<const std::size_t>(batch.lengths);
  nn::ForwardContext inner = ctx;
  if (!ctx.sample_rngs.empty() && ctx.segments.empty()) inner.segments = batch.lengths;
  for (auto& b : blocks) x = b.forward(t, x, inner, segments);
  return head.forward(t, final_norm.forward(t, x), inner);
}

void ActionLm::install_semantic_embeddings(const nn::Tensor& codebook, const Vocabulary& vocab) {
  if (codebook.rank() != 2 || codebook.rows() != vocab.semantic_tokens() || codebook.cols() != config_.embed_dim) {
    throw ShapeError("codebook " + nn::shape_string(codebook.shape()) + " does not fit " +
                     std::to_string(vocab.semantic_tokens()) + " semantic tokens of width " +
                     std::to_string(config_.embed_dim));
  }
  if (vocab.size() != config_.vocab_size) throw ShapeError("vocabulary size does not match the model");
  for (std::size_t v = 0; v < codebook.rows(); ++v) {
    auto src = codebook.row(v);
    std::copy(src.begin(), src.end(), token_embedding.value.row(vocab.semantic_begin() + v).begin());
  }
}

void ActionLm::freeze_base() {
  for (auto* p : base_parameters()) p->trainable = false;
}

std::vector<nn::Parameter*> ActionLm::parameters() {
  std::vector<nn::Parameter*> out{&token_embedding, &positions};
  for (auto& b : blocks) b.collect(out);
  final_norm.collect(out);
  head.collect(out);
  return out;
}

std::vector<nn::Parameter*> ActionLm::base_parameters() {
  std::vector<nn::Parameter*> adapters;
  for (auto* lin : linears()) {
    if (lin->adapter) {
      for (auto* p : lin->adapter->parameters()) adapters.push_back(p);
    }
  }
  std::vector<nn::Parameter*> out;
  for (auto* p : parameters()) {
    if (std::find(adapters.begin(), adapters.end(), p) == adapters.end()) out.push_back(p);
  }
  return out;
}

std::vector<nn::Linear*> ActionLm::linears() {
  std::vector<nn::Linear*> out;
  for (auto& b : blocks) {
    for (auto* lin : {&b.attn.query, &b.attn.key, &b.attn.value, &b.attn.output, &b.ffn.up, &b.ffn.down}) {
      out.push_back(lin);
    }
  }
  out.push_back(&head);
  return out;
}

namespace {

nn::Tensor last_logits(ActionLm& model, std::span<const int> ids, const Prompt& prompt,
                       const nn::Tensor* semantic_rows) {
  nn::Tape t(false);
  LmBatch batch;
  batch.add(ids);
  if (semantic_rows) batch.overrides.push_back({prompt.semantic_offset, *semantic_rows});
  const nn::Tensor& logits = t.value(model.forward(t, batch, nn::ForwardContext{}));
  nn::Tensor out({logits.cols()});
  auto last = logits.row(logits.rows() - 1);
  std::copy(last.begin(), last.end(), out.data());
  return out;
}

}  // namespace

std::vector<double> class_logits(ActionLm& model, const Vocabulary& vocab, const Prompt& prompt,
                                 const nn::Tensor* semantic_rows) {
  const nn::Tensor logits = last_logits(model, prompt.ids, prompt, semantic_rows);
  std::vector<double> out(vocab.classes());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = logits[vocab.class_begin() + c];
  return out;
}

int classify(ActionLm& model, const Vocabulary& vocab, const Prompt& prompt, const nn::Tensor* semantic_rows) {
  const auto scores = class_logits(model, vocab, prompt, semantic_rows);
  // max_element returns the first maximum, which is the lowest class id.
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

int classify(ActionLm& model, const Vocabulary& vocab, const vst::SemanticTokenSeq& tokens,
             const std::string& instruction) {
  return classify(model, vocab, build_prompt(vocab, tokens, instruction, model.config().context));
}

Explanation generate_explanation(ActionLm& model, const Vocabulary& vocab, const Prompt& prompt, int label,
                                 std::size_t max_len, const nn::Tensor* semantic_rows) {
  Explanation e;
  std::vector<int> seq = prompt.ids;
  seq.push_back(vocab.class_token(label));
  bool stopped = false;
  while (e.ids.size() < max_len && seq.size() < model.config().context) {
    const nn::Tensor logits = last_logits(model, seq, prompt, semantic_rows);
    const auto values = logits.values();
    const int next = static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
    if (next == Vocabulary::kEos) {
      stopped = true;
      break;
    }
    e.ids.push_back(next);
    seq.push_back(next);
  }
  e.truncated = !stopped;
  e.text = vocab.decode(e.ids);
  return e;
}

}  // namespace vstlm::lm
