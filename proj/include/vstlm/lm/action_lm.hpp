// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vstlm/lm/prompt.hpp"
#include "vstlm/lm/vocabulary.hpp"
#include "vstlm/numerics/layers.hpp"

namespace vstlm::lm {

struct LmConfig {
  std::size_t vocab_size = 0;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t embed_dim = 128;  // d_e
  std::size_t context = 128;
  std::size_t ffn_mult = 4;
  double init_std = 0.02;

  void validate() const;
};

/// Continuous rows that replace token embeddings starting at `row` of the
/// stacked input (the direct-projection path).
struct RowOverride {
  std::size_t row = 0;
  nn::Tensor rows;
};

/// Several sequences stacked row-wise.
struct LmBatch {
  std::vector<int> ids;
  std::vector<std::size_t> lengths;
  std::vector<RowOverride> overrides;

  void add(std::span<const int> sequence);
};

/// Decoder-only transformer with learned positions and an untied output head.
class ActionLm {
 public:
  ActionLm() = default;
  ActionLm(const LmConfig& config, std::uint64_t seed);

  const LmConfig& config() const noexcept { return config_; }

  /// Logits [L x vocab] for one sequence.
  nn::Var forward(nn::Tape& t, std::span<const int> ids, const nn::ForwardContext& ctx);
  /// Logits for a stacked batch; sequences never attend to each other.
  nn::Var forward(nn::Tape& t, const LmBatch& batch, const nn::ForwardContext& ctx);

  /// Copies codebook rows [V x d_e] into the semantic-token embedding rows.
  void install_semantic_embeddings(const nn::Tensor& codebook, const Vocabulary& vocab);
  /// Marks every base parameter (not adapters) frozen.
  void freeze_base();

  std::vector<nn::Parameter*> parameters();       // base and adapters
  std::vector<nn::Parameter*> base_parameters();  // base only
  std::vector<nn::Linear*> linears();

  nn::Parameter token_embedding;  // [vocab x d_e]
  nn::Parameter positions;        // [context x d_e]
  std::vector<nn::TransformerBlock> blocks;
  nn::LayerNorm final_norm;
  nn::Linear head;                // d_e -> vocab

 private:
  LmConfig config_;
};

/// Argmax over class-token logits at the <ans> position; ties to the lowest class.
int classify(ActionLm& model, const Vocabulary& vocab, const Prompt& prompt, const nn::Tensor* semantic_rows = nullptr);
int classify(ActionLm& model, const Vocabulary& vocab, const vst::SemanticTokenSeq& tokens,
             const std::string& instruction);
/// Class-token logits [classes] at the <ans> position.
std::vector<double> class_logits(ActionLm& model, const Vocabulary& vocab, const Prompt& prompt,
                                 const nn::Tensor* semantic_rows = nullptr);

struct Explanation {
  std::vector<int> ids;  // emitted tokens after <cls_C>, without <eos>
  bool truncated = false;
  std::string text;
};

/// Greedy decoding after <ans> <cls_label> until <eos> or `max_len` tokens.
Explanation generate_explanation(ActionLm& model, const Vocabulary& vocab, const Prompt& prompt, int label,
                                 std::size_t max_len = 32, const nn::Tensor* semantic_rows = nullptr);

}  // namespace vstlm::lm
