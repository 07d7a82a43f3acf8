// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vstlm/lm/vocabulary.hpp"
#include "vstlm/vst/types.hpp"

namespace vstlm::lm {

/// <bos> semantic ids <sep> instruction ids <ans>
struct Prompt {
  std::vector<int> ids;
  std::size_t semantic_offset = 1;
  std::size_t semantic_length = 0;

  std::size_t answer_position() const { return ids.size() - 1; }
};

/// Throws DataError for an empty token sequence or instruction and
/// ConfigError when the prompt is longer than `context`.
Prompt build_prompt(const Vocabulary& vocab, const vst::SemanticTokenSeq& tokens, const std::string& instruction,
                    std::size_t context);

/// <cls_c> explanation words <eos>
std::vector<int> answer_tokens(const Vocabulary& vocab, int label, const std::string& explanation);

/// A prompt followed by its answer, with next-token targets on the answer
/// only (kIgnoreTarget elsewhere).
struct TrainingSequence {
  Prompt prompt;
  std::vector<int> ids;
  std::vector<int> targets;
};

TrainingSequence training_sequence(const Vocabulary& vocab, const vst::SemanticTokenSeq& tokens,
                                   const std::string& instruction, int label, const std::string& explanation,
                                   std::size_t context);

}  // namespace vstlm::lm
