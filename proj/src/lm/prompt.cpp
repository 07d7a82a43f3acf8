// SPDX-License-Identifier: Apache-2.0
#include "vstlm/lm/prompt.hpp"

#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/ops.hpp"

namespace vstlm::lm {

Prompt build_prompt(const Vocabulary& vocab, const vst::SemanticTokenSeq& tokens, const std::string& instruction,
                    std::size_t context) {
  if (tokens.ids.empty()) throw DataError(DataError::Kind::kInvalid, "prompt needs at least one semantic token");
  const auto words = vocab.encode_text(instruction);
  if (words.empty()) throw DataError(DataError::Kind::kInvalid, "prompt needs a nonempty instruction");
  Prompt p;
  p.semantic_length = tokens.ids.size();
  const std::size_t length = 3 + tokens.ids.size() + words.size();
  if (length > context) {
    throw ConfigError("prompt of " + std::to_string(length) + " tokens (" + std::to_string(tokens.ids.size()) +
                      " semantic + " + std::to_string(words.size()) + " instruction + 3 control) exceeds context " +
                      std::to_string(context));
  }
  p.ids.reserve(length);
  p.ids.push_back(Vocabulary::kBos);
  for (int v : tokens.ids) p.ids.push_back(vocab.semantic(v));
  p.ids.push_back(Vocabulary::kSep);
  p.ids.insert(p.ids.end(), words.begin(), words.end());
  p.ids.push_back(Vocabulary::kAns);
  return p;
}

std::vector<int> answer_tokens(const Vocabulary& vocab, int label, const std::string& explanation) {
  std::vector<int> ids{vocab.class_token(label)};
  const auto words = vocab.encode_text(explanation);
  ids.insert(ids.end(), words.begin(), words.end());
  ids.push_back(Vocabulary::kEos);
  return ids;
}

TrainingSequence training_sequence(const Vocabulary& vocab, const vst::SemanticTokenSeq& tokens,
                                   const std::string& instruction, int label, const std::string& explanation,
                                   std::size_t context) {
  TrainingSequence s;
  s.prompt = build_prompt(vocab, tokens, instruction, context);
  const auto answer = answer_tokens(vocab, label, explanation);
  s.ids = s.prompt.ids;
  s.ids.insert(s.ids.end(), answer.begin(), answer.end());
  if (s.ids.size() > context) {
    throw ConfigError("prompt plus answer is " + std::to_string(s.ids.size()) + " tokens, context is " +
                      std::to_string(context));
  }
  // Position i predicts token i + 1; only the answer is supervised.
  s.targets.assign(s.ids.size(), nn::kIgnoreTarget);
  for (std::size_t i = s.prompt.answer_position(); i + 1 < s.ids.size(); ++i) s.targets[i] = s.ids[i + 1];
  return s;
}

}  // namespace vstlm::lm
