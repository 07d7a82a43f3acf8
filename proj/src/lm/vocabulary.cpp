// SPDX-License-Identifier: Apache-2.0
#include "vstlm/lm/vocabulary.hpp"

#include "vstlm/data/corpus.hpp"
#include "vstlm/numerics/error.hpp"

namespace vstlm::lm {
namespace {

constexpr const char* kControlSymbols[] = {"<pad>", "<bos>", "<sep>", "<ans>", "<eos>", "<unk>"};

}  // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& words, std::size_t semantic_tokens, std::size_t classes)
    : semantic_(semantic_tokens), classes_(classes) {
  if (semantic_tokens < 1 || classes < 2) throw ConfigError("vocabulary needs >= 1 semantic token and >= 2 classes");
  for (const auto& w : words) {
    if (w.empty() || index_.count(w)) continue;
    index_[w] = static_cast<int>(kControlTokens + words_.size());
    words_.push_back(w);
  }
  semantic_begin_ = kControlTokens + words_.size();
  class_begin_ = semantic_begin_ + semantic_;
}

int Vocabulary::word(const std::string& w) const {
  auto it = index_.find(w);
  return it == index_.end() ? kUnk : it->second;
}

int Vocabulary::semantic(int v) const {
  if (v < 0 || static_cast<std::size_t>(v) >= semantic_) {
    throw DataError(DataError::Kind::kInvalid,
                    "semantic token " + std::to_string(v) + " outside [0, " + std::to_string(semantic_) + ")");
  }
  return static_cast<int>(semantic_begin_) + v;
}

int Vocabulary::class_token(int c) const {
  if (c < 0 || static_cast<std::size_t>(c) >= classes_) {
    throw DataError(DataError::Kind::kInvalid,
                    "class " + std::to_string(c) + " outside [0, " + std::to_string(classes_) + ")");
  }
  return static_cast<int>(class_begin_) + c;
}

bool Vocabulary::is_semantic(int id) const noexcept {
  return id >= static_cast<int>(semantic_begin_) && id < static_cast<int>(class_begin_);
}

bool Vocabulary::is_class(int id) const noexcept {
  return id >= static_cast<int>(class_begin_) && id < static_cast<int>(size());
}

int Vocabulary::class_of(int id) const {
  if (!is_class(id)) throw DataError(DataError::Kind::kInvalid, "token " + std::to_string(id) + " is not a class token");
  return id - static_cast<int>(class_begin_);
}

std::vector<int> Vocabulary::encode_text(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& w : data::split_words(text)) ids.push_back(word(w));
  return ids;
}

std::string Vocabulary::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) return "<?" + std::to_string(id) + ">";
  if (static_cast<std::size_t>(id) < kControlTokens) return kControlSymbols[id];
  if (static_cast<std::size_t>(id) < semantic_begin_) return words_[static_cast<std::size_t>(id) - kControlTokens];
  if (is_semantic(id)) return "<v" + std::to_string(id - static_cast<int>(semantic_begin_)) + ">";
  return "<cls_" + std::to_string(class_of(id)) + ">";
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) out += (out.empty() ? "" : " ") + symbol(id);
  return out;
}

Vocabulary build_vocabulary(std::size_t semantic_tokens, std::size_t classes, std::size_t phases,
                            const std::string& instruction) {
  return Vocabulary(data::corpus_words(classes, phases, instruction), semantic_tokens, classes);
}

}  // namespace vstlm::lm
