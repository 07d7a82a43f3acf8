// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace vstlm::lm {

/// Dense id space, in order: control tokens, text words, semantic tokens
/// <v0>..<v{V-1}>, class tokens <cls_0>..<cls_{C-1}>.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kSep = 2;
  static constexpr int kAns = 3;
  static constexpr int kEos = 4;
  static constexpr int kUnk = 5;
  static constexpr std::size_t kControlTokens = 6;

  Vocabulary() = default;
  /// Duplicate words are kept once, first occurrence wins.
  Vocabulary(const std::vector<std::string>& words, std::size_t semantic_tokens, std::size_t classes);

  std::size_t size() const noexcept { return class_begin_ + classes_; }
  std::size_t words() const noexcept { return words_.size(); }
  std::size_t semantic_tokens() const noexcept { return semantic_; }
  std::size_t classes() const noexcept { return classes_; }

  /// Word id, or kUnk for a word outside the vocabulary.
  int word(const std::string& w) const;
  int semantic(int v) const;
  int class_token(int c) const;
  bool is_semantic(int id) const noexcept;
  bool is_class(int id) const noexcept;
  int class_of(int id) const;
  std::size_t semantic_begin() const noexcept { return semantic_begin_; }
  std::size_t class_begin() const noexcept { return class_begin_; }

  /// Lowercased, whitespace-split, unknown words as kUnk.
  std::vector<int> encode_text(const std::string& text) const;
  std::string symbol(int id) const;
  /// Symbols joined by single spaces.
  std::string decode(std::span<const int> ids) const;

  const std::vector<std::string>& word_list() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
  std::size_t semantic_ = 0;
  std::size_t classes_ = 0;
  std::size_t semantic_begin_ = kControlTokens;
  std::size_t class_begin_ = kControlTokens;
};

/// The default instruction given to the model.
inline constexpr char kDefaultInstruction[] = "Please identify the action in this video. What is happening?";

/// Vocabulary over the instruction, template and class-name words.
Vocabulary build_vocabulary(std::size_t semantic_tokens, std::size_t classes, std::size_t phases,
                            const std::string& instruction = kDefaultInstruction);

}  // namespace vstlm::lm
