// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vstlm::data {

/// Generic sentences for language-model pretraining. Only text words appear;
/// no visual or class symbols.
struct CorpusConfig {
  std::size_t sentences = 2000;
  std::size_t classes = 10;
  std::size_t phases = 4;
  std::string instruction;        // included verbatim (lowercased) as one sentence kind
  double template_fraction = 0.5; // share of explanation-shaped sentences
  double instruction_fraction = 0.2;
  std::size_t salad_min = 4;
  std::size_t salad_max = 12;
  std::uint64_t seed = 7;
};

/// Lowercase and split on whitespace.
std::vector<std::string> split_words(const std::string& text);

/// Every word the corpus and the explanation templates can produce, in a
/// fixed order: instruction words first, then template words, then class names.
std::vector<std::string> corpus_words(std::size_t classes, std::size_t phases, const std::string& instruction);

std::vector<std::string> generate_corpus(const CorpusConfig& config);

}  // namespace vstlm::data
