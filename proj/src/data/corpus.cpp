// SPDX-License-Identifier: Apache-2.0
#include "vstlm/data/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <sstream>

#include "vstlm/data/synthetic.hpp"
#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/rng.hpp"

namespace vstlm::data {

std::vector<std::string> split_words(const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  std::istringstream in(lower);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<std::string> corpus_words(std::size_t classes, std::size_t phases, const std::string& instruction) {
  std::vector<std::string> out;
  auto add = [&out](const std::string& w) {
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
  };
  for (const auto& w : split_words(instruction)) add(w);
  for (const char* w : {"subject", "performs", "through", "phases"}) add(w);
  for (std::size_t l = 1; l <= phases; ++l) add("p" + std::to_string(l));
  for (std::size_t c = 0; c < classes; ++c) add(class_name(c));
  return out;
}

std::vector<std::string> generate_corpus(const CorpusConfig& config) {
  if (config.salad_min < 1 || config.salad_max < config.salad_min) {
    throw ConfigError("corpus: word-salad length range must satisfy 1 <= min <= max");
  }
  if (config.template_fraction < 0 || config.instruction_fraction < 0 ||
      config.template_fraction + config.instruction_fraction > 1.0) {
    throw ConfigError("corpus: sentence-kind fractions must be nonnegative and sum to <= 1");
  }
  const auto words = corpus_words(config.classes, config.phases, config.instruction);
  const std::string instruction = [&] {
    std::string s;
    for (const auto& w : split_words(config.instruction)) s += (s.empty() ? "" : " ") + w;
    return s;
  }();
  std::vector<std::string> out;
  out.reserve(config.sentences);
  for (std::size_t i = 0; i < config.sentences; ++i) {
    auto rng = nn::keyed_stream(config.seed, {nn::stream::kCorpus, i});
    const double kind = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (kind < config.template_fraction) {
      const auto c = std::uniform_int_distribution<std::size_t>(0, config.classes - 1)(rng);
      out.push_back(explanation_text(c, config.phases));
    } else if (kind < config.template_fraction + config.instruction_fraction && !instruction.empty()) {
      out.push_back(instruction);
    } else {
      const auto n = std::uniform_int_distribution<std::size_t>(config.salad_min, config.salad_max)(rng);
      std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
      std::string s;
      for (std::size_t k = 0; k < n; ++k) s += (k ? " " : "") + words[pick(rng)];
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace vstlm::data
