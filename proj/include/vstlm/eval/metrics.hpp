// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vstlm/data/synthetic.hpp"
#include "vstlm/training/pipeline.hpp"
#include "vstlm/vst/types.hpp"

namespace vstlm::eval {

struct TokenStats {
  double avg_len = 0.0;
  std::size_t unique_count = 0;
  double entropy_bits = 0.0;  // of the empirical id distribution
  double utilization = 0.0;   // unique_count / V
};

/// Throws DataError on empty input or an id outside [0, V).
TokenStats token_statistics(std::span<const std::vector<int>> sequences, std::size_t codebook_size);
TokenStats token_statistics(std::span<const vst::SemanticTokenSeq> sequences, std::size_t codebook_size);

struct ClassAccuracy {
  int label = 0;
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;  // 0 when count is 0
};

struct EfficiencyReport {
  std::size_t total_params = 0;
  std::size_t trainable_params = 0;
  double trainable_fraction = 0.0;
  double seconds_per_100_steps = 0.0;
  double seconds_per_inference = 0.0;         // adapters as separate branches
  double seconds_per_inference_merged = 0.0;  // adapters folded into the weights
};

struct EvalReport {
  std::string protocol;
  double accuracy = 0.0;
  std::size_t samples = 0;
  std::vector<ClassAccuracy> per_class;
  std::optional<TokenStats> tokens;
  std::optional<EfficiencyReport> efficiency;
  std::map<std::string, std::string> config;
};

/// Accuracy and per-class breakdown from predictions. Throws DataError on
/// empty or mismatched input.
EvalReport score(std::span<const int> predicted, std::span<const int> labels, std::size_t classes,
                 const std::string& protocol);

/// Stable `key: value` lines.
std::string format_report(const EvalReport& report);

/// Encodes each sample with the VST and classifies it with the LM.
std::vector<int> predict(train::LmBundle& lm, vst::VstModel& vst, std::span<const data::ActionSample> samples,
                         const std::string& instruction, train::Variant variant = train::Variant::kFull);

EvalReport accuracy(train::LmBundle& lm, vst::VstModel& vst, std::span<const data::ActionSample> test,
                    const std::string& protocol, const std::string& instruction,
                    train::Variant variant = train::Variant::kFull);

struct MatchRate {
  double exact = 0.0;    // share of greedy explanations equal to the target
  double overlap = 0.0;  // mean position-wise token agreement
  std::size_t samples = 0;
};

/// Decodes after the true class token of each sample.
MatchRate explanation_match_rate(train::LmBundle& lm, vst::VstModel& vst, std::span<const data::ActionSample> samples,
                                 const std::string& instruction, std::size_t max_len = 32,
                                 train::Variant variant = train::Variant::kFull);

}  // namespace vstlm::eval
