// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vstlm/lm/action_lm.hpp"
#include "vstlm/training/config.hpp"

namespace vstlm::lm {

struct PretrainConfig {
  std::size_t steps = 1000;  // 0 leaves the random initialization
  std::size_t batch = 32;    // sentences per step
  double lr = 1e-3;
  double lr_min = 0.0;
  std::uint64_t seed = 7;
  std::size_t log_every = 100;

  void validate() const;
};

/// <bos> words <eos>
std::vector<int> sentence_ids(const Vocabulary& vocab, const std::string& sentence);

/// Next-token training on plain sentences. Returns the per-step batch loss.
std::vector<double> pretrain_base(ActionLm& model, const Vocabulary& vocab, const std::vector<std::string>& corpus,
                                  const PretrainConfig& config, const train::LogSink& sink = {});

/// exp of the mean next-token negative log-likelihood over all sentences.
double perplexity(ActionLm& model, const Vocabulary& vocab, const std::vector<std::string>& sentences);

}  // namespace vstlm::lm
