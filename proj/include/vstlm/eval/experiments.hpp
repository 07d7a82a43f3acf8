// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vstlm/eval/metrics.hpp"

namespace vstlm::eval {

/// Trained pieces shared by several experiments.
struct Stages {
  data::Split split;
  vst::VstModel vst;
  train::LmBundle base;  // pretrained, before adaptation
};

/// Data, split, VST training and LM pretraining for one config.
Stages prepare(const train::PipelineConfig& config, const train::LogSink& vst_sink = {},
               const train::LogSink& pretrain_sink = {});

struct AblationRow {
  train::Variant variant = train::Variant::kFull;
  double accuracy = 0.0;
};

/// Full, direct-projection and zero-shot variants on the same VST and base.
std::vector<AblationRow> ablation_suite(Stages& stages, const train::PipelineConfig& config);
std::vector<AblationRow> ablation_suite(const train::PipelineConfig& config);

struct SweepCell {
  std::string group;  // "baseline", "rank" or "tokens"
  std::size_t rank = 0;
  std::size_t codebook_size = 0;
  double accuracy = 0.0;
  std::size_t adapter_scalars = 0;
  bool baseline = false;
};

/// Baseline cell, then one cell per rank != baseline rank, then one per
/// codebook size != baseline size. Each cell trains from `config`'s seeds.
std::vector<SweepCell> hyperparam_sweep(const train::PipelineConfig& config, const std::vector<std::size_t>& ranks,
                                        const std::vector<std::size_t>& codebook_sizes);

std::string format_ablation(const std::vector<AblationRow>& rows);
std::string format_sweep(const std::vector<SweepCell>& cells);

}  // namespace vstlm::eval
