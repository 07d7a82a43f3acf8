// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "vstlm/eval/metrics.hpp"

namespace vstlm::eval {

/// Median wall-clock seconds over max(probes, 5) calls.
double median_seconds(const std::function<void()>& probe, std::size_t probes = 5);

/// Parameter counts of the bundle as it stands, plus timings measured on
/// copies: one optimizer step over `train` (scaled to 100 steps) and one
/// VST encode + classify per video, with adapters unmerged and merged.
EfficiencyReport efficiency_report(const train::LmBundle& lm, vst::VstModel& vst,
                                   std::span<const data::ActionSample> train, std::span<const data::ActionSample> probe,
                                   const train::TrainConfig& config, const std::string& instruction,
                                   std::size_t probes = 5);

}  // namespace vstlm::eval
