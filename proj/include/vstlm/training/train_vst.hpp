// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vstlm/data/synthetic.hpp"
#include "vstlm/training/checkpoint.hpp"
#include "vstlm/training/config.hpp"
#include "vstlm/vst/vst.hpp"

namespace vstlm::train {

/// Resumable VST optimization. Step s draws its batch from a stream keyed by
/// (seed, s), so a restored trainer continues exactly where it stopped.
/// The logged metric is codebook utilization over the training samples.
class VstTrainer {
 public:
  VstTrainer(vst::VstModel& model, std::span<const data::ActionSample> samples, TrainConfig config);

  /// One optimizer step; returns the mean batch loss. Throws DivergenceError
  /// on a non-finite loss or gradient, leaving the model untouched.
  double step();
  /// Steps until `iterations` are done, reporting every `log_every` steps.
  void run(const LogSink& sink = {});

  std::int64_t steps_done() const noexcept { return optimizer_.steps(); }
  /// Distinct token ids over the training samples, divided by V.
  double utilization() const;

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  vst::VstModel& model_;
  std::span<const data::ActionSample> samples_;
  TrainConfig config_;
  AdamW optimizer_;
  bool seeded_ = false;
};

/// Trains a fresh model from `seed` and returns it.
vst::VstModel train_vst(std::span<const data::ActionSample> samples, const vst::VstConfig& vst_config,
                        const TrainConfig& config, const LogSink& sink = {});

void vst_config_to_metadata(const vst::VstConfig& config, std::map<std::string, std::string>& meta);
vst::VstConfig vst_config_from_metadata(const std::map<std::string, std::string>& meta);

/// Model parameters, codebook EMA state and config snapshot.
Checkpoint vst_checkpoint(vst::VstModel& model);
vst::VstModel load_vst(const Checkpoint& ckpt);

}  // namespace vstlm::train
