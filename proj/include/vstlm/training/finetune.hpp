// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vstlm/lm/action_lm.hpp"
#include "vstlm/lora/lora.hpp"
#include "vstlm/training/checkpoint.hpp"
#include "vstlm/training/config.hpp"

namespace vstlm::train {

/// One supervised sequence: prompt plus answer, with next-token targets on
/// the answer. Nonempty `semantic_rows` replace the semantic-token
/// embeddings (direct projection).
struct LmExample {
  std::vector<int> ids;
  std::vector<int> targets;
  std::size_t semantic_offset = 1;
  std::size_t answer_position = 0;
  int label = 0;
  nn::Tensor semantic_rows;
};

/// Resumable adapter training on a frozen base. Step s draws its batch from
/// a stream keyed by (seed, s); dropout on sample i of step s uses a stream
/// keyed by (seed, s, i). The logged metric is class accuracy on the batch.
class LoraTrainer {
 public:
  LoraTrainer(lm::ActionLm& model, std::span<const LmExample> examples, TrainConfig config);

  double step();
  void run(const LogSink& sink = {});
  std::int64_t steps_done() const noexcept { return optimizer_.steps(); }
  double last_accuracy() const noexcept { return last_accuracy_; }

  /// Trainer state on top of `base` (normally lm_checkpoint of the model).
  Checkpoint checkpoint(Checkpoint base) const;
  void restore(const Checkpoint& ckpt);

 private:
  lm::ActionLm& model_;
  std::span<const LmExample> examples_;
  TrainConfig config_;
  AdamW optimizer_;
  double last_accuracy_ = 0.0;
};

/// Adapter parameters of every adapted Linear in the model.
std::vector<nn::Parameter*> adapter_parameters(lm::ActionLm& model);

/// A language model together with its vocabulary and adapter settings.
struct LmBundle {
  lm::Vocabulary vocab;
  lm::ActionLm model;
  std::optional<lora::LoraConfig> lora;  // set while adapters are attached
};

/// Config, vocabulary, adapter settings and every parameter (base and adapters).
Checkpoint lm_checkpoint(LmBundle& bundle);
LmBundle load_lm(const Checkpoint& ckpt);

}  // namespace vstlm::train
