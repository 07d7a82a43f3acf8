// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "vstlm/data/corpus.hpp"
#include "vstlm/data/split.hpp"
#include "vstlm/data/synthetic.hpp"
#include "vstlm/lm/pretrain.hpp"
#include "vstlm/training/finetune.hpp"
#include "vstlm/vst/vst.hpp"

namespace vstlm::train {

/// How visual content reaches the language model.
enum class Variant {
  kFull,      // discrete semantic tokens, adapters trained
  kDirect,    // continuous VST embeddings at the semantic positions, adapters trained
  kZeroShot,  // discrete semantic tokens, frozen base, no adapter steps
};
std::string variant_name(Variant v);

/// Every setting of a full run. The LM vocabulary size is derived.
struct PipelineConfig {
  data::SyntheticConfig data;
  data::SplitKind split = data::SplitKind::kCrossSubject;
  vst::VstConfig vst;
  TrainConfig vst_train = TrainConfig::vst_defaults();
  lm::LmConfig lm;
  data::CorpusConfig corpus;
  lm::PretrainConfig pretrain;
  lora::LoraConfig lora;
  TrainConfig lora_train = TrainConfig::lora_defaults();
  std::string instruction = lm::kDefaultInstruction;

  /// Propagates shared sizes (classes, feature width, phases, d_e) and
  /// validates every part.
  void resolve();
};

lm::Vocabulary pipeline_vocabulary(const PipelineConfig& config);

/// Base LM pretrained on the synthetic corpus.
LmBundle pretrained_base(const PipelineConfig& config, const LogSink& sink = {});

/// Prompt/answer sequences for each sample; direct variants carry the
/// continuous VST embeddings instead of relying on the token ids.
std::vector<LmExample> make_examples(const lm::Vocabulary& vocab, vst::VstModel& vst,
                                     std::span<const data::ActionSample> samples, const std::string& instruction,
                                     std::size_t context, Variant variant);

/// Copies `base`, installs the codebook as semantic embeddings, freezes the
/// base, attaches adapters and (except zero-shot) trains them.
LmBundle adapt(const LmBundle& base, vst::VstModel& vst, std::span<const data::ActionSample> train,
               const PipelineConfig& config, Variant variant, const LogSink& sink = {});

}  // namespace vstlm::train
