// SPDX-License-Identifier: Apache-2.0
#include "vstlm/training/pipeline.hpp"

#include "vstlm/lm/prompt.hpp"
#include "vstlm/numerics/error.hpp"

namespace vstlm::train {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kDirect: return "direct-projection";
    case Variant::kZeroShot: return "zero-shot";
  }
  return "unknown";
}

void PipelineConfig::resolve() {
  data.validate();
  vst.feature_dim = data.feature_dim;
  vst.classes = data.classes;
  vst.validate();
  corpus.classes = data.classes;
  corpus.phases = data.phases;
  corpus.instruction = instruction;
  lm.embed_dim = vst.embed_dim;
  lm.vocab_size = pipeline_vocabulary(*this).size();
  lm.validate();
  pretrain.validate();
  lora.validate();
  vst_train.stage = Stage::kVst;
  vst_train.validate();
  lora_train.stage = Stage::kLora;
  lora_train.validate();
  if (instruction.empty()) throw ConfigError("instruction must not be empty");
}

lm::Vocabulary pipeline_vocabulary(const PipelineConfig& config) {
  return lm::build_vocabulary(config.vst.codebook_size, config.data.classes, config.data.phases, config.instruction);
}

LmBundle pretrained_base(const PipelineConfig& config, const LogSink& sink) {
  LmBundle out;
  out.vocab = pipeline_vocabulary(config);
  lm::LmConfig lc = config.lm;
  lc.vocab_size = out.vocab.size();
  out.model = lm::ActionLm(lc, config.pretrain.seed);
  lm::pretrain_base(out.model, out.vocab, data::generate_corpus(config.corpus), config.pretrain, sink);
  return out;
}

std::vector<LmExample> make_examples(const lm::Vocabulary& vocab, vst::VstModel& vst,
                                     std::span<const data::ActionSample> samples, const std::string& instruction,
                                     std::size_t context, Variant variant) {
  constexpr std::size_t kChunk = 64;
  std::vector<LmExample> out;
  out.reserve(samples.size());
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    const std::size_t end = std::min(begin + kChunk, samples.size());
    std::vector<const vst::FeatureSequence*> videos;
    for (std::size_t i = begin; i < end; ++i) videos.push_back(&samples[i].features);
    const auto tokens = vst.encode_videos(videos);
    nn::Tensor z;
    if (variant == Variant::kDirect) z = vst.embed(videos);
    const std::size_t k = vst.config().tokens_per_video;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s = samples[i];
      const auto seq = lm::training_sequence(vocab, tokens[i - begin], instruction, s.label, s.explanation, context);
      LmExample ex;
      ex.ids = seq.ids;
      ex.targets = seq.targets;
      ex.semantic_offset = seq.prompt.semantic_offset;
      ex.answer_position = seq.prompt.answer_position();
      ex.label = s.label;
      if (variant == Variant::kDirect) {
        ex.semantic_rows = nn::Tensor({k, z.cols()});
        const double* src = z.data() + (i - begin) * k * z.cols();
        std::copy(src, src + k * z.cols(), ex.semantic_rows.data());
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

LmBundle adapt(const LmBundle& base, vst::VstModel& vst, std::span<const data::ActionSample> train,
               const PipelineConfig& config, Variant variant, const LogSink& sink) {
  LmBundle out = base;
  out.model.install_semantic_embeddings(vst.codebook.embeddings.value, out.vocab);
  out.model.freeze_base();
  if (variant == Variant::kZeroShot) return out;
  const auto linears = out.model.linears();
  lora::attach_adapters(linears, config.lora, config.lora_train.seed);
  out.lora = config.lora;
  const auto examples =
      make_examples(out.vocab, vst, train, config.instruction, out.model.config().context, variant);
  LoraTrainer trainer(out.model, examples, config.lora_train);
  trainer.run(sink);
  return out;
}

}  // namespace vstlm::train
