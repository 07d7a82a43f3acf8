// SPDX-License-Identifier: Apache-2.0
#include "vstlm/cli/commands.hpp"

#include <fstream>

#include "vstlm/cli/run_config.hpp"
#include "vstlm/data/io.hpp"
#include "vstlm/data/split.hpp"
#include "vstlm/eval/efficiency.hpp"
#include "vstlm/eval/experiments.hpp"
#include "vstlm/lm/prompt.hpp"
#include "vstlm/numerics/error.hpp"
#include "vstlm/training/train_vst.hpp"
#include "vstlm/vst/token_io.hpp"

namespace vstlm::cli {
namespace {

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw DataError(DataError::Kind::kIo, "missing " + what + ": " + path.string());
}

train::LogSink sink_for(std::ostream& log, const std::string& stage) {
  return [&log, stage](const train::LogRecord& r) { log << stage << '\t' << train::format_log(r) << '\n' << std::flush; };
}

void echo_config(const Env& env, const std::string& command) {
  env.log << "# command " << command << '\n';
  for (const auto& [k, v] : config_entries(env.config)) env.log << "# config " << k << " = " << v << '\n';
}

std::vector<data::ActionSample> load(const fs::path& data_dir) {
  const auto manifest = data_dir / "manifest.tsv";
  require_file(manifest, "dataset manifest");
  return data::load_dataset(manifest);
}

std::vector<data::ActionSample> pick(const Env& env, const fs::path& data_dir, Subset subset) {
  auto samples = load(data_dir);
  if (subset == Subset::kAll) return samples;
  auto sp = data::split(samples, data::SplitProtocol::standard(env.config.split));
  return subset == Subset::kTrain ? std::move(sp.train) : std::move(sp.test);
}

vst::VstModel load_vst_model(const fs::path& path) {
  require_file(path, "VST checkpoint");
  return train::load_vst(train::load_checkpoint(path));
}

train::LmBundle load_lm_model(const fs::path& path, train::Variant& variant) {
  require_file(path, "language-model checkpoint");
  const auto ckpt = train::load_checkpoint(path);
  const std::string& name = ckpt.meta("pipeline.variant");
  variant = name == train::variant_name(train::Variant::kDirect)     ? train::Variant::kDirect
            : name == train::variant_name(train::Variant::kZeroShot) ? train::Variant::kZeroShot
                                                                      : train::Variant::kFull;
  return train::load_lm(ckpt);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write " + path.string());
  return out;
}

}  // namespace

Subset parse_subset(const std::string& name) {
  if (name == "train") return Subset::kTrain;
  if (name == "test") return Subset::kTest;
  if (name == "all") return Subset::kAll;
  throw ConfigError("subset must be train, test or all, got '" + name + "'");
}

void gen_data(const Env& env, const fs::path& out_dir) {
  echo_config(env, "gen-data");
  const auto samples = data::generate_synthetic(env.config.data);
  const auto manifest = data::save_dataset(out_dir, samples);
  env.log << "# wrote " << samples.size() << " samples to " << manifest.string() << '\n';
}

void train_vst(const Env& env, const fs::path& data_dir, const fs::path& out) {
  echo_config(env, "train-vst");
  const auto train_set = pick(env, data_dir, Subset::kTrain);
  vst::VstModel model(env.config.vst, env.config.vst_train.seed);
  train::VstTrainer trainer(model, train_set, env.config.vst_train);
  try {
    trainer.run(sink_for(env.log, "vst"));
  } catch (const DivergenceError&) {
    const fs::path partial = fs::path(out).concat(".diverged");
    train::save_checkpoint(partial, trainer.checkpoint());
    env.log << "# last good state kept in " << partial.string() << '\n';
    throw;
  }
  train::save_checkpoint(out, trainer.checkpoint());
  env.log << "# wrote " << out.string() << '\n';
}

void finetune(const Env& env, const fs::path& data_dir, const fs::path& vst_ckpt, const fs::path& out,
              train::Variant variant) {
  echo_config(env, "finetune");
  env.log << "# variant " << train::variant_name(variant) << '\n';
  auto vst = load_vst_model(vst_ckpt);
  if (vst.config().embed_dim != env.config.lm.embed_dim) {
    throw ConfigError("VST d_e " + std::to_string(vst.config().embed_dim) + " differs from the configured " +
                      std::to_string(env.config.lm.embed_dim));
  }
  train::PipelineConfig cfg = env.config;
  cfg.vst = vst.config();
  cfg.resolve();
  const auto train_set = pick(env, data_dir, Subset::kTrain);
  const auto base = train::pretrained_base(cfg, sink_for(env.log, "pretrain"));
  auto lm = train::adapt(base, vst, train_set, cfg, variant, sink_for(env.log, "lora"));
  auto ckpt = train::lm_checkpoint(lm);
  ckpt.metadata["stage"] = train::stage_name(train::Stage::kLora);
  ckpt.metadata["pipeline.variant"] = train::variant_name(variant);
  ckpt.metadata["pipeline.instruction"] = cfg.instruction;
  cfg.lora_train.to_metadata(ckpt.metadata, "train.");
  train::save_checkpoint(out, ckpt);
  env.log << "# wrote " << out.string() << '\n';
}

eval::EvalReport evaluate(const Env& env, const fs::path& data_dir, const fs::path& vst_ckpt,
                          const fs::path& lm_ckpt, const fs::path& out, bool timing) {
  echo_config(env, "eval");
  auto vst = load_vst_model(vst_ckpt);
  train::Variant variant{};
  auto lm = load_lm_model(lm_ckpt, variant);
  const auto samples = load(data_dir);
  const auto sp = data::split(samples, data::SplitProtocol::standard(env.config.split));
  const std::string protocol = data::split_kind_name(env.config.split);
  auto report = eval::accuracy(lm, vst, sp.test, protocol, env.config.instruction, variant);

  std::vector<const vst::FeatureSequence*> videos;
  for (const auto& s : sp.test) videos.push_back(&s.features);
  const auto tokens = vst.encode_videos(videos);
  report.tokens = eval::token_statistics(std::span<const vst::SemanticTokenSeq>(tokens), vst.config().codebook_size);

  eval::EfficiencyReport eff;
  const auto params = lm.model.parameters();
  eff.total_params = nn::count_scalars(params, false);
  eff.trainable_params = nn::count_scalars(params, true);
  eff.trainable_fraction = lora::trainable_fraction(params);
  if (timing) {
    const std::size_t n = std::min<std::size_t>(sp.test.size(), 20);
    eff = eval::efficiency_report(lm, vst, sp.train, std::span(sp.test).first(n), env.config.lora_train,
                                  env.config.instruction);
  }
  report.efficiency = eff;
  report.config["variant"] = train::variant_name(variant);
  report.config["vst.codebook_size"] = std::to_string(vst.config().codebook_size);
  report.config["lora.rank"] = lm.lora ? std::to_string(lm.lora->rank) : "0";
  report.config["instruction"] = env.config.instruction;

  auto file = open_out(out);
  file << eval::format_report(report);
  env.log << "# accuracy " << report.accuracy << " on " << report.samples << " test samples\n";
  return report;
}

void tokenize(const Env& env, const fs::path& data_dir, const fs::path& vst_ckpt, const fs::path& out, Subset subset) {
  echo_config(env, "tokenize");
  auto vst = load_vst_model(vst_ckpt);
  const auto samples = pick(env, data_dir, subset);
  std::vector<vst::SemanticTokenSeq> seqs;
  constexpr std::size_t kChunk = 64;
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    std::vector<const vst::FeatureSequence*> videos;
    for (std::size_t i = begin; i < std::min(begin + kChunk, samples.size()); ++i) videos.push_back(&samples[i].features);
    for (auto& s : vst.encode_videos(videos)) seqs.push_back(std::move(s));
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  vst::write_tokens(out, seqs);
  env.log << "# wrote " << seqs.size() << " token sequences to " << out.string() << '\n';
}

void explain(const Env& env, const fs::path& data_dir, const fs::path& vst_ckpt, const fs::path& lm_ckpt,
             const fs::path& out, Subset subset, std::size_t max_len) {
  echo_config(env, "explain");
  auto vst = load_vst_model(vst_ckpt);
  train::Variant variant{};
  auto lm = load_lm_model(lm_ckpt, variant);
  const auto samples = pick(env, data_dir, subset);
  const auto examples = train::make_examples(lm.vocab, vst, samples, env.config.instruction,
                                             lm.model.config().context, variant);
  auto file = open_out(out);
  std::size_t truncated = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    lm::Prompt prompt;
    prompt.ids.assign(ex.ids.begin(), ex.ids.begin() + static_cast<std::ptrdiff_t>(ex.answer_position + 1));
    prompt.semantic_offset = ex.semantic_offset;
    const nn::Tensor* rows = ex.semantic_rows.size() > 0 ? &ex.semantic_rows : nullptr;
    const int c = lm::classify(lm.model, lm.vocab, prompt, rows);
    const auto e = lm::generate_explanation(lm.model, lm.vocab, prompt, c, max_len, rows);
    truncated += e.truncated;
    file << samples[i].video_id << '\t' << c << '\t' << e.text << '\n';
  }
  env.log << "# wrote " << examples.size() << " predictions (" << truncated << " truncated) to " << out.string()
          << '\n';
}

void report(const Env& env, const fs::path& out_dir) {
  echo_config(env, "report");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError(DataError::Kind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  const auto rows = eval::ablation_suite(env.config);
  open_out(out_dir / "ablation.tsv") << eval::format_ablation(rows);
  env.log << "# wrote " << (out_dir / "ablation.tsv").string() << '\n';
  const auto cells = eval::hyperparam_sweep(env.config, {4, 8, 16, 32}, {256, 512, 1024});
  open_out(out_dir / "sweep.tsv") << eval::format_sweep(cells);
  env.log << "# wrote " << (out_dir / "sweep.tsv").string() << '\n';
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const DivergenceError*>(&e)) return 3;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return 1;
  return 2;
}

}  // namespace vstlm::cli
