// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <exception>
#include <filesystem>
#include <ostream>
#include <string>

#include "vstlm/eval/metrics.hpp"
#include "vstlm/training/pipeline.hpp"

namespace vstlm::cli {

namespace fs = std::filesystem;

/// Which part of the split a command reads.
enum class Subset { kTrain, kTest, kAll };
Subset parse_subset(const std::string& name);

/// Log lines go to `log`; artifacts are fully determined by config and inputs.
struct Env {
  train::PipelineConfig config;
  std::ostream& log;
};

/// Synthetic dataset: <out>/manifest.tsv and <out>/features/*.vstf.
void gen_data(const Env& env, const fs::path& out_dir);

/// VST checkpoint trained on the training split of <data>.
void train_vst(const Env& env, const fs::path& data_dir, const fs::path& out);

/// Pretrains the base, adapts it on the training split and writes the LM
/// checkpoint (base, adapters, vocabulary, variant).
void finetune(const Env& env, const fs::path& data_dir, const fs::path& vst_ckpt, const fs::path& out,
              train::Variant variant);

/// Test-split EvalReport written to `out`. Timings are added only with
/// `timing`, since they differ from run to run.
eval::EvalReport evaluate(const Env& env, const fs::path& data_dir, const fs::path& vst_ckpt,
                          const fs::path& lm_ckpt, const fs::path& out, bool timing);

/// One `video_id<TAB>ids` line per video.
void tokenize(const Env& env, const fs::path& data_dir, const fs::path& vst_ckpt, const fs::path& out, Subset subset);

/// One `video_id<TAB>class_id<TAB>explanation` line per video.
void explain(const Env& env, const fs::path& data_dir, const fs::path& vst_ckpt, const fs::path& lm_ckpt,
             const fs::path& out, Subset subset, std::size_t max_len);

/// Ablation and sweep tables under <out_dir>.
void report(const Env& env, const fs::path& out_dir);

/// 1 usage or config, 2 data, 3 divergence.
int exit_code(const std::exception& e);

}  // namespace vstlm::cli
