// SPDX-License-Identifier: Apache-2.0
// vstlm: data generation, training, evaluation and reports from the shell.
#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "vstlm/cli/commands.hpp"
#include "vstlm/cli/run_config.hpp"
#include "vstlm/numerics/error.hpp"

namespace {

constexpr const char* kReportKeys =
    "Report keys (eval): protocol, accuracy, samples, class.<c>.accuracy, class.<c>.count,\n"
    "tokens.avg_len, tokens.unique, tokens.entropy_bits, tokens.utilization,\n"
    "efficiency.total_params, efficiency.trainable_params, efficiency.trainable_fraction,\n"
    "efficiency.seconds_per_100_steps, efficiency.seconds_per_inference,\n"
    "efficiency.seconds_per_inference_merged, config.<key>.\n"
    "Exit codes: 0 success, 1 usage or config error, 2 data error, 3 training divergence.\n"
    "VSTLM_SEED sets every stage seed when no 'seed' key is given.";

vstlm::train::Variant parse_variant(const std::string& name) {
  using vstlm::train::Variant;
  for (auto v : {Variant::kFull, Variant::kDirect, Variant::kZeroShot}) {
    if (vstlm::train::variant_name(v) == name) return v;
  }
  throw vstlm::ConfigError("variant must be full, direct-projection or zero-shot, got '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video semantic tokens for action recognition with a LoRA-adapted language model"};
  app.footer(kReportKeys);
  app.require_subcommand(0, 1);

  std::string config_file;
  std::vector<std::string> overrides;
  std::string instruction;
  app.add_option("-c,--config", config_file, "key = value config file");
  app.add_option("-s,--set", overrides, "key=value override (repeatable)");
  app.add_option("--instruction", instruction,
                 "Instruction given to the model (default: \"Please identify the action in this video. What is "
                 "happening?\")");
  bool list_keys = false;
  app.add_flag("--list-keys", list_keys, "Print every config key with its default and exit");

  std::string data_dir, out, vst_ckpt, lm_ckpt, subset = "test", variant = "full";
  std::size_t max_len = 32;
  bool timing = false;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
  gen->add_option("-o,--out", out, "Output directory")->required();

  auto* tv = app.add_subcommand("train-vst", "Train the video semantic tokenizer");
  tv->add_option("-d,--data", data_dir, "Dataset directory")->required();
  tv->add_option("-o,--out", out, "VST checkpoint to write")->required();

  auto* ft = app.add_subcommand("finetune", "Pretrain the base LM and fine-tune LoRA adapters");
  ft->add_option("-d,--data", data_dir, "Dataset directory")->required();
  ft->add_option("--vst", vst_ckpt, "VST checkpoint")->required();
  ft->add_option("-o,--out", out, "LM checkpoint to write")->required();
  ft->add_option("--variant", variant, "full | direct-projection | zero-shot");

  auto* ev = app.add_subcommand("eval", "Evaluate on the test split");
  ev->add_option("-d,--data", data_dir, "Dataset directory")->required();
  ev->add_option("--vst", vst_ckpt, "VST checkpoint")->required();
  ev->add_option("--lm", lm_ckpt, "LM checkpoint")->required();
  ev->add_option("-o,--out", out, "Report file")->required();
  ev->add_flag("--timing", timing, "Add wall-clock timings (not reproducible)");

  auto* tk = app.add_subcommand("tokenize", "Export semantic tokens");
  tk->add_option("-d,--data", data_dir, "Dataset directory")->required();
  tk->add_option("--vst", vst_ckpt, "VST checkpoint")->required();
  tk->add_option("-o,--out", out, "Token file")->required();
  tk->add_option("--subset", subset, "train | test | all");

  auto* ex = app.add_subcommand("explain", "Predict classes and explanations");
  ex->add_option("-d,--data", data_dir, "Dataset directory")->required();
  ex->add_option("--vst", vst_ckpt, "VST checkpoint")->required();
  ex->add_option("--lm", lm_ckpt, "LM checkpoint")->required();
  ex->add_option("-o,--out", out, "Prediction file")->required();
  ex->add_option("--subset", subset, "train | test | all");
  ex->add_option("--max-len", max_len, "Explanation length limit");

  auto* rp = app.add_subcommand("report", "Ablation and hyperparameter tables");
  rp->add_option("-o,--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (!list_keys && app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 1;
  }

  try {
    vstlm::cli::RunConfig rc;
    if (!config_file.empty()) rc.load_file(config_file);
    for (const auto& o : overrides) rc.set(o);
    if (app.count("--instruction")) rc.set("instruction", instruction);
    const vstlm::cli::Env env{rc.resolve(), std::cerr};
    namespace cli = vstlm::cli;
    if (list_keys) {
      std::cout << cli::format_config(env.config);
    } else if (*gen) {
      cli::gen_data(env, out);
    } else if (*tv) {
      cli::train_vst(env, data_dir, out);
    } else if (*ft) {
      cli::finetune(env, data_dir, vst_ckpt, out, parse_variant(variant));
    } else if (*ev) {
      cli::evaluate(env, data_dir, vst_ckpt, lm_ckpt, out, timing);
    } else if (*tk) {
      cli::tokenize(env, data_dir, vst_ckpt, out, cli::parse_subset(subset));
    } else if (*ex) {
      cli::explain(env, data_dir, vst_ckpt, lm_ckpt, out, cli::parse_subset(subset), max_len);
    } else if (*rp) {
      cli::report(env, out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return vstlm::cli::exit_code(e);
  }
  return 0;
}
