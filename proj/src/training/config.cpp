// SPDX-License-Identifier: Apache-2.0
#include "vstlm/training/config.hpp"

#include <cstdio>

#include "vstlm/numerics/error.hpp"

namespace vstlm::train {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string stage_name(Stage stage) { return stage == Stage::kVst ? "vst" : "lora"; }

TrainConfig TrainConfig::vst_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::lora_defaults() {
  TrainConfig c;
  c.stage = Stage::kLora;
  c.iterations = 2000;
  c.lr = 3e-3;
  c.batch_size = 8;
  c.micro_batch_size = 4;
  return c;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (iterations < 1) fail("iterations must be >= 1");
  if (!(lr >= 0.0) || !(lr_min >= 0.0) || lr_min > lr) fail("need 0 <= lr_min <= lr");
  if (batch_size == 0 || micro_batch_size == 0 || batch_size % micro_batch_size != 0) {
    fail("batch size " + std::to_string(batch_size) + " must be a positive multiple of micro-batch size " +
         std::to_string(micro_batch_size));
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    fail("adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0) || !(adam.weight_decay >= 0.0)) fail("adam eps must be > 0 and weight decay >= 0");
  if (log_every < 1) fail("log_every must be >= 1");
}

void TrainConfig::to_metadata(std::map<std::string, std::string>& meta, const std::string& prefix) const {
  meta[prefix + "stage"] = stage_name(stage);
  meta[prefix + "iterations"] = std::to_string(iterations);
  meta[prefix + "lr"] = num(lr);
  meta[prefix + "lr_min"] = num(lr_min);
  meta[prefix + "batch_size"] = std::to_string(batch_size);
  meta[prefix + "micro_batch_size"] = std::to_string(micro_batch_size);
  meta[prefix + "beta1"] = num(adam.beta1);
  meta[prefix + "beta2"] = num(adam.beta2);
  meta[prefix + "eps"] = num(adam.eps);
  meta[prefix + "weight_decay"] = num(adam.weight_decay);
  meta[prefix + "seed"] = std::to_string(seed);
}

std::string format_log(const LogRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%lld\t%.6f\t%.6g\t%.4f", static_cast<long long>(r.step), r.loss, r.lr, r.metric);
  return buf;
}

}  // namespace vstlm::train
