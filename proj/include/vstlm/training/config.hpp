// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "vstlm/training/optim.hpp"

namespace vstlm::train {

enum class Stage { kVst, kLora };

std::string stage_name(Stage stage);

struct TrainConfig {
  Stage stage = Stage::kVst;
  std::int64_t iterations = 5000;
  double lr = 2e-4;
  double lr_min = 0.0;
  std::size_t batch_size = 64;
  std::size_t micro_batch_size = 64;
  AdamWConfig adam;
  std::uint64_t seed = 7;
  std::int64_t log_every = 100;

  static TrainConfig vst_defaults();
  static TrainConfig lora_defaults();

  /// Throws ConfigError unless iterations >= 1, lr >= lr_min >= 0 and the
  /// batch divides into micro-batches.
  void validate() const;
  void to_metadata(std::map<std::string, std::string>& meta, const std::string& prefix) const;
};

/// One training-log line: `step<TAB>loss<TAB>lr<TAB>metric`.
struct LogRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double metric = 0.0;
};

std::string format_log(const LogRecord& record);
using LogSink = std::function<void(const LogRecord&)>;

}  // namespace vstlm::train
