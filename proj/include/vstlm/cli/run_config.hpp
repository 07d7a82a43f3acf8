// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vstlm/training/pipeline.hpp"

namespace vstlm::cli {

/// Flat `key = value` settings over every stage of a run. Later assignments
/// win; `seed` sets every stage seed before per-stage keys apply.
class RunConfig {
 public:
  /// Reads `key = value` lines; `#` starts a comment. Unknown keys and
  /// malformed lines throw ConfigError naming the file and line.
  void load_file(const std::filesystem::path& path);
  /// `key=value`
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  /// Defaults overlaid with the assignments. Without an explicit `seed`,
  /// VSTLM_SEED (when set) provides it.
  train::PipelineConfig resolve() const;

  const std::map<std::string, std::string>& assignments() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Every accepted key, in echo order.
std::vector<std::string> config_keys();

/// Every key with its resolved value.
std::vector<std::pair<std::string, std::string>> config_entries(const train::PipelineConfig& config);

/// `key = value` lines, loadable with RunConfig::load_file.
std::string format_config(const train::PipelineConfig& config);

}  // namespace vstlm::cli
