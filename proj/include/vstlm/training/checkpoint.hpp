// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/tensor.hpp"
#include "vstlm/training/optim.hpp"

namespace vstlm::train {

/// Binary layout:
///   "VSTLM1"
///   u64 LE byte length, then that many bytes of `key=value\n` metadata lines
///   repeated until EOF: u32 name length, name bytes, u32 rank, rank x u32
///   extents, float64 LE values
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, nn::Tensor>> tensors;

  void put(std::string name, nn::Tensor value);
  const nn::Tensor* find(const std::string& name) const;
  /// Throws DataError(kInvalid) when absent.
  const nn::Tensor& require(const std::string& name) const;
  const std::string& meta(const std::string& key) const;
};

/// Written to a sibling temporary file and renamed into place, so a crash
/// never leaves a half-written checkpoint behind.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void store_parameters(Checkpoint& ckpt, std::span<nn::Parameter* const> params);
/// Copies stored values into the parameters by name; shapes must match.
void restore_parameters(const Checkpoint& ckpt, std::span<nn::Parameter* const> params);

/// Moments as "adam.m/<name>" and "adam.v/<name>", step count in metadata.
void store_optimizer(Checkpoint& ckpt, const AdamW& opt);
void restore_optimizer(const Checkpoint& ckpt, AdamW& opt);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

/// Parses a numeric metadata value; throws DataError when absent or malformed.
template <class T>
T parse_meta(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError(DataError::Kind::kInvalid, "checkpoint metadata lacks '" + key + "'");
  T v{};
  const auto& s = it->second;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw DataError(DataError::Kind::kParse, "checkpoint metadata '" + key + "' has bad value '" + s + "'");
  }
  return v;
}

}  // namespace vstlm::train
