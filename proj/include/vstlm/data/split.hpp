// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include "vstlm/data/synthetic.hpp"

namespace vstlm::data {

enum class SplitKind { kCrossSubject, kCrossView, kCrossSetup };

SplitKind parse_split_kind(const std::string& name);  // "x-sub" | "x-view" | "x-set"
std::string split_kind_name(SplitKind kind);

struct SplitProtocol {
  SplitKind kind = SplitKind::kCrossSubject;
  std::set<int> held_in;  // ids whose samples go to training

  /// Default held-in sets: odd subjects, views {0, 1}, setup {0}.
  static SplitProtocol standard(SplitKind kind);
};

struct Split {
  std::vector<ActionSample> train;
  std::vector<ActionSample> test;
};

/// Exhaustive, disjoint partition by the protocol's id. Throws DataError if the
/// held-in set is empty, not a strict subset of the ids present, or if
/// either side ends up empty.
Split split(std::span<const ActionSample> samples, const SplitProtocol& protocol);

}  // namespace vstlm::data
