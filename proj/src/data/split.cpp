// SPDX-License-Identifier: Apache-2.0
#include "vstlm/data/split.hpp"

#include <algorithm>

#include "vstlm/numerics/error.hpp"

namespace vstlm::data {
namespace {

int key_of(const ActionSample& s, SplitKind kind) {
  switch (kind) {
    case SplitKind::kCrossSubject: return s.subject;
    case SplitKind::kCrossView: return s.view;
    case SplitKind::kCrossSetup: return s.setup;
  }
  return 0;
}

}  // namespace

SplitKind parse_split_kind(const std::string& name) {
  if (name == "x-sub") return SplitKind::kCrossSubject;
  if (name == "x-view") return SplitKind::kCrossView;
  if (name == "x-set") return SplitKind::kCrossSetup;
  throw ConfigError("unknown split protocol '" + name + "' (expected x-sub, x-view or x-set)");
}

std::string split_kind_name(SplitKind kind) {
  switch (kind) {
    case SplitKind::kCrossSubject: return "x-sub";
    case SplitKind::kCrossView: return "x-view";
    case SplitKind::kCrossSetup: return "x-set";
  }
  return "?";
}

SplitProtocol SplitProtocol::standard(SplitKind kind) {
  switch (kind) {
    case SplitKind::kCrossSubject: return {kind, {1, 3, 5, 7, 9}};
    case SplitKind::kCrossView: return {kind, {0, 1}};
    case SplitKind::kCrossSetup: return {kind, {0}};
  }
  return {};
}

Split split(std::span<const ActionSample> samples, const SplitProtocol& protocol) {
  const std::string name = split_kind_name(protocol.kind);
  if (protocol.held_in.empty()) throw DataError(DataError::Kind::kInvalid, name + ": held-in set is empty");
  std::set<int> present;
  for (const auto& s : samples) present.insert(key_of(s, protocol.kind));
  const bool subset = std::includes(present.begin(), present.end(), protocol.held_in.begin(), protocol.held_in.end());
  if (!subset || protocol.held_in.size() >= present.size()) {
    throw DataError(DataError::Kind::kInvalid, name + ": held-in ids must be a strict subset of the ids present");
  }
  Split out;
  for (const auto& s : samples) {
    (protocol.held_in.count(key_of(s, protocol.kind)) ? out.train : out.test).push_back(s);
  }
  if (out.train.empty() || out.test.empty()) {
    throw DataError(DataError::Kind::kInvalid, name + ": split leaves an empty train or test side");
  }
  return out;
}

}  // namespace vstlm::data
