// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vstlm/data/synthetic.hpp"
#include "vstlm/vst/types.hpp"

namespace vstlm::data {

// Feature file: "VSTF1", u32 LE rows M, u32 LE width d_v, then M*d_v
// float64 LE values in row-major order.
inline constexpr char kFeatureMagic[] = "VSTF1";

void write_features(const std::filesystem::path& path, const vst::FeatureSequence& f);
/// The returned video_id is the file stem. Throws DataError with kind
/// kBadMagic, kTruncated or kExtentOverflow as appropriate.
vst::FeatureSequence read_features(const std::filesystem::path& path);

/// One manifest line: tab-separated fields, feature path relative to the
/// manifest's directory.
struct ManifestEntry {
  std::string video_id;
  int label = 0;
  int subject = 1;
  int view = 0;
  int setup = 0;
  std::string feature_path;
  std::string explanation;

  bool operator==(const ManifestEntry&) const = default;
};

inline constexpr char kManifestHeader[] = "# video_id\tlabel\tsubject\tview\tsetup\tfeature_path\texplanation";

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
/// Throws DataError(kParse) naming the line number of any malformed record.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Writes features/<video_id>.vstf plus manifest.tsv under `dir`; returns the manifest path.
std::filesystem::path save_dataset(const std::filesystem::path& dir, std::span<const ActionSample> samples);
std::vector<ActionSample> load_dataset(const std::filesystem::path& manifest);

}  // namespace vstlm::data
