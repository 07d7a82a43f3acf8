// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <fstream>

#include "vstlm/data/io.hpp"
#include "vstlm/numerics/error.hpp"

namespace vstlm::data {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

int parse_int(const std::string& field, std::size_t line_no, const char* what) {
  int v = 0;
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw DataError(DataError::Kind::kParse,
                    "manifest line " + std::to_string(line_no) + ": bad " + what + " '" + field + "'");
  }
  return v;
}

}  // namespace

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& e : entries) {
    out << e.video_id << '\t' << e.label << '\t' << e.subject << '\t' << e.view << '\t' << e.setup << '\t'
        << e.feature_path << '\t' << e.explanation << '\n';
  }
  if (!out) throw DataError(DataError::Kind::kIo, "write failed: " + path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kIo, "cannot read manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 7) {
      throw DataError(DataError::Kind::kParse, "manifest line " + std::to_string(line_no) + ": expected 7 fields, got " +
                                                   std::to_string(f.size()));
    }
    ManifestEntry e;
    e.video_id = f[0];
    e.label = parse_int(f[1], line_no, "label");
    e.subject = parse_int(f[2], line_no, "subject");
    e.view = parse_int(f[3], line_no, "view");
    e.setup = parse_int(f[4], line_no, "setup");
    e.feature_path = f[5];
    e.explanation = f[6];
    if (e.video_id.empty() || e.feature_path.empty()) {
      throw DataError(DataError::Kind::kParse, "manifest line " + std::to_string(line_no) + ": empty id or path");
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::filesystem::path save_dataset(const std::filesystem::path& dir, std::span<const ActionSample> samples) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "features", ec);
  if (ec) throw DataError(DataError::Kind::kIo, "cannot create " + (dir / "features").string() + ": " + ec.message());
  std::vector<ManifestEntry> entries;
  entries.reserve(samples.size());
  for (const auto& s : samples) {
    const std::string rel = "features/" + s.video_id + ".vstf";
    write_features(dir / rel, s.features);
    entries.push_back({s.video_id, s.label, s.subject, s.view, s.setup, rel, s.explanation});
  }
  const auto manifest = dir / "manifest.tsv";
  write_manifest(manifest, entries);
  return manifest;
}

std::vector<ActionSample> load_dataset(const std::filesystem::path& manifest) {
  const auto base = manifest.parent_path();
  std::vector<ActionSample> out;
  for (auto& e : read_manifest(manifest)) {
    ActionSample s;
    s.features = read_features(base / e.feature_path);
    s.features.video_id = e.video_id;
    s.video_id = std::move(e.video_id);
    s.label = e.label;
    s.subject = e.subject;
    s.view = e.view;
    s.setup = e.setup;
    s.explanation = std::move(e.explanation);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace vstlm::data
