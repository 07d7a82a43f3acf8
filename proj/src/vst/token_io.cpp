// SPDX-License-Identifier: Apache-2.0
#include "vstlm/vst/token_io.hpp"

#include <charconv>
#include <fstream>

#include "vstlm/numerics/error.hpp"

namespace vstlm::vst {

std::string format_tokens(const SemanticTokenSeq& seq) {
  std::string line = seq.video_id + '\t';
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (i) line += ',';
    line += std::to_string(seq.ids[i]);
  }
  return line;
}

SemanticTokenSeq parse_tokens(const std::string& line) {
  const auto tab = line.find('\t');
  if (tab == std::string::npos || tab == 0) {
    throw DataError(DataError::Kind::kParse, "token line lacks 'video_id<TAB>ids': " + line);
  }
  SemanticTokenSeq seq;
  seq.video_id = line.substr(0, tab);
  const char* p = line.data() + tab + 1;
  const char* end = line.data() + line.size();
  while (p < end) {
    int v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || v < 0) throw DataError(DataError::Kind::kParse, "bad token id in line: " + line);
    seq.ids.push_back(v);
    p = next;
    if (p < end) {
      if (*p != ',') throw DataError(DataError::Kind::kParse, "bad separator in line: " + line);
      ++p;
    }
  }
  if (seq.ids.empty()) throw DataError(DataError::Kind::kParse, "empty token list for " + seq.video_id);
  return seq;
}

void write_tokens(const std::filesystem::path& path, std::span<const SemanticTokenSeq> seqs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write " + path.string());
  for (const auto& s : seqs) out << format_tokens(s) << '\n';
  if (!out) throw DataError(DataError::Kind::kIo, "write failed: " + path.string());
}

std::vector<SemanticTokenSeq> read_tokens(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kIo, "cannot read " + path.string());
  std::vector<SemanticTokenSeq> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_tokens(line));
  }
  return out;
}

}  // namespace vstlm::vst
