// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vstlm/vst/types.hpp"

namespace vstlm::vst {

/// One line per video: `video_id<TAB>id1,id2,...,idK`.
std::string format_tokens(const SemanticTokenSeq& seq);
SemanticTokenSeq parse_tokens(const std::string& line);

void write_tokens(const std::filesystem::path& path, std::span<const SemanticTokenSeq> seqs);
std::vector<SemanticTokenSeq> read_tokens(const std::filesystem::path& path);

}  // namespace vstlm::vst
