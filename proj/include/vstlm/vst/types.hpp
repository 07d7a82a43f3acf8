// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vstlm/numerics/tensor.hpp"

namespace vstlm::vst {

/// M segment descriptors of width d_v for one video.
struct FeatureSequence {
  nn::Tensor features;  // [M x d_v]
  std::string video_id;

  std::size_t length() const { return features.rank() == 2 ? features.rows() : 0; }
  std::size_t width() const { return features.rank() == 2 ? features.cols() : 0; }
  /// Throws DataError unless M >= 1 and every entry is finite.
  void validate() const;
};

/// Discrete semantic action tokens for one video.
struct SemanticTokenSeq {
  std::vector<int> ids;
  std::string video_id;

  bool operator==(const SemanticTokenSeq&) const = default;
};

struct VstConfig {
  std::size_t feature_dim = 32;       // d_v, also the attention width
  std::size_t embed_dim = 128;        // d_e, must match the language model
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t max_positions = 64;
  std::size_t tokens_per_video = 16;  // K_seq
  std::size_t codebook_size = 512;    // V
  std::size_t classes = 10;           // probe head width
  double commitment = 0.25;           // beta
  double smoothness = 0.1;            // lambda
  double ema_decay = 0.99;            // gamma
  std::int64_t dead_code_steps = 2000;
  bool quantize = true;               // false: continuous features, no codebook (ablation)

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

}  // namespace vstlm::vst
