// SPDX-License-Identifier: Apache-2.0
#include "vstlm/vst/types.hpp"

#include <string>

#include "vstlm/numerics/error.hpp"

namespace vstlm::vst {

void FeatureSequence::validate() const {
  if (features.rank() != 2 || features.rows() == 0 || features.cols() == 0) {
    throw DataError(DataError::Kind::kInvalid,
                    "feature sequence '" + video_id + "' must be a non-empty matrix, got " +
                        nn::shape_string(features.shape()));
  }
  if (!features.all_finite()) {
    throw DataError(DataError::Kind::kInvalid, "feature sequence '" + video_id + "' has non-finite entries");
  }
}

void VstConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("vst config: " + what); };
  if (feature_dim == 0 || embed_dim == 0) fail("feature_dim and embed_dim must be positive");
  if (heads == 0 || feature_dim % heads != 0) fail("feature_dim must be divisible by heads");
  if (tokens_per_video < 1) fail("tokens_per_video must be >= 1");
  if (codebook_size < 2) fail("codebook_size must be >= 2");
  if (classes < 2) fail("classes must be >= 2");
  if (max_positions < 1) fail("max_positions must be >= 1");
  if (!(commitment >= 0.0)) fail("commitment must be >= 0");
  if (!(smoothness >= 0.0)) fail("smoothness must be >= 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) fail("ema_decay must lie in (0, 1)");
  if (dead_code_steps < 1) fail("dead_code_steps must be >= 1");
}

}  // namespace vstlm::vst
