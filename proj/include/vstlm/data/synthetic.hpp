// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vstlm/numerics/tensor.hpp"
#include "vstlm/vst/types.hpp"

namespace vstlm::data {

struct SyntheticConfig {
  std::size_t classes = 10;
  std::size_t subjects = 10;           // ids 1..subjects
  std::size_t views = 3;               // ids 0..views-1
  std::size_t setups = 2;              // ids 0..setups-1
  std::size_t phases = 4;              // L
  std::size_t frames_min = 40;
  std::size_t frames_max = 80;
  std::size_t feature_dim = 32;        // d_v
  double noise = 0.3;                  // per-frame Gaussian sigma
  std::size_t samples_per_class = 60;
  std::size_t segment_frames = 4;      // frames averaged into one descriptor
  double subject_scale = 0.3;          // stddev of per-subject offsets
  double view_scale = 0.2;             // strength of per-view mixing
  std::uint64_t seed = 7;

  void validate() const;
};

struct ActionSample {
  std::string video_id;
  vst::FeatureSequence features;
  int label = 0;
  int subject = 1;
  int view = 0;
  int setup = 0;
  std::string explanation;
};

/// The hidden generative structure: what an oracle may know.
struct SyntheticWorld {
  std::vector<nn::Tensor> prototypes;       // per class, [L x d_v]
  std::vector<nn::Tensor> subject_offsets;  // per subject (index id-1), [d_v]
  std::vector<nn::Tensor> view_mixing;      // per view, [d_v x d_v], applied as x M^T
};

SyntheticWorld make_world(const SyntheticConfig& config);

/// Fixed English names from a bundled list; past its end, "action<c>".
std::string class_name(std::size_t c);
std::string explanation_text(std::size_t c, std::size_t phases);

/// classes * samples_per_class samples. Sample i has class i % C; its
/// subject/view/setup cycle so each class covers every combination once per
/// subjects*views*setups samples. Each sample draws from its own keyed stream.
std::vector<ActionSample> generate_synthetic(const SyntheticConfig& config);

/// Generates only sample `index`; equals generate_synthetic(config)[index].
ActionSample generate_sample(const SyntheticConfig& config, const SyntheticWorld& world, std::size_t index);

/// Assigns every descriptor row to the nearest class-phase prototype and
/// takes a majority vote (ties to the lower class). Returns the predicted class.
int nearest_prototype_class(const SyntheticWorld& world, const vst::FeatureSequence& f);
double nearest_prototype_accuracy(const SyntheticWorld& world, std::span<const ActionSample> samples);

}  // namespace vstlm::data
