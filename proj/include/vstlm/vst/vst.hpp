// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vstlm/numerics/layers.hpp"
#include "vstlm/vst/codebook.hpp"
#include "vstlm/vst/types.hpp"

namespace vstlm::vst {

/// [K x M] averaging matrix: contiguous near-equal bins, longer bins first.
/// When M < K rows are first repeated by nearest-index upsampling
/// (row k takes source floor(k M / K)).
nn::Tensor pooling_matrix(std::size_t rows, std::size_t bins);
nn::Tensor pool_to_k(const nn::Tensor& x, std::size_t bins);
nn::Var pool_to_k(nn::Tape& t, nn::Var x, std::size_t bins);
/// Pools each consecutive segment of `lengths` rows to `bins` rows
/// independently; the output stacks the segments, [segments*bins x d].
nn::Var pool_segments(nn::Tape& t, nn::Var x, std::span<const std::size_t> lengths, std::size_t bins);

struct VstLossTerms {
  nn::Var total;
  double classification = 0.0;
  double commitment = 0.0;
  double smoothness = 0.0;
};

/// Per video: classification + beta * |Z - sg(Z_q)|^2 / (K d_e)
/// + lambda * (token switches) / (K - 1), averaged over the batch. `z` stacks
/// K rows per video and `probe_logits` holds one row per label. The switch
/// term is a reported constant (ids carry no gradient). With quantization
/// disabled only the classification term remains.
VstLossTerms vst_loss(nn::Tape& t, nn::Var z, const Quantized& q, nn::Var probe_logits, std::span<const int> labels,
                      const VstConfig& config);

/// Outputs of one differentiable pass over B videos.
struct VstForward {
  nn::Var z;        // [B*K x d_e] projected features
  Quantized quantized;
  nn::Var logits;   // [B x C] probe logits
  VstLossTerms loss;
};

/// Video-to-semantic-tokens encoder: temporal self-attention over the
/// feature sequence, pooling to K rows, projection to d_e, quantization.
class VstModel {
 public:
  VstModel() = default;
  VstModel(const VstConfig& config, std::uint64_t seed);

  const VstConfig& config() const noexcept { return config_; }

  /// F + positions, then the attention blocks. Rejects sequences longer
  /// than the positional table. The batched form stacks the videos' rows;
  /// each video attends only to itself.
  nn::Var temporal_self_attention(nn::Tape& t, const FeatureSequence& f, const nn::ForwardContext& ctx);
  nn::Var temporal_self_attention(nn::Tape& t, std::span<const FeatureSequence* const> batch,
                                  const nn::ForwardContext& ctx);
  nn::Var project(nn::Tape& t, nn::Var pooled, const nn::ForwardContext& ctx);

  /// Continuous token embeddings Z = project(pool(attend(F))), [K x d_e].
  nn::Tensor embed(const FeatureSequence& f);
  /// Stacked embeddings of a batch, [B*K x d_e].
  nn::Tensor embed(std::span<const FeatureSequence* const> batch);
  /// Full encode: embed then quantize.
  SemanticTokenSeq encode_video(const FeatureSequence& f);
  std::vector<SemanticTokenSeq> encode_videos(std::span<const FeatureSequence* const> batch);

  /// Training pass with straight-through quantization and the probe head.
  VstForward forward(nn::Tape& t, const FeatureSequence& f, int label, const nn::ForwardContext& ctx);
  VstForward forward(nn::Tape& t, std::span<const FeatureSequence* const> batch, std::span<const int> labels,
                     const nn::ForwardContext& ctx);

  std::vector<nn::Parameter*> parameters();

  nn::Parameter positions;  // [max_positions x d_v]
  std::vector<nn::TransformerBlock> blocks;
  nn::Linear projection;    // d_v -> d_e
  nn::Linear probe;         // d_e -> classes
  Codebook codebook;

 private:
  VstConfig config_;
};

}  // namespace vstlm::vst
