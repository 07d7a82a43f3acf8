// SPDX-License-Identifier: Apache-2.0
#include "vstlm/vst/vst.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/ops.hpp"
#include "vstlm/numerics/rng.hpp"

namespace vstlm::vst {

nn::Tensor pooling_matrix(std::size_t rows, std::size_t bins) {
  if (rows == 0 || bins == 0) throw ShapeError("pool_to_k needs at least one row and one bin");
  nn::Tensor p({bins, rows});
  if (rows < bins) {
    for (std::size_t k = 0; k < bins; ++k) p.at(k, (k * rows) / bins) = 1.0;
    return p;
  }
  const std::size_t base = rows / bins;
  const std::size_t extra = rows % bins;
  std::size_t start = 0;
  for (std::size_t k = 0; k < bins; ++k) {
    const std::size_t len = base + (k < extra ? 1 : 0);
    for (std::size_t j = start; j < start + len; ++j) p.at(k, j) = 1.0 / static_cast<double>(len);
    start += len;
  }
  return p;
}

nn::Tensor pool_to_k(const nn::Tensor& x, std::size_t bins) {
  nn::Tape t(false);
  return t.value(pool_to_k(t, t.constant(x), bins));
}

nn::Var pool_to_k(nn::Tape& t, nn::Var x, std::size_t bins) {
  const std::size_t m = t.value(x).rows();
  if (m == bins) return x;
  const std::size_t one[] = {m};
  return pool_segments(t, x, one, bins);
}

nn::Var pool_segments(nn::Tape& t, nn::Var x, std::span<const std::size_t> lengths, std::size_t bins) {
  const nn::Tensor& xv = t.value(x);
  if (xv.rank() != 2) throw ShapeError("pool_segments needs a matrix, got " + nn::shape_string(xv.shape()));
  if (bins == 0) throw ShapeError("pool_to_k needs at least one bin");
  // Each output row averages the source rows [start, start + len).
  struct Bin {
    std::size_t start, len;
  };
  std::vector<Bin> plan;
  plan.reserve(lengths.size() * bins);
  std::size_t offset = 0;
  for (std::size_t m : lengths) {
    if (m == 0) throw ShapeError("pool_to_k needs at least one row per segment");
    if (m < bins) {
      for (std::size_t k = 0; k < bins; ++k) plan.push_back({offset + (k * m) / bins, 1});
    } else {
      const std::size_t base = m / bins;
      const std::size_t extra = m % bins;
      std::size_t start = offset;
      for (std::size_t k = 0; k < bins; ++k) {
        const std::size_t len = base + (k < extra ? 1 : 0);
        plan.push_back({start, len});
        start += len;
      }
    }
    offset += m;
  }
  if (offset != xv.rows()) {
    throw ShapeError("pool_segments: lengths sum to " + std::to_string(offset) + ", input has " +
                     std::to_string(xv.rows()) + " rows");
  }
  const std::size_t d = xv.cols();
  nn::Tensor out({plan.size(), d});
  for (std::size_t r = 0; r < plan.size(); ++r) {
    auto dst = out.row(r);
    for (std::size_t i = plan[r].start; i < plan[r].start + plan[r].len; ++i) {
      auto src = xv.row(i);
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
    if (plan[r].len > 1) {
      for (auto& v : dst) v /= static_cast<double>(plan[r].len);
    }
  }
  return t.record(std::move(out), {x}, [x, plan = std::move(plan)](nn::Tape& tp, const nn::Tensor& g) {
    nn::Tensor& gx = tp.grad(x);
    const std::size_t d = gx.cols();
    for (std::size_t r = 0; r < plan.size(); ++r) {
      auto src = g.row(r);
      const double w = 1.0 / static_cast<double>(plan[r].len);
      for (std::size_t i = plan[r].start; i < plan[r].start + plan[r].len; ++i) {
        auto dst = gx.row(i);
        for (std::size_t c = 0; c < d; ++c) dst[c] += plan[r].len > 1 ? src[c] * w : src[c];
      }
    }
  });
}

VstLossTerms vst_loss(nn::Tape& t, nn::Var z, const Quantized& q, nn::Var probe_logits, std::span<const int> labels,
                      const VstConfig& config) {
  VstLossTerms terms;
  nn::Var cls = nn::cross_entropy(t, probe_logits, labels);
  terms.classification = t.value(cls).item();
  terms.total = cls;
  if (!config.quantize) return terms;

  nn::Var commit = nn::mean_squared_error(t, z, q.rows);
  terms.commitment = t.value(commit).item();
  if (config.commitment > 0.0) terms.total = nn::add(t, terms.total, nn::scale(t, commit, config.commitment));

  const std::size_t videos = labels.size();
  if (videos == 0 || q.ids.size() % videos != 0) {
    throw ShapeError("vst_loss: " + std::to_string(q.ids.size()) + " token ids for " + std::to_string(videos) +
                     " videos");
  }
  const std::size_t k = q.ids.size() / videos;
  if (k > 1) {
    double fraction = 0.0;
    for (std::size_t b = 0; b < videos; ++b) {
      std::size_t switches = 0;
      for (std::size_t j = b * k; j + 1 < (b + 1) * k; ++j) switches += q.ids[j] != q.ids[j + 1] ? 1 : 0;
      fraction += static_cast<double>(switches) / static_cast<double>(k - 1);
    }
    terms.smoothness = fraction / static_cast<double>(videos);
  }
  if (config.smoothness > 0.0 && terms.smoothness > 0.0) {
    terms.total = nn::add(t, terms.total, t.constant(nn::Tensor::scalar(config.smoothness * terms.smoothness)));
  }
  return terms;
}

VstModel::VstModel(const VstConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  auto rng = nn::keyed_stream(seed, {nn::stream::kInit, 0x565354});
  const std::size_t d = config_.feature_dim;
  const double attn_std = 1.0 / std::sqrt(static_cast<double>(d));
  positions = nn::Parameter("vst.positions", nn::gaussian({config_.max_positions, d}, 0.02, rng));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    blocks.emplace_back("vst.blocks." + std::to_string(l), d, config_.heads, d * config_.ffn_mult, false, attn_std,
                        rng);
  }
  projection = nn::Linear("vst.projection", d, config_.embed_dim, attn_std, rng);
  probe = nn::Linear("vst.probe", config_.embed_dim, config_.classes,
                     1.0 / std::sqrt(static_cast<double>(config_.embed_dim)), rng);
  codebook = Codebook(config_.codebook_size, config_.embed_dim, rng);
}

nn::Var VstModel::temporal_self_attention(nn::Tape& t, const FeatureSequence& f, const nn::ForwardContext& ctx) {
  const FeatureSequence* one[] = {&f};
  return temporal_self_attention(t, one, ctx);
}

nn::Var VstModel::temporal_self_attention(nn::Tape& t, std::span<const FeatureSequence* const> batch,
                                          const nn::ForwardContext& ctx) {
  if (batch.empty()) throw ShapeError("temporal_self_attention: empty batch");
  std::vector<std::size_t> lengths;
  std::size_t rows = 0;
  for (const auto* f : batch) {
    f->validate();
    if (f->width() != config_.feature_dim) {
      throw ShapeError("feature width " + std::to_string(f->width()) + " does not match vst feature_dim " +
                       std::to_string(config_.feature_dim));
    }
    if (f->length() > config_.max_positions) {
      throw ConfigError("sequence '" + f->video_id + "' has " + std::to_string(f->length()) +
                        " rows; the positional table holds " + std::to_string(config_.max_positions));
    }
    lengths.push_back(f->length());
    rows += f->length();
  }
  const std::size_t d = config_.feature_dim;
  nn::Tensor stacked({rows, d});
  std::vector<int> idx;
  idx.reserve(rows);
  std::size_t at = 0;
  for (const auto* f : batch) {
    std::copy(f->features.values().begin(), f->features.values().end(), stacked.data() + at * d);
    for (std::size_t i = 0; i < f->length(); ++i) idx.push_back(static_cast<int>(i));
    at += f->length();
  }
  nn::Var x = nn::add(t, t.constant(std::move(stacked)), nn::gather_rows(t, t.parameter(positions), idx));
  const std::span<const std::size_t> segments =
      batch.size() == 1 ? std::span<const std::size_t>{} : std::span<const std::size_t>(lengths);
  for (auto& b : blocks) x = b.forward(t, x, ctx, segments);
  return x;
}

nn::Var VstModel::project(nn::Tape& t, nn::Var pooled, const nn::ForwardContext& ctx) {
  return projection.forward(t, pooled, ctx);
}

namespace {

std::vector<std::size_t> lengths_of(std::span<const FeatureSequence* const> batch) {
  std::vector<std::size_t> out;
  out.reserve(batch.size());
  for (const auto* f : batch) out.push_back(f->length());
  return out;
}

}  // namespace

nn::Tensor VstModel::embed(const FeatureSequence& f) {
  const FeatureSequence* one[] = {&f};
  return embed(one);
}

nn::Tensor VstModel::embed(std::span<const FeatureSequence* const> batch) {
  nn::Tape t(false);
  nn::ForwardContext ctx;
  nn::Var attended = temporal_self_attention(t, batch, ctx);
  nn::Var pooled = pool_segments(t, attended, lengths_of(batch), config_.tokens_per_video);
  return t.value(project(t, pooled, ctx));
}

SemanticTokenSeq VstModel::encode_video(const FeatureSequence& f) {
  return SemanticTokenSeq{quantize(embed(f), codebook.embeddings.value).ids, f.video_id};
}

std::vector<SemanticTokenSeq> VstModel::encode_videos(std::span<const FeatureSequence* const> batch) {
  const auto ids = quantize(embed(batch), codebook.embeddings.value).ids;
  const std::size_t k = config_.tokens_per_video;
  std::vector<SemanticTokenSeq> out;
  out.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out.push_back({std::vector<int>(ids.begin() + static_cast<std::ptrdiff_t>(b * k),
                                    ids.begin() + static_cast<std::ptrdiff_t>((b + 1) * k)),
                   batch[b]->video_id});
  }
  return out;
}

VstForward VstModel::forward(nn::Tape& t, const FeatureSequence& f, int label, const nn::ForwardContext& ctx) {
  const FeatureSequence* one[] = {&f};
  const int labels[] = {label};
  return forward(t, one, labels, ctx);
}

VstForward VstModel::forward(nn::Tape& t, std::span<const FeatureSequence* const> batch, std::span<const int> labels,
                             const nn::ForwardContext& ctx) {
  if (labels.size() != batch.size()) throw ShapeError("vst forward: one label per video required");
  const std::size_t k = config_.tokens_per_video;
  VstForward out;
  nn::Var attended = temporal_self_attention(t, batch, ctx);
  out.z = project(t, pool_segments(t, attended, lengths_of(batch), k), ctx);
  nn::Var tokens = out.z;
  if (config_.quantize) {
    out.quantized = quantize(t.value(out.z), codebook.embeddings.value);
    tokens = nn::straight_through(t, out.z, out.quantized.rows);
  }
  const std::vector<std::size_t> per_video(batch.size(), k);
  out.logits = probe.forward(t, pool_segments(t, tokens, per_video, 1), ctx);
  out.loss = vst_loss(t, out.z, out.quantized, out.logits, labels, config_);
  return out;
}

std::vector<nn::Parameter*> VstModel::parameters() {
  std::vector<nn::Parameter*> out{&positions};
  for (auto& b : blocks) b.collect(out);
  projection.collect(out);
  probe.collect(out);
  out.push_back(&codebook.embeddings);
  return out;
}

}  // namespace vstlm::vst
