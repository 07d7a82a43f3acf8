// SPDX-License-Identifier: Apache-2.0
#include "vstlm/training/train_vst.hpp"

#include <cmath>
#include <random>
#include <set>

#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/ops.hpp"
#include "vstlm/numerics/rng.hpp"

namespace vstlm::train {
namespace {

constexpr std::uint64_t kSeedDraw = 0x5eed;

nn::Tensor as_tensor(const auto& values) {
  nn::Tensor t({values.size()});
  for (std::size_t i = 0; i < values.size(); ++i) t[i] = static_cast<double>(values[i]);
  return t;
}

}  // namespace

void vst_config_to_metadata(const vst::VstConfig& c, std::map<std::string, std::string>& meta) {
  meta["vst.feature_dim"] = std::to_string(c.feature_dim);
  meta["vst.embed_dim"] = std::to_string(c.embed_dim);
  meta["vst.layers"] = std::to_string(c.layers);
  meta["vst.heads"] = std::to_string(c.heads);
  meta["vst.ffn_mult"] = std::to_string(c.ffn_mult);
  meta["vst.max_positions"] = std::to_string(c.max_positions);
  meta["vst.tokens_per_video"] = std::to_string(c.tokens_per_video);
  meta["vst.codebook_size"] = std::to_string(c.codebook_size);
  meta["vst.classes"] = std::to_string(c.classes);
  meta["vst.commitment"] = format_double(c.commitment);
  meta["vst.smoothness"] = format_double(c.smoothness);
  meta["vst.ema_decay"] = format_double(c.ema_decay);
  meta["vst.dead_code_steps"] = std::to_string(c.dead_code_steps);
  meta["vst.quantize"] = c.quantize ? "1" : "0";
}

vst::VstConfig vst_config_from_metadata(const std::map<std::string, std::string>& meta) {
  vst::VstConfig c;
  c.feature_dim = parse_meta<std::size_t>(meta, "vst.feature_dim");
  c.embed_dim = parse_meta<std::size_t>(meta, "vst.embed_dim");
  c.layers = parse_meta<std::size_t>(meta, "vst.layers");
  c.heads = parse_meta<std::size_t>(meta, "vst.heads");
  c.ffn_mult = parse_meta<std::size_t>(meta, "vst.ffn_mult");
  c.max_positions = parse_meta<std::size_t>(meta, "vst.max_positions");
  c.tokens_per_video = parse_meta<std::size_t>(meta, "vst.tokens_per_video");
  c.codebook_size = parse_meta<std::size_t>(meta, "vst.codebook_size");
  c.classes = parse_meta<std::size_t>(meta, "vst.classes");
  c.commitment = parse_meta<double>(meta, "vst.commitment");
  c.smoothness = parse_meta<double>(meta, "vst.smoothness");
  c.ema_decay = parse_meta<double>(meta, "vst.ema_decay");
  c.dead_code_steps = parse_meta<std::int64_t>(meta, "vst.dead_code_steps");
  c.quantize = parse_meta<int>(meta, "vst.quantize") != 0;
  c.validate();
  return c;
}

Checkpoint vst_checkpoint(vst::VstModel& model) {
  Checkpoint ckpt;
  vst_config_to_metadata(model.config(), ckpt.metadata);
  store_parameters(ckpt, model.parameters());
  const auto& cb = model.codebook;
  ckpt.put("vst.codebook.ema_count", as_tensor(cb.ema_count));
  ckpt.put("vst.codebook.ema_sum", cb.ema_sum);
  ckpt.put("vst.codebook.last_used", as_tensor(cb.last_used));
  ckpt.put("vst.codebook.usage", as_tensor(cb.usage));
  return ckpt;
}

vst::VstModel load_vst(const Checkpoint& ckpt) {
  vst::VstModel model(vst_config_from_metadata(ckpt.metadata), 0);
  restore_parameters(ckpt, model.parameters());
  auto& cb = model.codebook;
  const std::size_t v = cb.size();
  auto vec = [&](const char* name) -> const nn::Tensor& {
    const nn::Tensor& t = ckpt.require(name);
    if (t.size() != v) throw DataError(DataError::Kind::kInvalid, std::string(name) + " has the wrong length");
    return t;
  };
  const auto& count = vec("vst.codebook.ema_count");
  const auto& last = vec("vst.codebook.last_used");
  const auto& usage = vec("vst.codebook.usage");
  for (std::size_t i = 0; i < v; ++i) {
    cb.ema_count[i] = count[i];
    cb.last_used[i] = static_cast<std::int64_t>(last[i]);
    cb.usage[i] = static_cast<std::uint64_t>(usage[i]);
  }
  const nn::Tensor& sum = ckpt.require("vst.codebook.ema_sum");
  if (!sum.same_shape(cb.ema_sum)) throw DataError(DataError::Kind::kInvalid, "vst.codebook.ema_sum has the wrong shape");
  cb.ema_sum = sum;
  return model;
}

VstTrainer::VstTrainer(vst::VstModel& model, std::span<const data::ActionSample> samples, TrainConfig config)
    : model_(model), samples_(samples), config_(config), optimizer_(model.parameters(), config.adam) {
  config_.validate();
  if (samples_.empty()) throw DataError(DataError::Kind::kInvalid, "train_vst: empty dataset");
  for (const auto& sample : samples_) sample.features.validate();
}

double VstTrainer::step() {
  const std::int64_t s = steps_done();
  const std::size_t batch = config_.batch_size;
  std::vector<std::size_t> picks(batch);
  {
    auto rng = nn::keyed_stream(config_.seed, {nn::stream::kBatch, static_cast<std::uint64_t>(s)});
    std::uniform_int_distribution<std::size_t> pick(0, samples_.size() - 1);
    for (auto& p : picks) p = pick(rng);
  }
  const auto& cfg = model_.config();
  const std::size_t k = cfg.tokens_per_video;

  std::vector<const vst::FeatureSequence*> videos(batch);
  std::vector<int> labels(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    videos[b] = &samples_[picks[b]].features;
    labels[b] = samples_[picks[b]].label;
  }

  if (cfg.quantize && !seeded_) {
    auto rng = nn::keyed_stream(config_.seed, {nn::stream::kReseed, kSeedDraw});
    model_.codebook.seed_from(model_.embed(videos), rng);
    seeded_ = true;
  }

  nn::Tensor z_rows({batch * k, cfg.embed_dim});
  std::vector<int> ids;
  ids.reserve(batch * k);
  nn::ForwardContext ctx;
  ctx.training = true;
  const auto acc = accumulate_gradients(batch, config_.micro_batch_size, [&](std::size_t begin, std::size_t end,
                                                                             double weight) {
    nn::Tape t;
    const auto n = static_cast<std::ptrdiff_t>(end - begin);
    // Inputs are validated up front, so a data error here means the weights blew up.
    auto fw = [&] {
      try {
        return model_.forward(t, std::span(videos).subspan(begin, static_cast<std::size_t>(n)),
                              std::span(labels).subspan(begin, static_cast<std::size_t>(n)), ctx);
      } catch (const DataError& e) {
        throw DivergenceError("vst forward failed at step " + std::to_string(s) + ": " + e.what());
      }
    }();
    const nn::Tensor& z = t.value(fw.z);
    std::copy(z.values().begin(), z.values().end(), z_rows.data() + begin * k * cfg.embed_dim);
    ids.insert(ids.end(), fw.quantized.ids.begin(), fw.quantized.ids.end());
    const double mean = t.value(fw.loss.total).item();
    if (!std::isfinite(mean)) throw DivergenceError("vst loss is not finite at step " + std::to_string(s));
    t.backward(nn::scale(t, fw.loss.total, weight));
    return mean;
  });

  optimizer_.step(cosine_lr(s, config_.iterations, config_.lr, config_.lr_min));
  optimizer_.zero_grad();
  if (cfg.quantize) {
    model_.codebook.ema_update(z_rows, ids, cfg.ema_decay, s + 1);
    auto rng = nn::keyed_stream(config_.seed, {nn::stream::kReseed, static_cast<std::uint64_t>(s)});
    model_.codebook.reseed_dead(z_rows, s + 1, cfg.dead_code_steps, rng);
  }
  return acc.loss;
}

double VstTrainer::utilization() const {
  if (!model_.config().quantize) return 0.0;
  constexpr std::size_t kChunk = 64;
  std::set<int> seen;
  for (std::size_t begin = 0; begin < samples_.size(); begin += kChunk) {
    std::vector<const vst::FeatureSequence*> videos;
    for (std::size_t i = begin; i < std::min(begin + kChunk, samples_.size()); ++i) videos.push_back(&samples_[i].features);
    for (const auto& seq : model_.encode_videos(videos)) seen.insert(seq.ids.begin(), seq.ids.end());
  }
  return static_cast<double>(seen.size()) / static_cast<double>(model_.codebook.size());
}

void VstTrainer::run(const LogSink& sink) {
  while (steps_done() < config_.iterations) {
    const std::int64_t s = steps_done();
    const double lr = cosine_lr(s, config_.iterations, config_.lr, config_.lr_min);
    const double loss = step();
    const bool log = (s + 1) % config_.log_every == 0 || s + 1 == config_.iterations || s == 0;
    if (sink && log) sink({s + 1, loss, lr, utilization()});
  }
}

Checkpoint VstTrainer::checkpoint() const {
  Checkpoint ckpt = vst_checkpoint(model_);
  ckpt.metadata["stage"] = stage_name(Stage::kVst);
  ckpt.metadata["step"] = std::to_string(steps_done());
  ckpt.metadata["vst.seeded"] = seeded_ ? "1" : "0";
  config_.to_metadata(ckpt.metadata, "train.");
  store_optimizer(ckpt, optimizer_);
  return ckpt;
}

void VstTrainer::restore(const Checkpoint& ckpt) {
  if (ckpt.meta("stage") != stage_name(Stage::kVst)) {
    throw DataError(DataError::Kind::kInvalid, "checkpoint stage is '" + ckpt.meta("stage") + "', expected vst");
  }
  vst::VstModel loaded = load_vst(ckpt);
  model_.codebook = loaded.codebook;
  restore_parameters(ckpt, model_.parameters());
  restore_optimizer(ckpt, optimizer_);
  seeded_ = ckpt.meta("vst.seeded") == "1";
}

vst::VstModel train_vst(std::span<const data::ActionSample> samples, const vst::VstConfig& vst_config,
                        const TrainConfig& config, const LogSink& sink) {
  vst::VstModel model(vst_config, config.seed);
  VstTrainer trainer(model, samples, config);
  trainer.run(sink);
  return model;
}

}  // namespace vstlm::train
