// SPDX-License-Identifier: Apache-2.0
#include "vstlm/data/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <random>

#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/rng.hpp"

namespace vstlm::data {
namespace {

constexpr std::array<const char*, 24> kClassNames = {
    "walking",  "running",  "jumping", "waving",   "sitting",    "standing", "clapping", "drinking",
    "reading",  "writing",  "kicking", "throwing", "pointing",   "bowing",   "stretching", "falling",
    "hopping",  "pushing",  "pulling", "squatting", "crouching", "saluting", "typing",   "dancing"};

std::vector<std::size_t> phase_durations(std::size_t frames, std::size_t phases, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  std::vector<double> w(phases);
  double total = 0.0;
  for (auto& x : w) total += (x = weight(rng));
  std::vector<std::size_t> d(phases, 1);
  std::size_t assigned = phases;
  for (std::size_t l = 0; l < phases; ++l) {
    const auto extra = static_cast<std::size_t>(std::floor(w[l] / total * static_cast<double>(frames - phases)));
    d[l] += extra;
    assigned += extra;
  }
  for (std::size_t l = 0; assigned < frames; l = (l + 1) % phases, ++assigned) ++d[l];
  return d;
}

}  // namespace

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("synthetic config: " + what); };
  if (classes < 2) fail("classes must be >= 2");
  if (phases < 1) fail("phases must be >= 1");
  if (subjects < 1 || views < 1 || setups < 1) fail("subjects, views and setups must be >= 1");
  if (frames_min < phases || frames_max < frames_min) fail("frame range must satisfy phases <= min <= max");
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (!(noise >= 0.0)) fail("noise must be >= 0");
  if (samples_per_class < 1) fail("samples_per_class must be >= 1");
  if (segment_frames < 1) fail("segment_frames must be >= 1");
  if (!(subject_scale >= 0.0) || !(view_scale >= 0.0)) fail("subject/view scales must be >= 0");
}

SyntheticWorld make_world(const SyntheticConfig& config) {
  config.validate();
  SyntheticWorld w;
  const std::size_t d = config.feature_dim;
  for (std::size_t c = 0; c < config.classes; ++c) {
    auto rng = nn::keyed_stream(config.seed, {nn::stream::kPrototype, c});
    w.prototypes.push_back(nn::gaussian({config.phases, d}, 1.0, rng));
  }
  for (std::size_t s = 0; s < config.subjects; ++s) {
    auto rng = nn::keyed_stream(config.seed, {nn::stream::kSubject, s});
    w.subject_offsets.push_back(nn::gaussian({d}, config.subject_scale, rng));
  }
  for (std::size_t v = 0; v < config.views; ++v) {
    auto rng = nn::keyed_stream(config.seed, {nn::stream::kView, v});
    nn::Tensor m = nn::gaussian({d, d}, config.view_scale / std::sqrt(static_cast<double>(d)), rng);
    for (std::size_t i = 0; i < d; ++i) m.at(i, i) += 1.0;
    w.view_mixing.push_back(std::move(m));
  }
  return w;
}

std::string class_name(std::size_t c) {
  return c < kClassNames.size() ? kClassNames[c] : "action" + std::to_string(c);
}

std::string explanation_text(std::size_t c, std::size_t phases) {
  std::string s = "subject performs " + class_name(c) + " through phases";
  for (std::size_t l = 1; l <= phases; ++l) s += " p" + std::to_string(l);
  return s;
}

ActionSample generate_sample(const SyntheticConfig& config, const SyntheticWorld& world, std::size_t index) {
  const std::size_t c = index % config.classes;
  const std::size_t rep = index / config.classes;
  const std::size_t combo = rep % (config.subjects * config.views * config.setups);
  ActionSample s;
  s.label = static_cast<int>(c);
  s.subject = static_cast<int>(combo % config.subjects) + 1;
  s.view = static_cast<int>((combo / config.subjects) % config.views);
  s.setup = static_cast<int>(combo / (config.subjects * config.views));
  char id[64];
  std::snprintf(id, sizeof id, "S%03dC%03dP%03dA%03d_%05zu", s.setup, s.view, s.subject, s.label, index);
  s.video_id = id;
  s.explanation = explanation_text(c, config.phases);

  auto rng = nn::keyed_stream(config.seed, {nn::stream::kSample, index});
  std::uniform_int_distribution<std::size_t> frame_count(config.frames_min, config.frames_max);
  const std::size_t frames = frame_count(rng);
  const auto durations = phase_durations(frames, config.phases, rng);

  const std::size_t d = config.feature_dim;
  const nn::Tensor& proto = world.prototypes[c];
  const nn::Tensor& offset = world.subject_offsets[static_cast<std::size_t>(s.subject - 1)];
  const nn::Tensor& mix = world.view_mixing[static_cast<std::size_t>(s.view)];
  std::normal_distribution<double> noise(0.0, config.noise);

  const std::size_t seg = config.segment_frames;
  const std::size_t segments = (frames + seg - 1) / seg;
  nn::Tensor features({segments, d});
  std::vector<double> base(d), frame(d);
  std::size_t t = 0;
  for (std::size_t l = 0; l < config.phases; ++l) {
    for (std::size_t j = 0; j < d; ++j) base[j] = proto.at(l, j) + offset[j];
    for (std::size_t k = 0; k < durations[l]; ++k, ++t) {
      for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += mix.at(i, j) * base[j];
        frame[i] = acc + (config.noise > 0.0 ? noise(rng) : 0.0);
      }
      auto dst = features.row(t / seg);
      for (std::size_t i = 0; i < d; ++i) dst[i] += frame[i];
    }
  }
  for (std::size_t r = 0; r < segments; ++r) {
    const std::size_t len = std::min(seg, frames - r * seg);
    for (auto& v : features.row(r)) v /= static_cast<double>(len);
  }
  s.features = vst::FeatureSequence{std::move(features), s.video_id};
  return s;
}

std::vector<ActionSample> generate_synthetic(const SyntheticConfig& config) {
  const SyntheticWorld world = make_world(config);
  std::vector<ActionSample> out;
  const std::size_t n = config.classes * config.samples_per_class;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_sample(config, world, i));
  return out;
}

int nearest_prototype_class(const SyntheticWorld& world, const vst::FeatureSequence& f) {
  std::vector<std::size_t> votes(world.prototypes.size(), 0);
  for (std::size_t r = 0; r < f.length(); ++r) {
    auto row = f.features.row(r);
    double best = INFINITY;
    std::size_t best_class = 0;
    for (std::size_t c = 0; c < world.prototypes.size(); ++c) {
      const nn::Tensor& p = world.prototypes[c];
      for (std::size_t l = 0; l < p.rows(); ++l) {
        double dist = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) dist += (row[j] - p.at(l, j)) * (row[j] - p.at(l, j));
        if (dist < best) {
          best = dist;
          best_class = c;
        }
      }
    }
    ++votes[best_class];
  }
  std::size_t winner = 0;
  for (std::size_t c = 1; c < votes.size(); ++c) {
    if (votes[c] > votes[winner]) winner = c;
  }
  return static_cast<int>(winner);
}

double nearest_prototype_accuracy(const SyntheticWorld& world, std::span<const ActionSample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : samples) hits += nearest_prototype_class(world, s.features) == s.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace vstlm::data
