// SPDX-License-Identifier: Apache-2.0
#include "vstlm/eval/efficiency.hpp"

#include <algorithm>
#include <chrono>
#include <tuple>
#include <utility>
#include <vector>

#include "vstlm/lora/lora.hpp"
#include "vstlm/numerics/error.hpp"

namespace vstlm::eval {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Per-video inference seconds for two models. Probes alternate between them
// after one warm-up call each, so drift in machine load hits both alike.
std::pair<double, double> paired_inference_seconds(train::LmBundle& a, train::LmBundle& b, vst::VstModel& vst,
                                                   std::span<const data::ActionSample> probe,
                                                   const std::string& instruction, std::size_t probes) {
  probes = std::max<std::size_t>(probes, 5);
  auto once = [&](train::LmBundle& lm) {
    const auto start = std::chrono::steady_clock::now();
    (void)predict(lm, vst, probe, instruction);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  (void)once(a);
  (void)once(b);
  std::vector<double> ta, tb;
  for (std::size_t i = 0; i < probes; ++i) {
    ta.push_back(once(a));
    tb.push_back(once(b));
  }
  const auto n = static_cast<double>(probe.size());
  return {median_of(std::move(ta)) / n, median_of(std::move(tb)) / n};
}

}  // namespace

double median_seconds(const std::function<void()>& probe, std::size_t probes) {
  probes = std::max<std::size_t>(probes, 5);
  std::vector<double> times;
  times.reserve(probes);
  for (std::size_t i = 0; i < probes; ++i) {
    const auto start = std::chrono::steady_clock::now();
    probe();
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return median_of(std::move(times));
}

EfficiencyReport efficiency_report(const train::LmBundle& lm, vst::VstModel& vst,
                                   std::span<const data::ActionSample> train, std::span<const data::ActionSample> probe,
                                   const train::TrainConfig& config, const std::string& instruction,
                                   std::size_t probes) {
  if (probe.empty()) throw DataError(DataError::Kind::kInvalid, "efficiency_report: no probe samples");
  EfficiencyReport r;
  train::LmBundle work = lm;
  const auto params = work.model.parameters();
  r.total_params = nn::count_scalars(params, false);
  r.trainable_params = nn::count_scalars(params, true);
  r.trainable_fraction = lora::trainable_fraction(params);

  if (!train.empty() && !train::adapter_parameters(work.model).empty()) {
    const auto examples = train::make_examples(work.vocab, vst, train, instruction, work.model.config().context,
                                               train::Variant::kFull);
    train::TrainConfig tc = config;
    tc.iterations = static_cast<std::int64_t>(std::max<std::size_t>(probes, 5)) + 1;
    train::LoraTrainer trainer(work.model, examples, tc);
    r.seconds_per_100_steps = 100.0 * median_seconds([&] { (void)trainer.step(); }, probes);
    work = lm;  // drop the probe updates
  }

  train::LmBundle merged = work;
  const auto linears = merged.model.linears();
  lora::merge_adapters(linears);
  merged.lora.reset();
  std::tie(r.seconds_per_inference, r.seconds_per_inference_merged) =
      paired_inference_seconds(work, merged, vst, probe, instruction, probes);
  return r;
}

}  // namespace vstlm::eval
