// SPDX-License-Identifier: Apache-2.0
#include "vstlm/eval/experiments.hpp"

#include <cstdio>
#include <map>

#include "vstlm/numerics/tensor.hpp"
#include "vstlm/training/train_vst.hpp"

namespace vstlm::eval {

Stages prepare(const train::PipelineConfig& config, const train::LogSink& vst_sink,
               const train::LogSink& pretrain_sink) {
  const auto samples = data::generate_synthetic(config.data);
  Stages s{data::split(samples, data::SplitProtocol::standard(config.split)), {}, {}};
  s.vst = train::train_vst(s.split.train, config.vst, config.vst_train, vst_sink);
  s.base = train::pretrained_base(config, pretrain_sink);
  return s;
}

std::vector<AblationRow> ablation_suite(Stages& stages, const train::PipelineConfig& config) {
  std::vector<AblationRow> rows;
  const std::string protocol = data::split_kind_name(config.split);
  for (auto v : {train::Variant::kFull, train::Variant::kDirect, train::Variant::kZeroShot}) {
    auto lm = train::adapt(stages.base, stages.vst, stages.split.train, config, v);
    rows.push_back({v, accuracy(lm, stages.vst, stages.split.test, protocol, config.instruction, v).accuracy});
  }
  return rows;
}

std::vector<AblationRow> ablation_suite(const train::PipelineConfig& config) {
  Stages stages = prepare(config);
  return ablation_suite(stages, config);
}

std::vector<SweepCell> hyperparam_sweep(const train::PipelineConfig& config, const std::vector<std::size_t>& ranks,
                                        const std::vector<std::size_t>& codebook_sizes) {
  const std::size_t base_rank = config.lora.rank;
  const std::size_t base_v = config.vst.codebook_size;
  std::map<std::size_t, Stages> by_v;
  auto stages_for = [&](std::size_t v) -> Stages& {
    auto it = by_v.find(v);
    if (it != by_v.end()) return it->second;
    train::PipelineConfig c = config;
    c.vst.codebook_size = v;
    c.resolve();
    return by_v.emplace(v, prepare(c)).first->second;
  };
  auto run = [&](const std::string& group, std::size_t rank, std::size_t v) {
    train::PipelineConfig c = config;
    c.lora.rank = rank;
    c.vst.codebook_size = v;
    c.resolve();
    Stages& st = stages_for(v);
    auto lm = train::adapt(st.base, st.vst, st.split.train, c, train::Variant::kFull);
    SweepCell cell;
    cell.group = group;
    cell.rank = rank;
    cell.codebook_size = v;
    cell.baseline = rank == base_rank && v == base_v;
    cell.adapter_scalars = 0;
    for (auto* p : train::adapter_parameters(lm.model)) cell.adapter_scalars += p->value.size();
    cell.accuracy = accuracy(lm, st.vst, st.split.test, data::split_kind_name(c.split), c.instruction).accuracy;
    return cell;
  };
  std::vector<SweepCell> cells;
  cells.push_back(run("baseline", base_rank, base_v));
  for (std::size_t r : ranks) {
    if (r != base_rank) cells.push_back(run("rank", r, base_v));
  }
  for (std::size_t v : codebook_sizes) {
    if (v != base_v) cells.push_back(run("tokens", base_rank, v));
  }
  return cells;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::string out = "variant\taccuracy\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "\t%.6f\n", r.accuracy);
    out += train::variant_name(r.variant) + buf;
  }
  return out;
}

std::string format_sweep(const std::vector<SweepCell>& cells) {
  std::string out = "group\trank\tcodebook_size\tadapter_scalars\taccuracy\tbaseline\n";
  char buf[160];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%s\t%zu\t%zu\t%zu\t%.6f\t%d\n", c.group.c_str(), c.rank, c.codebook_size,
                  c.adapter_scalars, c.accuracy, c.baseline ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace vstlm::eval
