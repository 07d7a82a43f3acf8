// SPDX-License-Identifier: Apache-2.0
#include "vstlm/eval/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "vstlm/lm/prompt.hpp"
#include "vstlm/numerics/error.hpp"

namespace vstlm::eval {

TokenStats token_statistics(std::span<const std::vector<int>> sequences, std::size_t codebook_size) {
  if (sequences.empty()) throw DataError(DataError::Kind::kInvalid, "token_statistics: no sequences");
  if (codebook_size == 0) throw DataError(DataError::Kind::kInvalid, "token_statistics: V must be >= 1");
  std::vector<std::size_t> counts(codebook_size, 0);
  std::size_t total = 0;
  for (const auto& seq : sequences) {
    for (int id : seq) {
      if (id < 0 || static_cast<std::size_t>(id) >= codebook_size) {
        throw DataError(DataError::Kind::kInvalid, "token id " + std::to_string(id) + " outside [0, " +
                                                       std::to_string(codebook_size) + ")");
      }
      ++counts[static_cast<std::size_t>(id)];
      ++total;
    }
  }
  TokenStats s;
  s.avg_len = static_cast<double>(total) / static_cast<double>(sequences.size());
  for (std::size_t c : counts) {
    if (c == 0) continue;
    ++s.unique_count;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s.entropy_bits -= p * std::log2(p);
  }
  // A single symbol gives -1 * log2(1) = -0.
  s.entropy_bits = std::max(s.entropy_bits, 0.0);
  s.utilization = static_cast<double>(s.unique_count) / static_cast<double>(codebook_size);
  return s;
}

TokenStats token_statistics(std::span<const vst::SemanticTokenSeq> sequences, std::size_t codebook_size) {
  std::vector<std::vector<int>> ids;
  ids.reserve(sequences.size());
  for (const auto& s : sequences) ids.push_back(s.ids);
  return token_statistics(std::span<const std::vector<int>>(ids), codebook_size);
}

EvalReport score(std::span<const int> predicted, std::span<const int> labels, std::size_t classes,
                 const std::string& protocol) {
  if (labels.empty()) throw DataError(DataError::Kind::kInvalid, "evaluation set is empty");
  if (predicted.size() != labels.size()) {
    throw DataError(DataError::Kind::kInvalid, "predictions and labels differ in length");
  }
  EvalReport r;
  r.protocol = protocol;
  r.samples = labels.size();
  r.per_class.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) r.per_class[c].label = static_cast<int>(c);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw DataError(DataError::Kind::kInvalid, "label " + std::to_string(labels[i]) + " outside the class range");
    }
    auto& pc = r.per_class[static_cast<std::size_t>(labels[i])];
    ++pc.count;
    if (predicted[i] == labels[i]) {
      ++pc.correct;
      ++correct;
    }
  }
  for (auto& pc : r.per_class) {
    pc.accuracy = pc.count ? static_cast<double>(pc.correct) / static_cast<double>(pc.count) : 0.0;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.samples);
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "protocol: " << r.protocol << "\n";
  out << "accuracy: " << fmt(r.accuracy) << "\n";
  out << "samples: " << r.samples << "\n";
  for (const auto& pc : r.per_class) {
    out << "class." << pc.label << ".accuracy: " << fmt(pc.accuracy) << "\n";
    out << "class." << pc.label << ".count: " << pc.count << "\n";
  }
  if (r.tokens) {
    out << "tokens.avg_len: " << fmt(r.tokens->avg_len) << "\n";
    out << "tokens.unique: " << r.tokens->unique_count << "\n";
    out << "tokens.entropy_bits: " << fmt(r.tokens->entropy_bits) << "\n";
    out << "tokens.utilization: " << fmt(r.tokens->utilization) << "\n";
  }
  if (r.efficiency) {
    const auto& e = *r.efficiency;
    out << "efficiency.total_params: " << e.total_params << "\n";
    out << "efficiency.trainable_params: " << e.trainable_params << "\n";
    out << "efficiency.trainable_fraction: " << fmt(e.trainable_fraction) << "\n";
    out << "efficiency.seconds_per_100_steps: " << fmt(e.seconds_per_100_steps) << "\n";
    out << "efficiency.seconds_per_inference: " << fmt(e.seconds_per_inference) << "\n";
    out << "efficiency.seconds_per_inference_merged: " << fmt(e.seconds_per_inference_merged) << "\n";
  }
  for (const auto& [k, v] : r.config) out << "config." << k << ": " << v << "\n";
  return out.str();
}

namespace {

lm::Prompt prompt_of(const train::LmExample& ex) {
  lm::Prompt p;
  p.ids.assign(ex.ids.begin(), ex.ids.begin() + static_cast<std::ptrdiff_t>(ex.answer_position + 1));
  p.semantic_offset = ex.semantic_offset;
  p.semantic_length = ex.semantic_rows.rank() == 2 ? ex.semantic_rows.rows() : 0;
  return p;
}

const nn::Tensor* rows_of(const train::LmExample& ex) {
  return ex.semantic_rows.size() > 0 ? &ex.semantic_rows : nullptr;
}

}  // namespace

std::vector<int> predict(train::LmBundle& lm, vst::VstModel& vst, std::span<const data::ActionSample> samples,
                         const std::string& instruction, train::Variant variant) {
  const auto examples =
      train::make_examples(lm.vocab, vst, samples, instruction, lm.model.config().context, variant);
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(lm::classify(lm.model, lm.vocab, prompt_of(ex), rows_of(ex)));
  return out;
}

EvalReport accuracy(train::LmBundle& lm, vst::VstModel& vst, std::span<const data::ActionSample> test,
                    const std::string& protocol, const std::string& instruction, train::Variant variant) {
  if (test.empty()) throw DataError(DataError::Kind::kInvalid, "evaluation set is empty");
  const auto predicted = predict(lm, vst, test, instruction, variant);
  std::vector<int> labels;
  for (const auto& s : test) labels.push_back(s.label);
  return score(predicted, labels, lm.vocab.classes(), protocol);
}

MatchRate explanation_match_rate(train::LmBundle& lm, vst::VstModel& vst, std::span<const data::ActionSample> samples,
                                 const std::string& instruction, std::size_t max_len, train::Variant variant) {
  if (samples.empty()) throw DataError(DataError::Kind::kInvalid, "explanation_match_rate: no samples");
  const auto examples =
      train::make_examples(lm.vocab, vst, samples, instruction, lm.model.config().context, variant);
  MatchRate m;
  m.samples = examples.size();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const auto e = lm::generate_explanation(lm.model, lm.vocab, prompt_of(ex), ex.label, max_len, rows_of(ex));
    const auto target = lm.vocab.encode_text(samples[i].explanation);
    if (!e.truncated && e.ids == target) m.exact += 1.0;
    const std::size_t longest = std::max(e.ids.size(), target.size());
    std::size_t same = 0;
    for (std::size_t k = 0; k < std::min(e.ids.size(), target.size()); ++k) same += e.ids[k] == target[k];
    m.overlap += longest ? static_cast<double>(same) / static_cast<double>(longest) : 1.0;
  }
  m.exact /= static_cast<double>(m.samples);
  m.overlap /= static_cast<double>(m.samples);
  return m;
}

}  // namespace vstlm::eval
