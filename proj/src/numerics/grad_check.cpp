// SPDX-License-Identifier: Apache-2.0
#include "vstlm/numerics/grad_check.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <vector>

#include "vstlm/numerics/error.hpp"

namespace vstlm::nn {
namespace {

double evaluate(const LossBuilder& loss) {
  Tape tape(false);
  return tape.value(loss(tape)).item();
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& loss, std::span<Parameter* const> params,
                           const GradCheckOptions& options) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  const double f0 = evaluate(loss);
  if (std::bit_cast<std::uint64_t>(f0) != std::bit_cast<std::uint64_t>(evaluate(loss))) {
    throw ConfigError("grad_check: loss function is not deterministic");
  }

  GradCheckResult result;
  const double h = options.step;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    if (!p.trainable) {
      for (double g : analytic[pi].values()) result.frozen_leak = result.frozen_leak || g != 0.0;
      continue;
    }
    const std::size_t n = p.value.size();
    const std::size_t probes = options.max_per_parameter ? std::min(n, options.max_per_parameter) : n;
    for (std::size_t k = 0; k < probes; ++k) {
      const std::size_t i = probes == n ? k : (k * n) / probes;
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double plus = evaluate(loss);
      p.value[i] = saved - h;
      const double minus = evaluate(loss);
      p.value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double err = std::abs(a - numeric) / denom;
      ++result.probed;
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result.max_rel_error = std::isfinite(err) ? err : INFINITY;
        result.worst_parameter = p.name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace vstlm::nn
