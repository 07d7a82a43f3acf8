// SPDX-License-Identifier: Apache-2.0
#include "vstlm/vst/codebook.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>

#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/rng.hpp"

namespace vstlm::vst {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

ConstMap view(const nn::Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

double exact_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace

Codebook::Codebook(std::size_t size, std::size_t dim, std::mt19937_64& rng)
    : embeddings("vst.codebook", nn::gaussian({size, dim}, 1.0, rng), nn::ParamRole::kCodebook, false),
      ema_count(size, 1.0),
      ema_sum(embeddings.value),
      last_used(size, 0),
      usage(size, 0) {}

void Codebook::seed_from(const nn::Tensor& samples, std::mt19937_64& rng) {
  if (samples.rank() != 2 || samples.cols() != dim() || samples.rows() == 0) {
    throw ShapeError("codebook seed rows " + nn::shape_string(samples.shape()) + " for codebook " +
                     nn::shape_string(embeddings.value.shape()));
  }
  std::vector<std::size_t> order(samples.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < size(); ++i) {
    const std::size_t src = order[i % order.size()];
    std::copy_n(samples.row(src).begin(), dim(), embeddings.value.row(i).begin());
  }
  ema_sum = embeddings.value;
  std::fill(ema_count.begin(), ema_count.end(), 1.0);
}

void Codebook::ema_update(const nn::Tensor& z, std::span<const int> ids, double decay, std::int64_t step) {
  if (z.rank() != 2 || z.cols() != dim() || z.rows() != ids.size()) {
    throw ShapeError("ema_update rows " + nn::shape_string(z.shape()) + " with " + std::to_string(ids.size()) + " ids");
  }
  std::vector<double> counts(size(), 0.0);
  nn::Tensor sums({size(), dim()});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto i = static_cast<std::size_t>(ids[r]);
    counts[i] += 1.0;
    auto dst = sums.row(i);
    auto src = z.row(r);
    for (std::size_t c = 0; c < dim(); ++c) dst[c] += src[c];
  }
  for (std::size_t i = 0; i < size(); ++i) {
    ema_count[i] = decay * ema_count[i] + (1.0 - decay) * counts[i];
    auto m = ema_sum.row(i);
    auto s = sums.row(i);
    for (std::size_t c = 0; c < dim(); ++c) m[c] = decay * m[c] + (1.0 - decay) * s[c];
    if (counts[i] == 0.0) continue;
    auto e = embeddings.value.row(i);
    for (std::size_t c = 0; c < dim(); ++c) e[c] = m[c] / ema_count[i];
    last_used[i] = step;
    usage[i] += static_cast<std::uint64_t>(counts[i]);
  }
}

std::size_t Codebook::reseed_dead(const nn::Tensor& recent, std::int64_t step, std::int64_t patience,
                                  std::mt19937_64& rng) {
  std::vector<std::size_t> dead;
  for (std::size_t i = 0; i < size(); ++i) {
    if (step - last_used[i] >= patience) dead.push_back(i);
  }
  if (dead.empty() || recent.rank() != 2 || recent.rows() == 0) return 0;
  std::vector<std::size_t> order(recent.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < dead.size(); ++k) {
    const std::size_t i = dead[k];
    const std::size_t src = order[k % order.size()];
    std::copy_n(recent.row(src).begin(), dim(), embeddings.value.row(i).begin());
    std::copy_n(recent.row(src).begin(), dim(), ema_sum.row(i).begin());
    ema_count[i] = 1.0;
    last_used[i] = step;
  }
  return dead.size();
}

Quantized quantize(const nn::Tensor& z, const nn::Tensor& codebook) {
  if (z.rank() != 2 || codebook.rank() != 2 || z.cols() != codebook.cols() || codebook.rows() == 0) {
    throw ShapeError("quantize " + nn::shape_string(z.shape()) + " against codebook " +
                     nn::shape_string(codebook.shape()));
  }
  const std::size_t n = z.rows();
  const std::size_t v = codebook.rows();
  // Screen with the expanded form |e|^2 - 2 z.e via one GEMM, then settle the
  // winner among near-ties with exact sums so the result equals a direct
  // nearest-neighbour search bit for bit.
  const auto e = view(codebook);
  const Eigen::VectorXd norms = e.rowwise().squaredNorm();
  const RowMat cross = view(z) * e.transpose();
  const double max_norm = norms.maxCoeff();

  Quantized out;
  out.ids.resize(n);
  out.rows = nn::Tensor({n, z.cols()});
  for (std::size_t r = 0; r < n; ++r) {
    const auto zr = z.row(r);
    double z_norm = 0.0;
    for (double x : zr) z_norm += x * x;
    double best_approx = INFINITY;
    for (std::size_t i = 0; i < v; ++i) {
      best_approx = std::min(best_approx, norms[static_cast<Eigen::Index>(i)] - 2.0 * cross(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)));
    }
    const double slack = 1e-9 * (z_norm + max_norm + 1.0);
    int best = -1;
    double best_exact = INFINITY;
    for (std::size_t i = 0; i < v; ++i) {
      const double approx = norms[static_cast<Eigen::Index>(i)] - 2.0 * cross(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i));
      if (approx > best_approx + slack) continue;
      const double d = exact_distance(zr, codebook.row(i));
      if (d < best_exact) {
        best_exact = d;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) throw DataError(DataError::Kind::kInvalid, "quantize: non-finite input row " + std::to_string(r));
    out.ids[r] = best;
    std::copy_n(codebook.row(static_cast<std::size_t>(best)).begin(), z.cols(), out.rows.row(r).begin());
  }
  return out;
}

}  // namespace vstlm::vst
