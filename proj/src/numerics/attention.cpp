// SPDX-License-Identifier: Apache-2.0
#include "vstlm/numerics/attention.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "eigen_map.hpp"
#include "vstlm/numerics/error.hpp"

namespace vstlm::nn {

using detail::mat;
using detail::RowMat;

Var scaled_dot_product_attention(Tape& t, Var q, Var k, Var v, std::size_t heads, bool causal, Tensor* weights) {
  const std::size_t m = t.value(q).rank() == 2 ? t.value(q).rows() : 0;
  const std::size_t one[] = {m};
  return scaled_dot_product_attention(t, q, k, v, heads, causal, one, weights);
}

Var scaled_dot_product_attention(Tape& t, Var q, Var k, Var v, std::size_t heads, bool causal,
                                 std::span<const std::size_t> segments, Tensor* weights) {
  const Tensor& qv = t.value(q);
  const Tensor& kv = t.value(k);
  const Tensor& vv = t.value(v);
  if (qv.rank() != 2 || !qv.same_shape(kv) || !qv.same_shape(vv)) {
    throw ShapeError("attention: q/k/v shapes " + shape_string(qv.shape()) + ", " + shape_string(kv.shape()) + ", " +
                     shape_string(vv.shape()));
  }
  const std::size_t m = qv.rows();
  const std::size_t d = qv.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (std::accumulate(segments.begin(), segments.end(), std::size_t{0}) != m) {
    throw ShapeError("attention: segment lengths do not sum to " + std::to_string(m) + " rows");
  }
  const auto dh = static_cast<Eigen::Index>(d / heads);
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));

  struct Block {
    Eigen::Index offset, length;
  };
  std::vector<Block> blocks;
  Eigen::Index offset = 0;
  for (std::size_t len : segments) {
    blocks.push_back({offset, static_cast<Eigen::Index>(len)});
    offset += static_cast<Eigen::Index>(len);
  }

  // probs[b * heads + h]: attention probabilities of block b, head h.
  std::vector<RowMat> probs(blocks.size() * heads);
  Tensor out({m, d});
  auto o = mat(out);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto [off, len] = blocks[b];
    for (std::size_t h = 0; h < heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h) * dh;
      RowMat scores = (mat(qv).block(off, col, len, dh) * mat(kv).block(off, col, len, dh).transpose()) * s;
      for (Eigen::Index i = 0; i < len; ++i) {
        const Eigen::Index visible = causal ? i + 1 : len;
        const double mx = scores.row(i).head(visible).maxCoeff();
        double total = 0.0;
        for (Eigen::Index j = 0; j < visible; ++j) {
          scores(i, j) = std::exp(scores(i, j) - mx);
          total += scores(i, j);
        }
        for (Eigen::Index j = 0; j < visible; ++j) scores(i, j) /= total;
        for (Eigen::Index j = visible; j < len; ++j) scores(i, j) = 0.0;
      }
      o.block(off, col, len, dh).noalias() = scores * mat(vv).block(off, col, len, dh);
      probs[b * heads + h] = std::move(scores);
    }
  }
  if (weights) {
    *weights = Tensor({heads, m, m});
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto [off, len] = blocks[b];
      for (std::size_t h = 0; h < heads; ++h) {
        const RowMat& p = probs[b * heads + h];
        for (Eigen::Index i = 0; i < len; ++i) {
          for (Eigen::Index j = 0; j < len; ++j) {
            (*weights)[h * m * m + static_cast<std::size_t>(off + i) * m + static_cast<std::size_t>(off + j)] = p(i, j);
          }
        }
      }
    }
  }
  return t.record(std::move(out), {q, k, v},
                  [q, k, v, heads, dh, s, blocks = std::move(blocks), probs = std::move(probs)](Tape& tp,
                                                                                                const Tensor& g) {
                    const auto gm = mat(g);
                    const auto qm = mat(tp.value(q));
                    const auto km = mat(tp.value(k));
                    const auto vm = mat(tp.value(v));
                    const bool need_q = tp.needs_grad(q);
                    const bool need_k = tp.needs_grad(k);
                    const bool need_v = tp.needs_grad(v);
                    for (std::size_t b = 0; b < blocks.size(); ++b) {
                      const auto [off, len] = blocks[b];
                      for (std::size_t h = 0; h < heads; ++h) {
                        const auto col = static_cast<Eigen::Index>(h) * dh;
                        const RowMat& p = probs[b * heads + h];
                        const auto go = gm.block(off, col, len, dh);
                        if (need_v) mat(tp.grad(v)).block(off, col, len, dh).noalias() += p.transpose() * go;
                        if (!need_q && !need_k) continue;
                        RowMat dp = go * vm.block(off, col, len, dh).transpose();
                        // Softmax backward row by row; masked entries have p = 0.
                        RowMat ds = p.cwiseProduct(dp);
                        const Eigen::VectorXd rowdot = ds.rowwise().sum();
                        ds -= p.cwiseProduct(rowdot.replicate(1, p.cols()));
                        ds *= s;
                        if (need_q) mat(tp.grad(q)).block(off, col, len, dh).noalias() += ds * km.block(off, col, len, dh);
                        if (need_k) {
                          mat(tp.grad(k)).block(off, col, len, dh).noalias() += ds.transpose() * qm.block(off, col, len, dh);
                        }
                      }
                    }
                  });
}

}  // namespace vstlm::nn
