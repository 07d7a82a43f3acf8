// SPDX-License-Identifier: Apache-2.0
#include "vstlm/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <string>

#include "eigen_map.hpp"
#include "vstlm/numerics/error.hpp"

namespace vstlm::nn {

using detail::mat;

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.cols() != bv.rows()) mismatch("matmul", av, bv);
  Tensor out({av.rows(), bv.cols()});
  mat(out).noalias() = mat(av) * mat(bv);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(a)) mat(tp.grad(a)).noalias() += mat(g) * mat(tp.value(b)).transpose();
    if (tp.needs_grad(b)) mat(tp.grad(b)).noalias() += mat(tp.value(a)).transpose() * mat(g);
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_matrix(av, "matmul_nt");
  require_matrix(bv, "matmul_nt");
  if (av.cols() != bv.cols()) mismatch("matmul_nt", av, bv);
  Tensor out({av.rows(), bv.rows()});
  mat(out).noalias() = mat(av) * mat(bv).transpose();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(a)) mat(tp.grad(a)).noalias() += mat(g) * mat(tp.value(b));
    if (tp.needs_grad(b)) mat(tp.grad(b)).noalias() += mat(g).transpose() * mat(tp.value(a));
  });
}

Var affine(Tape& t, Var x, Var w, Var b) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const Tensor& bv = t.value(b);
  require_matrix(xv, "affine");
  require_matrix(wv, "affine");
  if (xv.cols() != wv.rows()) mismatch("affine", xv, wv);
  if (bv.size() != wv.cols()) mismatch("affine bias", wv, bv);
  Tensor out({xv.rows(), wv.cols()});
  auto o = mat(out);
  o.noalias() = mat(xv) * mat(wv);
  const Eigen::Map<const Eigen::RowVectorXd> bias(bv.data(), static_cast<Eigen::Index>(bv.size()));
  o.rowwise() += bias;
  return t.record(std::move(out), {x, w, b}, [x, w, b](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(x)) mat(tp.grad(x)).noalias() += mat(g) * mat(tp.value(w)).transpose();
    if (tp.needs_grad(w)) mat(tp.grad(w)).noalias() += mat(tp.value(x)).transpose() * mat(g);
    if (tp.needs_grad(b)) {
      Tensor& gb = tp.grad(b);
      Eigen::Map<Eigen::RowVectorXd>(gb.data(), static_cast<Eigen::Index>(gb.size())) += mat(g).colwise().sum();
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (!av.same_shape(bv)) mismatch("add", av, bv);
  Tensor out = av;
  out += bv;
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(a)) tp.grad(a) += g;
    if (tp.needs_grad(b)) tp.grad(b) += g;
  });
}

Var scale(Tape& t, Var a, double s) {
  Tensor out = t.value(a);
  out *= s;
  return t.record(std::move(out), {a}, [a, s](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * g[i];
  });
}

Var sum(Tape& t, Var a) {
  double total = 0.0;
  for (double v : t.value(a).values()) total += v;
  return t.record(Tensor::scalar(total), {a}, [a](Tape& tp, const Tensor& g) {
    const double s = g.item();
    for (auto& v : tp.grad(a).values()) v += s;
  });
}

Var gelu(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = gelu(xv[i]);
  return t.record(std::move(out), {x}, [x](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i];
      const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      gx[i] += g[i] * d;
    }
  });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gain);
  const Tensor& bv = t.value(bias);
  require_matrix(xv, "layer_norm");
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  if (d == 0) throw ShapeError("layer_norm: zero-width rows");
  if (gv.size() != d || bv.size() != d) mismatch("layer_norm", xv, gv);
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");

  Tensor normed({n, d});
  std::vector<double> rstd(n);
  Tensor out({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    auto row = xv.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      normed.at(r, c) = (row[c] - mean) * rstd[r];
      out.at(r, c) = gv[c] * normed.at(r, c) + bv[c];
    }
  }
  return t.record(std::move(out), {x, gain, bias},
                  [x, gain, bias, normed = std::move(normed), rstd = std::move(rstd)](Tape& tp, const Tensor& g) {
                    const std::size_t n = normed.rows();
                    const std::size_t d = normed.cols();
                    const Tensor& gv = tp.value(gain);
                    if (tp.needs_grad(gain) || tp.needs_grad(bias)) {
                      Tensor& gg = tp.grad(gain);
                      Tensor& gb = tp.grad(bias);
                      for (std::size_t r = 0; r < n; ++r) {
                        for (std::size_t c = 0; c < d; ++c) {
                          gg[c] += g.at(r, c) * normed.at(r, c);
                          gb[c] += g.at(r, c);
                        }
                      }
                    }
                    if (!tp.needs_grad(x)) return;
                    Tensor& gx = tp.grad(x);
                    std::vector<double> dn(d);
                    for (std::size_t r = 0; r < n; ++r) {
                      double mean_dn = 0.0;
                      double mean_dn_n = 0.0;
                      for (std::size_t c = 0; c < d; ++c) {
                        dn[c] = g.at(r, c) * gv[c];
                        mean_dn += dn[c];
                        mean_dn_n += dn[c] * normed.at(r, c);
                      }
                      mean_dn /= static_cast<double>(d);
                      mean_dn_n /= static_cast<double>(d);
                      for (std::size_t c = 0; c < d; ++c) {
                        gx.at(r, c) += rstd[r] * (dn[c] - mean_dn - normed.at(r, c) * mean_dn_n);
                      }
                    }
                  });
}

namespace {

struct AxisLayout {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_string(shape));
  }
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x.shape(), axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      const std::size_t base = o * l.n * l.inner + i;
      double mx = -INFINITY;
      for (std::size_t k = 0; k < l.n; ++k) mx = std::max(mx, x[base + k * l.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < l.n; ++k) {
        const double e = std::exp(x[base + k * l.inner] - mx);
        out[base + k * l.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < l.n; ++k) out[base + k * l.inner] /= total;
    }
  }
  return out;
}

Var softmax(Tape& t, Var x, std::size_t axis) {
  Tensor out = softmax(t.value(x), axis);
  const AxisLayout l = axis_layout(out.shape(), axis);
  return t.record(out, {x}, [x, l, y = out](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t base = o * l.n * l.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < l.n; ++k) dot += g[base + k * l.inner] * y[base + k * l.inner];
        for (std::size_t k = 0; k < l.n; ++k) {
          const std::size_t j = base + k * l.inner;
          gx[j] += y[j] * (g[j] - dot);
        }
      }
    }
  });
}

Var gather_rows(Tape& t, Var table, std::span<const int> ids) {
  const Tensor& tv = t.value(table);
  require_matrix(tv, "gather_rows");
  const std::size_t d = tv.cols();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(ids[i]) + " outside table " + shape_string(tv.shape()));
    }
    std::copy_n(tv.row(static_cast<std::size_t>(ids[i])).begin(), d, out.row(i).begin());
  }
  return t.record(std::move(out), {table},
                  [table, idx = std::vector<int>(ids.begin(), ids.end())](Tape& tp, const Tensor& g) {
                    Tensor& gt = tp.grad(table);
                    const std::size_t d = gt.cols();
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      auto dst = gt.row(static_cast<std::size_t>(idx[i]));
                      auto src = g.row(i);
                      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
                    }
                  });
}

Var replace_rows(Tape& t, Var base, Var rows, std::size_t offset) {
  const Tensor& bv = t.value(base);
  const Tensor& rv = t.value(rows);
  require_matrix(bv, "replace_rows");
  require_matrix(rv, "replace_rows");
  if (rv.cols() != bv.cols() || offset + rv.rows() > bv.rows()) mismatch("replace_rows", bv, rv);
  Tensor out = bv;
  for (std::size_t r = 0; r < rv.rows(); ++r) std::copy_n(rv.row(r).begin(), rv.cols(), out.row(offset + r).begin());
  const std::size_t count = rv.rows();
  return t.record(std::move(out), {base, rows}, [base, rows, offset, count](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(base)) {
      Tensor& gb = tp.grad(base);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        if (r >= offset && r < offset + count) continue;
        for (std::size_t c = 0; c < g.cols(); ++c) gb.at(r, c) += g.at(r, c);
      }
    }
    if (tp.needs_grad(rows)) {
      Tensor& gr = tp.grad(rows);
      for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gr.at(r, c) += g.at(offset + r, c);
      }
    }
  });
}

Var mean_rows(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  require_matrix(xv, "mean_rows");
  const std::size_t n = xv.rows();
  if (n == 0) throw ShapeError("mean_rows: no rows");
  Tensor out({1, xv.cols()});
  mat(out) = mat(xv).colwise().sum() / static_cast<double>(n);
  return t.record(std::move(out), {x}, [x, n](Tape& tp, const Tensor& g) {
    auto gx = mat(tp.grad(x));
    const auto gr = mat(g).row(0) / static_cast<double>(n);
    gx.rowwise() += gr;
  });
}

Var straight_through(Tape& t, Var z, const Tensor& quantized) {
  if (!t.value(z).same_shape(quantized)) mismatch("straight_through", t.value(z), quantized);
  return t.record(quantized, {z}, [z](Tape& tp, const Tensor& g) { tp.grad(z) += g; });
}

Var mean_squared_error(Tape& t, Var a, const Tensor& target) {
  const Tensor& av = t.value(a);
  if (!av.same_shape(target)) mismatch("mean_squared_error", av, target);
  const double n = static_cast<double>(av.size());
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) total += (av[i] - target[i]) * (av[i] - target[i]);
  return t.record(Tensor::scalar(total / n), {a}, [a, target, n](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.value(a);
    Tensor& ga = tp.grad(a);
    const double s = 2.0 * g.item() / n;
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += s * (av[i] - target[i]);
  });
}

Var cross_entropy(Tape& t, Var logits, std::span<const int> targets) {
  const Tensor& lv = t.value(logits);
  require_matrix(lv, "cross_entropy");
  const std::size_t n = lv.rows();
  const std::size_t classes = lv.cols();
  if (targets.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_string(lv.shape()));
  }
  std::size_t counted = 0;
  for (int y : targets) {
    if (y == kIgnoreTarget) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ShapeError("cross_entropy: target " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
    ++counted;
  }
  Tensor probs({n, classes});
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    auto row = lv.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs.at(r, c) = std::exp(row[c] - mx);
      total += probs.at(r, c);
    }
    for (std::size_t c = 0; c < classes; ++c) probs.at(r, c) /= total;
    if (targets[r] != kIgnoreTarget) loss += mx + std::log(total) - row[static_cast<std::size_t>(targets[r])];
  }
  const double denom = counted ? static_cast<double>(counted) : 1.0;
  return t.record(Tensor::scalar(loss / denom), {logits},
                  [logits, probs = std::move(probs), tg = std::vector<int>(targets.begin(), targets.end()),
                   denom](Tape& tp, const Tensor& g) {
                    Tensor& gl = tp.grad(logits);
                    const double s = g.item() / denom;
                    for (std::size_t r = 0; r < tg.size(); ++r) {
                      if (tg[r] == kIgnoreTarget) continue;
                      for (std::size_t c = 0; c < probs.cols(); ++c) {
                        const double onehot = static_cast<int>(c) == tg[r] ? 1.0 : 0.0;
                        gl.at(r, c) += s * (probs.at(r, c) - onehot);
                      }
                    }
                  });
}

Var dropout(Tape& t, Var x, double p, std::mt19937_64& rng) {
  const std::size_t rows = t.value(x).rank() == 2 ? t.value(x).rows() : 1;
  const std::size_t one[] = {rows};
  return dropout(t, x, p, std::span<std::mt19937_64>(&rng, 1), one);
}

Var dropout(Tape& t, Var x, double p, std::span<std::mt19937_64> rngs, std::span<const std::size_t> segments) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must lie in [0, 1)");
  if (p == 0.0) return x;
  const Tensor& xv = t.value(x);
  const std::size_t rows = xv.rank() == 2 ? xv.rows() : 1;
  const std::size_t width = xv.size() / std::max<std::size_t>(rows, 1);
  if (rngs.size() != segments.size() ||
      std::accumulate(segments.begin(), segments.end(), std::size_t{0}) != rows) {
    throw ShapeError("dropout: " + std::to_string(segments.size()) + " segments and " + std::to_string(rngs.size()) +
                     " streams for " + std::to_string(rows) + " rows");
  }
  Tensor mask(xv.shape());
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  std::size_t at = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    for (std::size_t i = 0; i < segments[s] * width; ++i, ++at) mask[at] = keep(rngs[s]) ? inv : 0.0;
  }
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return t.record(std::move(out), {x}, [x, mask = std::move(mask)](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

}  // namespace vstlm::nn
