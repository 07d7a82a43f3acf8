// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/ops.hpp"

using namespace vstlm;
using namespace vstlm::nn;

TEST_CASE("affine computes xW + b") {
  Tape t;
  Parameter w("w", Tensor::matrix({{1, 0}, {0, 1}}));
  Parameter b("b", Tensor({2}), ParamRole::kBias);
  Var y = affine(t, t.constant(Tensor::matrix({{1, 0}})), t.parameter(w), t.parameter(b));
  CHECK(t.value(y).identical(Tensor::matrix({{1, 0}})));

  Tape t2;
  Parameter w2("w", Tensor::matrix({{1}, {1}}));
  Parameter b2("b", Tensor::vector({3}), ParamRole::kBias);
  Var y2 = affine(t2, t2.constant(Tensor::matrix({{1, 2}})), t2.parameter(w2), t2.parameter(b2));
  CHECK(t2.value(y2).item() == 6.0);
}

TEST_CASE("affine bias gradient of sum is ones") {
  Tape t;
  Parameter w("w", testing::random_tensor({3, 4}, 1));
  Parameter b("b", Tensor({4}), ParamRole::kBias);
  Var y = affine(t, t.constant(testing::random_tensor({5, 3}, 2)), t.parameter(w), t.parameter(b));
  t.backward(sum(t, y));
  // five rows, each contributing one
  for (double g : b.grad.values()) CHECK(g == 5.0);

  Tape t1;
  b.zero_grad();
  Var y1 = affine(t1, t1.constant(testing::random_tensor({1, 3}, 2)), t1.parameter(w), t1.parameter(b));
  t1.backward(sum(t1, y1));
  for (double g : b.grad.values()) CHECK(g == 1.0);
}

TEST_CASE("affine rejects mismatched shapes naming both") {
  Tape t;
  Parameter w("w", Tensor({3, 2}));
  Parameter b("b", Tensor({2}), ParamRole::kBias);
  try {
    affine(t, t.constant(Tensor({1, 4})), t.parameter(w), t.parameter(b));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[1x4]") != std::string::npos);
    CHECK(msg.find("[3x2]") != std::string::npos);
  }
}

TEST_CASE("softmax examples") {
  Tensor u = softmax(Tensor::vector({0, 0, 0}), 0);
  for (double v : u.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  for (double c : {-1000.0, -3.5, 0.0, 7.25, 1000.0}) {
    Tensor s = softmax(Tensor::vector({c, c}), 0);
    CHECK(s[0] == 0.5);
    CHECK(s[1] == 0.5);
  }

  Tensor q = softmax(Tensor::vector({std::log(1.0), std::log(3.0)}), 0);
  CHECK(std::abs(q[0] - 0.25) < 1e-15);
  CHECK(std::abs(q[1] - 0.75) < 1e-15);
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  Tensor x = testing::random_tensor({6, 9}, 3, 4.0);
  Tensor y = softmax(x, 1);
  Tensor shifted = x;
  for (auto& v : shifted.values()) v += 17.0;
  Tensor ys = softmax(shifted, 1);
  for (std::size_t r = 0; r < 6; ++r) {
    double total = 0.0;
    for (double v : y.row(r)) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  CHECK(max_abs_diff(y, ys) < 1e-14);

  Tensor cols = softmax(x, 0);
  for (std::size_t c = 0; c < 9; ++c) {
    double total = 0.0;
    for (std::size_t r = 0; r < 6; ++r) total += cols.at(r, c);
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(softmax(x, 2), ShapeError);
}

TEST_CASE("layer_norm examples") {
  Parameter gain("g", Tensor({4}, 1.0), ParamRole::kGain);
  Parameter bias("b", Tensor({4}), ParamRole::kBias);
  {
    Tape t;
    Var y = layer_norm(t, t.constant(Tensor::matrix({{2.5, 2.5, 2.5, 2.5}})), t.parameter(gain), t.parameter(bias));
    for (double v : t.value(y).values()) CHECK(v == 0.0);
  }
  {
    Parameter g2("g", Tensor({2}, 1.0), ParamRole::kGain);
    Parameter b2("b", Tensor({2}), ParamRole::kBias);
    Tape t;
    Var y = layer_norm(t, t.constant(Tensor::matrix({{1, -1}})), t.parameter(g2), t.parameter(b2));
    // variance 1 before eps: output is [1,-1] / sqrt(1 + 1e-5)
    CHECK(t.value(y)[0] == doctest::Approx(1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));
    CHECK(t.value(y)[1] == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));
  }
  {
    Parameter g0("g", Tensor({4}, 0.0), ParamRole::kGain);
    Parameter beta("b", Tensor::vector({0.5, -1, 2, 3}), ParamRole::kBias);
    Tape t;
    Var y = layer_norm(t, t.constant(testing::random_tensor({3, 4}, 9)), t.parameter(g0), t.parameter(beta));
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 4; ++c) CHECK(t.value(y).at(r, c) == beta.value[c]);
    }
  }
}

TEST_CASE("layer_norm rows have zero mean and unit variance") {
  Parameter gain("g", Tensor({16}, 1.0), ParamRole::kGain);
  Parameter bias("b", Tensor({16}), ParamRole::kBias);
  Tape t;
  Var y = layer_norm(t, t.constant(testing::random_tensor({5, 16}, 4, 3.0)), t.parameter(gain), t.parameter(bias));
  for (std::size_t r = 0; r < 5; ++r) {
    double mean = 0.0, var = 0.0;
    for (double v : t.value(y).row(r)) mean += v / 16.0;
    for (double v : t.value(y).row(r)) var += (v - mean) * (v - mean) / 16.0;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("cross_entropy examples") {
  const std::vector<int> zero{0};
  {
    Tape t;
    Var l = cross_entropy(t, t.constant(Tensor({1, 4})), zero);
    CHECK(t.value(l).item() == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  }
  {
    Tape t;
    Var l = cross_entropy(t, t.constant(Tensor::matrix({{60, 0, 0}})), zero);
    CHECK(t.value(l).item() < 1e-25);
  }
  {
    Tensor row = testing::random_tensor({1, 5}, 5);
    Tensor two({2, 5});
    for (std::size_t c = 0; c < 5; ++c) two.at(0, c) = two.at(1, c) = row.at(0, c);
    Tape t;
    const std::vector<int> one{3}, both{3, 3};
    double single = t.value(cross_entropy(t, t.constant(row), one)).item();
    double pair = t.value(cross_entropy(t, t.constant(two), both)).item();
    CHECK(single == pair);
  }
}

TEST_CASE("cross_entropy gradient is (softmax - onehot) / n") {
  Parameter logits("l", testing::random_tensor({3, 4}, 6));
  const std::vector<int> targets{1, 0, 3};
  Tape t;
  t.backward(cross_entropy(t, t.parameter(logits), targets));
  Tensor p = softmax(logits.value, 1);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      const double expect = (p.at(r, c) - (static_cast<int>(c) == targets[r] ? 1.0 : 0.0)) / 3.0;
      CHECK(std::abs(logits.grad.at(r, c) - expect) < 1e-15);
    }
  }
}

TEST_CASE("cross_entropy rejects out-of-range targets and skips ignored rows") {
  Tape t;
  const std::vector<int> bad{4};
  CHECK_THROWS_AS(cross_entropy(t, t.constant(Tensor({1, 4})), bad), ShapeError);
  const std::vector<int> neg{-2};
  CHECK_THROWS_AS(cross_entropy(t, t.constant(Tensor({1, 4})), neg), ShapeError);

  Tensor logits = testing::random_tensor({2, 4}, 8);
  const std::vector<int> masked{kIgnoreTarget, 2};
  Tensor second({1, 4});
  for (std::size_t c = 0; c < 4; ++c) second.at(0, c) = logits.at(1, c);
  const std::vector<int> only{2};
  CHECK(t.value(cross_entropy(t, t.constant(logits), masked)).item() ==
        t.value(cross_entropy(t, t.constant(second), only)).item());
}

TEST_CASE("frozen parameters keep a zero gradient") {
  Parameter w("w", testing::random_tensor({3, 3}, 10), ParamRole::kWeight, false);
  Parameter b("b", Tensor({3}), ParamRole::kBias);
  Tape t;
  Var y = affine(t, t.constant(testing::random_tensor({2, 3}, 11)), t.parameter(w), t.parameter(b));
  t.backward(testing::readout(t, y, 12));
  for (double g : w.grad.values()) CHECK(g == 0.0);
  bool any = false;
  for (double g : b.grad.values()) any = any || g != 0.0;
  CHECK(any);
}

TEST_CASE("ops are bitwise deterministic") {
  auto run = [] {
    Parameter w("w", testing::random_tensor({8, 8}, 20));
    Parameter b("b", testing::random_tensor({8}, 21), ParamRole::kBias);
    Parameter g("g", Tensor({8}, 1.0), ParamRole::kGain);
    Parameter beta("beta", Tensor({8}), ParamRole::kBias);
    Tape t;
    Var x = t.constant(testing::random_tensor({5, 8}, 22));
    Var y = softmax(t, gelu(t, layer_norm(t, affine(t, x, t.parameter(w), t.parameter(b)), t.parameter(g),
                                          t.parameter(beta))),
                    1);
    t.backward(testing::readout(t, y, 23));
    return std::pair{t.value(y), w.grad};
  };
  auto [y1, g1] = run();
  auto [y2, g2] = run();
  CHECK(y1.identical(y2));
  CHECK(g1.identical(g2));
}

TEST_CASE("gather and replace rows route gradients") {
  Parameter table("emb", testing::random_tensor({5, 3}, 30));
  const std::vector<int> ids{4, 1, 4};
  Tape t;
  Var rows = gather_rows(t, t.parameter(table), ids);
  CHECK(t.value(rows).at(0, 2) == table.value.at(4, 2));
  Parameter patch("patch", testing::random_tensor({1, 3}, 31));
  Var mixed = replace_rows(t, rows, t.parameter(patch), 1);
  CHECK(t.value(mixed).at(1, 0) == patch.value.at(0, 0));
  t.backward(sum(t, mixed));
  CHECK(table.grad.at(4, 0) == 2.0);
  CHECK(table.grad.at(1, 0) == 0.0);  // row replaced downstream
  CHECK(patch.grad.at(0, 1) == 1.0);
  const std::vector<int> bad{5};
  CHECK_THROWS_AS(gather_rows(t, t.parameter(table), bad), ShapeError);
}

TEST_CASE("straight-through passes the gradient to z unchanged") {
  Parameter z("z", testing::random_tensor({2, 3}, 40));
  Tensor q = testing::random_tensor({2, 3}, 41);
  Tape t;
  Var st = straight_through(t, t.parameter(z), q);
  CHECK(t.value(st).identical(q));
  Tensor target = testing::random_tensor({2, 3}, 42);
  t.backward(mean_squared_error(t, st, target));
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(z.grad[i] - 2.0 * (q[i] - target[i]) / 6.0) < 1e-15);
}

TEST_CASE("dropout is identity at p = 0 and rescales survivors") {
  auto rng = keyed_stream(1, {2});
  Tape t;
  Var x = t.constant(Tensor({4, 50}, 1.0));
  CHECK(dropout(t, x, 0.0, rng).id == x.id);
  Var y = dropout(t, x, 0.5, rng);
  for (double v : t.value(y).values()) CHECK((v == 0.0 || v == 2.0));
  CHECK_THROWS_AS(dropout(t, x, 1.0, rng), ConfigError);
}
