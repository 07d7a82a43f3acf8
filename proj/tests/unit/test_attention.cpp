// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "helpers.hpp"
#include "vstlm/numerics/attention.hpp"
#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/grad_check.hpp"
#include "vstlm/numerics/layers.hpp"

using namespace vstlm;
using namespace vstlm::nn;

namespace {

SelfAttention make_attention(std::size_t width, std::size_t heads, bool causal, std::uint64_t seed) {
  auto rng = keyed_stream(seed, {1});
  SelfAttention a("attn", width, heads, causal, 0.3, rng);
  for (Linear* l : {&a.query, &a.key, &a.value, &a.output}) l->bias.value = testing::random_tensor({width}, seed + 7, 0.1);
  return a;
}

}  // namespace

TEST_CASE("single row attends to itself") {
  SelfAttention a = make_attention(8, 2, false, 1);
  Tensor x = testing::random_tensor({1, 8}, 2);
  Tape t(false);
  ForwardContext ctx;
  Var y = multi_head_self_attention(t, t.constant(x), a, ctx);
  // value projection then output projection
  Tape t2(false);
  Var v = a.value.forward(t2, t2.constant(x), ctx);
  Var expect = a.output.forward(t2, v, ctx);
  CHECK(max_abs_diff(t.value(y), t2.value(expect)) < 1e-14);
}

TEST_CASE("equal rows give equal outputs") {
  SelfAttention a = make_attention(8, 4, false, 3);
  Tensor row = testing::random_tensor({1, 8}, 4);
  Tensor x({5, 8});
  for (std::size_t r = 0; r < 5; ++r) std::copy_n(row.data(), 8, x.row(r).begin());
  Tape t(false);
  ForwardContext ctx;
  const Tensor& y = t.value(multi_head_self_attention(t, t.constant(x), a, ctx));
  for (std::size_t r = 1; r < 5; ++r) {
    for (std::size_t c = 0; c < 8; ++c) CHECK(y.at(r, c) == doctest::Approx(y.at(0, c)).epsilon(1e-13));
  }
}

TEST_CASE("attention weight rows sum to one") {
  for (bool causal : {false, true}) {
    SelfAttention a = make_attention(12, 3, causal, 5);
    Tape t(false);
    ForwardContext ctx;
    Tensor w;
    Var x = t.constant(testing::random_tensor({7, 12}, 6));
    Var q = a.query.forward(t, x, ctx), k = a.key.forward(t, x, ctx), v = a.value.forward(t, x, ctx);
    scaled_dot_product_attention(t, q, k, v, 3, causal, &w);
    REQUIRE(w.shape() == Shape{3, 7, 7});
    for (std::size_t h = 0; h < 3; ++h) {
      for (std::size_t i = 0; i < 7; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < 7; ++j) {
          const double p = w[(h * 7 + i) * 7 + j];
          CHECK(p >= 0.0);
          if (causal && j > i) CHECK(p == 0.0);
          total += p;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("causal mask: later rows never change earlier outputs") {
  SelfAttention a = make_attention(8, 2, true, 7);
  Tensor x = testing::random_tensor({6, 8}, 8);
  ForwardContext ctx;
  Tape base(false);
  const Tensor y0 = base.value(multi_head_self_attention(base, base.constant(x), a, ctx));
  for (std::size_t j = 1; j < 6; ++j) {
    Tensor xp = x;
    for (auto& v : xp.row(j)) v += 3.0;
    Tape t(false);
    const Tensor& y = t.value(multi_head_self_attention(t, t.constant(xp), a, ctx));
    for (std::size_t i = 0; i < j; ++i) {
      for (std::size_t c = 0; c < 8; ++c) CHECK(y.at(i, c) == y0.at(i, c));
    }
    bool changed = false;
    for (std::size_t c = 0; c < 8; ++c) changed = changed || y.at(j, c) != y0.at(j, c);
    CHECK(changed);
  }
}

TEST_CASE("width must divide into heads") {
  Tape t;
  Var x = t.constant(Tensor({3, 10}));
  CHECK_THROWS_AS(scaled_dot_product_attention(t, x, x, x, 4, false), ConfigError);
}

TEST_CASE("zeroed residual branches make a block the identity") {
  auto rng = keyed_stream(9, {0});
  TransformerBlock block("b", 8, 2, 32, false, 0.2, rng);
  block.zero_residual_branches();
  Tensor x = testing::random_tensor({4, 8}, 10);
  Tape t(false);
  ForwardContext ctx;
  CHECK(t.value(block.forward(t, t.constant(x), ctx)).identical(x));
}

TEST_CASE("segmented attention equals separate sequences") {
  const std::vector<std::size_t> lengths{3, 5, 1};
  for (bool causal : {false, true}) {
    const Tensor q = testing::random_tensor({9, 8}, 61);
    const Tensor k = testing::random_tensor({9, 8}, 62);
    const Tensor v = testing::random_tensor({9, 8}, 63);
    Tape t(false);
    Tensor w;
    const Tensor joint = t.value(
        scaled_dot_product_attention(t, t.constant(q), t.constant(k), t.constant(v), 2, causal, lengths, &w));
    std::size_t off = 0;
    for (std::size_t len : lengths) {
      auto slice = [&](const Tensor& x) {
        Tensor s({len, 8});
        for (std::size_t i = 0; i < len; ++i)
          for (std::size_t c = 0; c < 8; ++c) s.at(i, c) = x.at(off + i, c);
        return s;
      };
      Tape u(false);
      const Tensor part =
          u.value(scaled_dot_product_attention(u, u.constant(slice(q)), u.constant(slice(k)), u.constant(slice(v)), 2,
                                               causal));
      for (std::size_t i = 0; i < len; ++i)
        for (std::size_t c = 0; c < 8; ++c) CHECK(joint.at(off + i, c) == doctest::Approx(part.at(i, c)).epsilon(1e-13));
      off += len;
    }
    // No probability mass crosses a segment boundary.
    CHECK(w[0 * 81 + 0 * 9 + 3] == 0.0);
    CHECK(w[1 * 81 + 4 * 9 + 2] == 0.0);
  }
  Tape t(false);
  const Tensor x = testing::random_tensor({4, 4}, 1);
  const std::size_t bad[] = {2, 1};
  CHECK_THROWS_AS(scaled_dot_product_attention(t, t.constant(x), t.constant(x), t.constant(x), 1, false, bad), ShapeError);
}

TEST_CASE("segmented attention gradients") {
  Parameter wq("q", testing::random_tensor({7, 4}, 71));
  Parameter wk("k", testing::random_tensor({7, 4}, 72));
  Parameter wv("v", testing::random_tensor({7, 4}, 73));
  const std::vector<std::size_t> lengths{4, 3};
  std::vector<Parameter*> ps{&wq, &wk, &wv};
  for (bool causal : {false, true}) {
    const auto r = grad_check(
        [&](Tape& t) {
          return testing::readout(
              t, scaled_dot_product_attention(t, t.parameter(wq), t.parameter(wk), t.parameter(wv), 2, causal, lengths),
              74);
        },
        ps);
    CHECK(r.max_rel_error < 1e-6);
  }
}
