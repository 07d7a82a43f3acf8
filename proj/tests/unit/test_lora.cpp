// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "vstlm/lm/action_lm.hpp"
#include "vstlm/lora/lora.hpp"
#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/grad_check.hpp"
#include "vstlm/numerics/ops.hpp"

using namespace vstlm;
using nn::Tensor;

namespace {

nn::Linear make_linear(std::size_t in, std::size_t out, std::uint64_t seed, const std::string& name = "blk.attn.query") {
  auto rng = nn::keyed_stream(seed, {1});
  nn::Linear lin(name, in, out, 0.5, rng);
  lin.bias.value = testing::random_tensor({out}, seed + 1);
  return lin;
}

Tensor run(nn::Linear& lin, const Tensor& x) {
  nn::Tape t(false);
  return t.value(lin.forward(t, t.constant(x), nn::ForwardContext{}));
}

lora::LoraAdapter& attach_one(nn::Linear& lin, lora::LoraConfig cfg = {}) {
  nn::Linear* p = &lin;
  cfg.targets = {lin.name};
  return *lora::attach_adapters(std::span<nn::Linear* const>(&p, 1), cfg, 3).front();
}

lm::ActionLm small_lm(std::uint64_t seed = 5) {
  lm::LmConfig c;
  c.vocab_size = 30;
  c.layers = 2;
  c.heads = 2;
  c.embed_dim = 16;
  c.context = 16;
  return lm::ActionLm(c, seed);
}

}  // namespace

TEST_CASE("hand example: W0 = I, rank 1") {
  nn::Linear lin = make_linear(2, 2, 1);
  lin.weight.value = Tensor({2, 2}, std::vector<double>{1, 0, 0, 1});
  lin.bias.value.fill(0.0);
  lora::LoraConfig cfg;
  cfg.rank = 1;
  cfg.alpha = 1.0;
  cfg.dropout = 0.0;
  auto& ad = attach_one(lin, cfg);
  ad.a.value = Tensor({1, 2}, std::vector<double>{1, 0});
  ad.b.value = Tensor({2, 1}, std::vector<double>{0, 1});
  const Tensor y = run(lin, Tensor({1, 2}, std::vector<double>{1, 0}));
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 1.0);
}

TEST_CASE("attach freezes W0 and starts with B = 0") {
  nn::Linear lin = make_linear(6, 5, 2);
  auto& ad = attach_one(lin);
  CHECK_FALSE(lin.weight.trainable);
  CHECK_FALSE(lin.bias.trainable);
  CHECK(ad.a.trainable);
  CHECK(ad.b.trainable);
  for (double v : ad.b.value.values()) CHECK(v == 0.0);
  double sq = 0.0;
  for (double v : ad.a.value.values()) sq += v * v;
  const double std_a = std::sqrt(sq / static_cast<double>(ad.a.value.size()));
  CHECK(std_a > 0.005);
  CHECK(std_a < 0.05);
}

TEST_CASE("zero B leaves outputs bitwise unchanged") {
  nn::Linear lin = make_linear(8, 7, 3);
  std::vector<Tensor> before;
  for (std::uint64_t s = 0; s < 10; ++s) before.push_back(run(lin, testing::random_tensor({4, 8}, 100 + s)));
  attach_one(lin);
  for (std::uint64_t s = 0; s < 10; ++s) CHECK(run(lin, testing::random_tensor({4, 8}, 100 + s)).identical(before[s]));
}

TEST_CASE("doubling alpha doubles the adapter contribution") {
  nn::Linear lin = make_linear(5, 4, 4);
  const Tensor x = testing::random_tensor({3, 5}, 9);
  const Tensor base = run(lin, x);
  auto& ad = attach_one(lin);
  ad.b.value = testing::random_tensor({4, 8}, 10);
  const Tensor y1 = run(lin, x);
  ad.alpha *= 2.0;
  const Tensor y2 = run(lin, x);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(y2[i] - base[i] == doctest::Approx(2.0 * (y1[i] - base[i])).epsilon(1e-12));
  }
}

TEST_CASE("dropout is disabled at evaluation and active in training") {
  nn::Linear lin = make_linear(6, 6, 5);
  auto& ad = attach_one(lin);
  ad.b.value = testing::random_tensor({6, 8}, 11);
  const Tensor x = testing::random_tensor({4, 6}, 12);
  CHECK(run(lin, x).identical(run(lin, x)));
  auto rng = nn::keyed_stream(1, {2});
  nn::ForwardContext train_ctx;
  train_ctx.training = true;
  train_ctx.rng = &rng;
  nn::Tape t(false);
  const Tensor yt = t.value(lin.forward(t, t.constant(x), train_ctx));
  CHECK_FALSE(yt.identical(run(lin, x)));
}

TEST_CASE("merge matches the unmerged forward and is reversible") {
  nn::Linear lin = make_linear(12, 9, 6);
  const Tensor w0 = lin.weight.value;
  SUBCASE("B = 0 merges to W0 exactly") {
    attach_one(lin);
    CHECK(lora::merge(lin).identical(w0));
  }
  SUBCASE("random A, B over 20 probes") {
    auto& ad = attach_one(lin);
    ad.a.value = testing::random_tensor({8, 12}, 20);
    ad.b.value = testing::random_tensor({9, 8}, 21);
    const Tensor merged = lora::merge(lin);
    Tensor back = merged;
    Tensor d = ad.delta();
    d *= -1.0;
    back += d;
    for (std::size_t i = 0; i < w0.size(); ++i) CHECK(std::abs(back[i] - w0[i]) <= 1e-12);

    nn::Linear plain = lin;
    plain.adapter.reset();
    plain.weight.value = merged;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Tensor x = testing::random_tensor({3, 12}, 300 + s);
      const Tensor a = run(lin, x);
      const Tensor b = run(plain, x);
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("gradients reach only A and B") {
  nn::Linear lin = make_linear(5, 4, 7);
  auto& ad = attach_one(lin);
  ad.b.value = testing::random_tensor({4, 8}, 30);
  const Tensor x = testing::random_tensor({3, 5}, 31);
  nn::Tape t;
  t.backward(testing::readout(t, lin.forward(t, t.constant(x), nn::ForwardContext{}), 32));
  double ga = 0.0, gb = 0.0;
  for (double v : ad.a.grad.values()) ga += std::abs(v);
  for (double v : ad.b.grad.values()) gb += std::abs(v);
  CHECK(ga > 0.0);
  CHECK(gb > 0.0);
  for (double v : lin.weight.grad.values()) CHECK(v == 0.0);
  for (double v : lin.bias.grad.values()) CHECK(v == 0.0);

  std::vector<nn::Parameter*> params{&lin.weight, &lin.bias, &ad.a, &ad.b};
  const auto report = nn::grad_check(
      [&](nn::Tape& tp) { return testing::readout(tp, lin.forward(tp, tp.constant(x), nn::ForwardContext{}), 32); },
      params);
  CHECK_FALSE(report.frozen_leak);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("attach errors") {
  nn::Linear lin = make_linear(4, 4, 8);
  nn::Linear* p = &lin;
  lora::LoraConfig cfg;
  cfg.targets = {"nothing.here"};
  CHECK_THROWS_AS(lora::attach_adapters(std::span<nn::Linear* const>(&p, 1), cfg, 1), ConfigError);
  attach_one(lin);
  cfg.targets = {lin.name};
  CHECK_THROWS_AS(lora::attach_adapters(std::span<nn::Linear* const>(&p, 1), cfg, 1), ConfigError);
  cfg.rank = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.rank = 8;
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.dropout = 0.1;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("trainable fraction arithmetic") {
  SUBCASE("single 100 x 100 matrix, r = 8") {
    nn::Parameter w("w", Tensor({100, 100}), nn::ParamRole::kWeight, false);
    nn::Parameter a("a", Tensor({8, 100}));
    nn::Parameter b("b", Tensor({100, 8}));
    std::vector<nn::Parameter*> ps{&w, &a, &b};
    CHECK(lora::trainable_fraction(ps) == doctest::Approx(1600.0 / 11600.0).epsilon(1e-15));
  }
  SUBCASE("fully trainable model") {
    nn::Parameter w("w", Tensor({3, 3}));
    std::vector<nn::Parameter*> ps{&w};
    CHECK(lora::trainable_fraction(ps) == 1.0);
  }
  SUBCASE("d = 4096, r = 8") {
    const double d = 4096, r = 8;
    nn::Parameter w("w", Tensor({4096, 4096}), nn::ParamRole::kWeight, false);
    nn::Parameter a("a", Tensor({8, 4096}));
    nn::Parameter b("b", Tensor({4096, 8}));
    std::vector<nn::Parameter*> ps{&w, &a, &b};
    const double f = lora::trainable_fraction(ps);
    CHECK(f == doctest::Approx(2 * r * d / (d * d + 2 * r * d)).epsilon(1e-15));
    CHECK(f == doctest::Approx(0.0039).epsilon(0.01));
  }
  SUBCASE("empty model is rejected") {
    std::vector<nn::Parameter*> none;
    CHECK_THROWS_AS(lora::trainable_fraction(none), ConfigError);
  }
}

TEST_CASE("default selector adapts query and value of every layer") {
  auto model = small_lm();
  const auto linears = model.linears();
  const auto adapters = lora::attach_adapters(linears, lora::LoraConfig{}, 1);
  CHECK(adapters.size() == 2 * model.config().layers);
  for (std::size_t l = 0; l < model.config().layers; ++l) {
    auto& attn = model.blocks[l].attn;
    CHECK(lora::adapter_of(attn.query) != nullptr);
    CHECK(lora::adapter_of(attn.value) != nullptr);
    CHECK(lora::adapter_of(attn.key) == nullptr);
    CHECK(lora::adapter_of(attn.output) == nullptr);
  }
  CHECK(lora::adapter_of(model.head) == nullptr);
}

TEST_CASE("adapter copies are independent") {
  nn::Linear lin = make_linear(4, 3, 9);
  attach_one(lin);
  nn::Linear copy = lin;
  lora::adapter_of(copy)->b.value.fill(1.0);
  for (double v : lora::adapter_of(lin)->b.value.values()) CHECK(v == 0.0);
}

TEST_CASE("merge_adapters folds and detaches") {
  auto model = small_lm();
  const auto linears = model.linears();
  auto adapters = lora::attach_adapters(linears, lora::LoraConfig{}, 2);
  for (std::size_t i = 0; i < adapters.size(); ++i) adapters[i]->b.value = testing::random_tensor(adapters[i]->b.value.shape(), 40 + i, 0.1);
  const std::vector<int> ids{1, 2, 3, 4, 5, 6};
  nn::Tape t1(false);
  const Tensor before = t1.value(model.forward(t1, ids, nn::ForwardContext{}));
  CHECK(lora::merge_adapters(linears) == adapters.size());
  for (auto* lin : linears) CHECK(lin->adapter == nullptr);
  nn::Tape t2(false);
  const Tensor after = t2.value(model.forward(t2, ids, nn::ForwardContext{}));
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(before[i] - after[i]) <= 1e-9);
}
