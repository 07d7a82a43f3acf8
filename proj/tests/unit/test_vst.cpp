// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/grad_check.hpp"
#include "vstlm/numerics/ops.hpp"
#include "vstlm/numerics/rng.hpp"
#include "vstlm/vst/token_io.hpp"
#include "vstlm/vst/vst.hpp"

using namespace vstlm;
using nn::Tensor;

namespace {

std::vector<int> brute_force_ids(const Tensor& z, const Tensor& e) {
  std::vector<int> ids;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < e.rows(); ++j) {
      double d = 0;
      for (std::size_t k = 0; k < z.cols(); ++k) d += (z.at(i, k) - e.at(j, k)) * (z.at(i, k) - e.at(j, k));
      if (d < best_d) best_d = d, best = static_cast<int>(j);
    }
    ids.push_back(best);
  }
  return ids;
}

vst::VstConfig small_config() {
  vst::VstConfig c;
  c.feature_dim = 8;
  c.embed_dim = 12;
  c.heads = 2;
  c.ffn_mult = 2;
  c.max_positions = 16;
  c.tokens_per_video = 4;
  c.codebook_size = 8;
  c.classes = 3;
  return c;
}

vst::FeatureSequence random_features(std::size_t m, std::size_t d, std::uint64_t seed) {
  return {testing::random_tensor({m, d}, seed), "vid"};
}

}  // namespace

TEST_CASE("quantize picks the nearest row and breaks ties low") {
  const Tensor e = Tensor({2, 2}, std::vector<double>{0, 0, 1, 1});
  CHECK(vst::quantize(Tensor({1, 2}, std::vector<double>{0.9, 0.8}), e).ids == std::vector<int>{1});
  CHECK(vst::quantize(Tensor({1, 2}, std::vector<double>{0.5, 0.5}), e).ids == std::vector<int>{0});
  const Tensor dup = Tensor({3, 2}, std::vector<double>{2, 2, 1, 1, 1, 1});
  const auto q = vst::quantize(Tensor({1, 2}, std::vector<double>{1, 1}), dup);
  CHECK(q.ids == std::vector<int>{1});
  CHECK(q.rows.identical(Tensor({1, 2}, std::vector<double>{1, 1})));
}

TEST_CASE("quantize matches brute force on random inputs") {
  for (std::size_t v : {8u, 64u, 512u}) {
    const Tensor e = testing::random_tensor({v, 16}, 100 + v);
    const Tensor z = testing::random_tensor({64, 16}, 200 + v);
    CHECK(vst::quantize(z, e).ids == brute_force_ids(z, e));
  }
  SUBCASE("exact ties inside a larger codebook") {
    Tensor e = testing::random_tensor({32, 4}, 5);
    for (std::size_t k = 0; k < 4; ++k) e.at(20, k) = e.at(7, k);
    Tensor z({1, 4});
    for (std::size_t k = 0; k < 4; ++k) z.at(0, k) = e.at(7, k) + 1e-3;
    CHECK(vst::quantize(z, e).ids == std::vector<int>{7});
  }
}

TEST_CASE("quantize rejects non-finite rows") {
  const Tensor e = Tensor({2, 1}, std::vector<double>{0, 1});
  CHECK_THROWS_AS(vst::quantize(Tensor({1, 1}, std::vector<double>{std::nan("")}), e), DataError);
}

TEST_CASE("pool_to_k bins") {
  const Tensor x = Tensor({4, 1}, std::vector<double>{1, 2, 3, 4});
  CHECK(vst::pool_to_k(x, 4).identical(x));
  CHECK(vst::pool_to_k(x, 2).identical(Tensor({2, 1}, std::vector<double>{1.5, 3.5})));
  const Tensor three = Tensor({3, 1}, std::vector<double>{1, 2, 3});
  CHECK(vst::pool_to_k(three, 2).identical(Tensor({2, 1}, std::vector<double>{1.5, 3})));
  SUBCASE("upsampling when M < K") {
    CHECK(vst::pool_to_k(Tensor({2, 1}, std::vector<double>{5, 7}), 4).identical(Tensor({4, 1}, std::vector<double>{5, 5, 7, 7})));
  }
  SUBCASE("equal bins keep the global mean") {
    const Tensor r = testing::random_tensor({12, 3}, 9);
    const Tensor p = vst::pool_to_k(r, 4);
    for (std::size_t k = 0; k < 3; ++k) {
      double a = 0, b = 0;
      for (std::size_t i = 0; i < 12; ++i) a += r.at(i, k);
      for (std::size_t i = 0; i < 4; ++i) b += p.at(i, k);
      CHECK(a / 12 == doctest::Approx(b / 4).epsilon(1e-14));
    }
  }
  SUBCASE("bin sizes differ by at most one, longer first") {
    const Tensor w = vst::pooling_matrix(7, 3);
    std::vector<int> sizes;
    for (std::size_t k = 0; k < 3; ++k) {
      int n = 0;
      for (std::size_t i = 0; i < 7; ++i) n += w.at(k, i) > 0;
      sizes.push_back(n);
    }
    CHECK(sizes == std::vector<int>{3, 2, 2});
  }
}

TEST_CASE("temporal self-attention") {
  vst::VstModel model(small_config(), 3);
  nn::ForwardContext ctx;
  SUBCASE("zero residual branches leave input plus positions") {
    for (auto& b : model.blocks) b.zero_residual_branches();
    const auto f = random_features(5, 8, 1);
    nn::Tape t(false);
    const Tensor out = t.value(model.temporal_self_attention(t, f, ctx));
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < 8; ++k) CHECK(out.at(i, k) == f.features.at(i, k) + model.positions.value.at(i, k));
  }
  SUBCASE("single row is valid") {
    nn::Tape t(false);
    CHECK(t.value(model.temporal_self_attention(t, random_features(1, 8, 2), ctx)).shape() == nn::Shape{1, 8});
  }
  SUBCASE("row order matters") {
    auto f = random_features(6, 8, 4);
    auto g = f;
    for (std::size_t k = 0; k < 8; ++k) std::swap(g.features.at(1, k), g.features.at(4, k));
    nn::Tape t(false);
    const Tensor a = t.value(model.temporal_self_attention(t, f, ctx));
    const Tensor b = t.value(model.temporal_self_attention(t, g, ctx));
    double diff = 0;
    for (std::size_t k = 0; k < 8; ++k) diff += std::abs(a.at(1, k) - b.at(4, k)) + std::abs(a.at(4, k) - b.at(1, k));
    CHECK(diff > 1e-6);
  }
  SUBCASE("every output row depends on every input row") {
    auto f = random_features(6, 8, 5);
    auto g = f;
    g.features.at(5, 0) += 1.0;
    nn::Tape t(false);
    const Tensor a = t.value(model.temporal_self_attention(t, f, ctx));
    const Tensor b = t.value(model.temporal_self_attention(t, g, ctx));
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(a.at(i, 1) - b.at(i, 1)) > 0);
  }
  SUBCASE("sequence longer than the positional table") {
    nn::Tape t(false);
    CHECK_THROWS_AS(model.temporal_self_attention(t, random_features(17, 8, 6), ctx), ConfigError);
  }
}

TEST_CASE("project") {
  vst::VstConfig c = small_config();
  vst::VstModel model(c, 3);
  nn::ForwardContext ctx;
  const Tensor x = testing::random_tensor({4, 8}, 11);
  SUBCASE("zero weights give zeros") {
    model.projection.weight.value.fill(0);
    model.projection.bias.value.fill(0);
    nn::Tape t(false);
    const Tensor y = t.value(model.project(t, t.constant(x), ctx));
    for (double v : y.values()) CHECK(v == 0.0);
  }
  SUBCASE("identity init passes input through") {
    c.embed_dim = 8;
    vst::VstModel square(c, 3);
    square.projection.weight.value.fill(0);
    square.projection.bias.value.fill(0);
    for (std::size_t i = 0; i < 8; ++i) square.projection.weight.value.at(i, i) = 1;
    nn::Tape t(false);
    CHECK(t.value(square.project(t, t.constant(x), ctx)).identical(x));
  }
  SUBCASE("gradient check") {
    std::vector<nn::Parameter*> ps{&model.projection.weight, &model.projection.bias};
    const auto r = nn::grad_check(
        [&](nn::Tape& t) { return testing::readout(t, model.project(t, t.constant(x), ctx), 12); }, ps);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("vst loss terms") {
  vst::VstConfig c = small_config();
  SUBCASE("z on the codebook and a confident probe leave only the switch term") {
    nn::Tape t;
    Tensor e = Tensor({2, 12}, 0.0);
    e.at(1, 0) = 1.0;
    Tensor z({4, 12}, 0.0);
    z.at(1, 0) = 1.0;
    const auto q = vst::quantize(z, e);
    CHECK(q.ids == std::vector<int>{0, 1, 0, 0});
    const auto logits = t.constant(Tensor({1, 3}, std::vector<double>{0, 1000, 0}));
    const auto terms = vst::vst_loss(t, t.constant(z), q, logits, std::vector<int>{1}, c);
    CHECK(terms.classification == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(terms.commitment == 0.0);
    CHECK(terms.smoothness == doctest::Approx(2.0 / 3.0));
    CHECK(t.value(terms.total).item() == doctest::Approx(0.1 * 2.0 / 3.0));
  }
  SUBCASE("beta = lambda = 0 is the classification loss") {
    c.commitment = 0;
    c.smoothness = 0;
    nn::Tape t;
    const Tensor z = testing::random_tensor({4, 12}, 2);
    const Tensor e = testing::random_tensor({8, 12}, 3);
    const auto logits = t.constant(Tensor({1, 3}, std::vector<double>{0.1, -0.3, 0.7}));
    const auto terms = vst::vst_loss(t, t.constant(z), vst::quantize(z, e), logits, std::vector<int>{2}, c);
    nn::Tape u;
    const double ce = u.value(nn::cross_entropy(u, u.constant(Tensor({1, 3}, std::vector<double>{0.1, -0.3, 0.7})),
                                                std::vector<int>{2}))
                          .item();
    CHECK(t.value(terms.total).item() == ce);
  }
  SUBCASE("commitment is zero iff rows coincide") {
    nn::Tape t;
    const Tensor e = testing::random_tensor({8, 12}, 3);
    Tensor z({4, 12});
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t k = 0; k < 12; ++k) z.at(i, k) = e.at(2 * i, k);
    const auto logits = t.constant(Tensor({1, 3}, std::vector<double>{0, 0, 0}));
    CHECK(vst::vst_loss(t, t.constant(z), vst::quantize(z, e), logits, std::vector<int>{0}, c).commitment == 0.0);
    z.at(3, 3) += 1e-3;
    CHECK(vst::vst_loss(t, t.constant(z), vst::quantize(z, e), logits, std::vector<int>{0}, c).commitment > 0.0);
  }
  SUBCASE("single token has no smoothness term") {
    nn::Tape t;
    const Tensor z = testing::random_tensor({1, 12}, 2);
    const auto logits = t.constant(Tensor({1, 3}, std::vector<double>{0, 0, 0}));
    CHECK(vst::vst_loss(t, t.constant(z), vst::quantize(z, testing::random_tensor({8, 12}, 4)), logits, std::vector<int>{0}, c)
              .smoothness == 0.0);
  }
}

TEST_CASE("straight-through gradient equals the identity-path gradient") {
  vst::VstModel model(small_config(), 8);
  const auto f = random_features(6, 8, 21);
  nn::ForwardContext ctx;
  auto params = model.parameters();
  // The upstream gradient must be the same in both runs: read the tokens out
  // linearly so it does not depend on the token values.
  const Tensor r = testing::random_tensor({4, 12}, 78);
  auto run = [&](bool quantized) {
    for (auto* p : params) p->zero_grad();
    nn::Tape t;
    nn::Var pooled = vst::pool_to_k(t, model.temporal_self_attention(t, f, ctx), 4);
    nn::Var z = model.project(t, pooled, ctx);
    nn::Var tokens =
        quantized ? nn::straight_through(t, z, vst::quantize(t.value(z), model.codebook.embeddings.value).rows) : z;
    t.backward(nn::sum(t, nn::matmul_nt(t, tokens, t.constant(r))));
    return Tensor(model.projection.weight.grad);
  };
  CHECK(run(true).identical(run(false)));
  for (double g : model.codebook.embeddings.grad.values()) CHECK(g == 0.0);
}

TEST_CASE("codebook EMA single step") {
  auto rng = nn::keyed_stream(1, {1});
  vst::Codebook cb(4, 3, rng);
  const Tensor before = cb.embeddings.value;
  const Tensor z = Tensor({1, 3}, std::vector<double>{1.0, -2.0, 0.5});
  const std::vector<int> ids{2};
  cb.ema_update(z, ids, 0.99, 1);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(cb.embeddings.value.at(2, k) == doctest::Approx(0.99 * before.at(2, k) + 0.01 * z.at(0, k)).epsilon(1e-14));
  }
  for (std::size_t r : {0u, 1u, 3u})
    for (std::size_t k = 0; k < 3; ++k) CHECK(cb.embeddings.value.at(r, k) == before.at(r, k));
  SUBCASE("count-normalized with two vectors") {
    const Tensor z2 = Tensor({2, 3}, std::vector<double>{1, 1, 1, 3, 3, 3});
    const std::vector<int> ids2{0, 0};
    const Tensor e0 = cb.embeddings.value;
    cb.ema_update(z2, ids2, 0.5, 2);
    // Row 0 went unused in the first step, so N = m / e = 0.99 going in.
    // N' = 0.5 * 0.99 + 0.5 * 2, m' = 0.5 * 0.99 * e0 + 0.5 * (1 + 3).
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(cb.embeddings.value.at(0, k) ==
            doctest::Approx((0.5 * 0.99 * e0.at(0, k) + 2.0) / (0.5 * 0.99 + 1.0)).epsilon(1e-14));
    }
  }
}

TEST_CASE("dead codebook rows are reseeded") {
  auto rng = nn::keyed_stream(2, {2});
  vst::Codebook cb(4, 2, rng);
  const Tensor recent = Tensor({2, 2}, std::vector<double>{9, 9, 8, 8});
  cb.ema_update(Tensor({1, 2}, std::vector<double>{0, 0}), std::vector<int>{1}, 0.99, 10);
  CHECK(cb.reseed_dead(recent, 4, 5, rng) == 0);
  CHECK(cb.reseed_dead(recent, 14, 5, rng) == 3);
  for (std::size_t r : {0u, 2u, 3u}) {
    const double v = cb.embeddings.value.at(r, 0);
    CHECK((v == 9.0 || v == 8.0));
  }
}

TEST_CASE("encode_video") {
  vst::VstModel model(small_config(), 5);
  const auto f = random_features(9, 8, 31);
  const auto a = model.encode_video(f);
  CHECK(a == model.encode_video(f));
  CHECK(a.ids.size() == 4);
  for (int id : a.ids) CHECK((id >= 0 && id < 8));
  CHECK(a.video_id == "vid");
}

TEST_CASE("vst forward gradients with the quantizer bypassed") {
  // Finite differences cannot see through the straight-through estimator, so
  // the encoder is checked on the continuous path.
  vst::VstConfig c = small_config();
  c.quantize = false;
  vst::VstModel model(c, 6);
  const auto f = random_features(7, 8, 41);
  nn::ForwardContext ctx;
  auto params = model.parameters();
  const auto r = nn::grad_check([&](nn::Tape& t) { return model.forward(t, f, 1, ctx).loss.total; }, params);
  CHECK(r.frozen_leak == false);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("vst config validation") {
  vst::VstConfig c;
  c.ema_decay = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.tokens_per_video = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.commitment = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("token lines round-trip") {
  const vst::SemanticTokenSeq s{{3, 0, 511, 7}, "S001C001P001A001_00000"};
  CHECK(vst::format_tokens(s) == "S001C001P001A001_00000\t3,0,511,7");
  CHECK(vst::parse_tokens(vst::format_tokens(s)) == s);
  CHECK_THROWS_AS(vst::parse_tokens("novalue"), DataError);
  CHECK_THROWS_AS(vst::parse_tokens("v\t1,x"), DataError);
}

TEST_CASE("batched pass matches per-video passes") {
  vst::VstModel model(small_config(), 9);
  std::vector<vst::FeatureSequence> videos;
  for (std::size_t m : {5u, 9u, 3u, 12u}) videos.push_back(random_features(m, 8, 50 + m));
  std::vector<const vst::FeatureSequence*> batch;
  for (const auto& v : videos) batch.push_back(&v);
  const Tensor stacked = model.embed(batch);
  for (std::size_t b = 0; b < videos.size(); ++b) {
    const Tensor single = model.embed(videos[b]);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t k = 0; k < 12; ++k) CHECK(stacked.at(b * 4 + i, k) == doctest::Approx(single.at(i, k)).epsilon(1e-12));
  }
  const auto seqs = model.encode_videos(batch);
  for (std::size_t b = 0; b < videos.size(); ++b) CHECK(seqs[b].ids == model.encode_video(videos[b]).ids);

  SUBCASE("batch loss is the mean of per-video losses") {
    const std::vector<int> labels{0, 2, 1, 2};
    nn::ForwardContext ctx;
    nn::Tape t(false);
    const double batch_loss = t.value(model.forward(t, batch, labels, ctx).loss.total).item();
    double mean = 0;
    for (std::size_t b = 0; b < videos.size(); ++b) {
      nn::Tape u(false);
      mean += u.value(model.forward(u, videos[b], labels[b], ctx).loss.total).item() / 4.0;
    }
    CHECK(batch_loss == doctest::Approx(mean).epsilon(1e-12));
  }
  SUBCASE("batched gradients") {
    auto c = small_config();
    c.quantize = false;
    vst::VstModel plain(c, 9);
    const std::vector<int> labels{0, 2, 1, 2};
    nn::ForwardContext ctx;
    auto params = plain.parameters();
    const auto r = nn::grad_check(
        [&](nn::Tape& t) { return plain.forward(t, batch, labels, ctx).loss.total; }, params);
    CHECK(r.max_rel_error < 1e-4);
  }
}
