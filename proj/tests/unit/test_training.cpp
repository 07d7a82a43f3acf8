// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "helpers.hpp"
#include "vstlm/numerics/error.hpp"
#include "vstlm/numerics/ops.hpp"
#include "vstlm/training/checkpoint.hpp"
#include "vstlm/training/finetune.hpp"
#include "vstlm/training/optim.hpp"
#include "vstlm/training/pipeline.hpp"
#include "vstlm/training/train_vst.hpp"

using namespace vstlm;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vstlm_test_training_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

train::PipelineConfig tiny_pipeline() {
  train::PipelineConfig c;
  c.data.classes = 3;
  c.data.samples_per_class = 12;
  c.data.feature_dim = 8;
  c.data.frames_min = 12;
  c.data.frames_max = 20;
  c.vst.embed_dim = 16;
  c.vst.heads = 2;
  c.vst.ffn_mult = 2;
  c.vst.layers = 1;
  c.vst.tokens_per_video = 4;
  c.vst.codebook_size = 16;
  c.vst_train.iterations = 30;
  c.vst_train.batch_size = 8;
  c.vst_train.micro_batch_size = 4;
  c.lm.layers = 1;
  c.lm.heads = 2;
  c.lm.context = 48;
  c.corpus.sentences = 50;
  c.pretrain.steps = 5;
  c.pretrain.batch = 4;
  c.lora_train.iterations = 40;
  c.instruction = "what action";
  c.resolve();
  return c;
}

struct Tiny {
  train::PipelineConfig config = tiny_pipeline();
  std::vector<data::ActionSample> samples = data::generate_synthetic(config.data);
  vst::VstModel vst = train::train_vst(samples, config.vst, config.vst_train);
  train::LmBundle base = train::pretrained_base(config);
};

Tiny& tiny() {
  static Tiny t;
  return t;
}

// Adapter-ready copy of the tiny base with the codebook installed.
train::LmBundle adapter_ready(Tiny& t) {
  train::LmBundle b = t.base;
  b.model.install_semantic_embeddings(t.vst.codebook.embeddings.value, b.vocab);
  b.model.freeze_base();
  const auto linears = b.model.linears();
  lora::attach_adapters(linears, t.config.lora, t.config.lora_train.seed);
  b.lora = t.config.lora;
  return b;
}

}  // namespace

TEST_CASE("cosine schedule") {
  CHECK(train::cosine_lr(0, 100, 0.1, 0.01) == 0.1);
  CHECK(train::cosine_lr(100, 100, 0.1, 0.01) == 0.01);
  CHECK(train::cosine_lr(150, 100, 0.1, 0.01) == 0.01);
  CHECK(train::cosine_lr(50, 100, 0.1, 0.01) == doctest::Approx(0.055).epsilon(1e-15));
  double prev = std::numeric_limits<double>::infinity();
  for (std::int64_t t = 0; t <= 1000; ++t) {
    const double lr = train::cosine_lr(t, 1000, 3e-3, 0.0);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK_THROWS_AS(train::cosine_lr(0, 0, 0.1), ConfigError);
}

TEST_CASE("AdamW closed forms") {
  train::AdamWConfig no_wd;
  no_wd.weight_decay = 0.0;
  SUBCASE("first step with unit gradient moves by -lr") {
    nn::Parameter p("w", Tensor({1}, std::vector<double>{0.5}));
    train::AdamW opt({&p}, no_wd);
    p.grad[0] = 1.0;
    opt.step(0.01);
    CHECK(p.value[0] == doctest::Approx(0.5 - 0.01 / (1.0 + 1e-8)).epsilon(1e-15));
  }
  SUBCASE("zero gradient without decay changes nothing") {
    nn::Parameter p("w", testing::random_tensor({3, 3}, 1));
    const Tensor before = p.value;
    train::AdamW opt({&p}, no_wd);
    for (int i = 0; i < 5; ++i) opt.step(0.1);
    CHECK(p.value.identical(before));
  }
  SUBCASE("decoupled decay: theta 1, lr 0.1, wd 0.01 -> 0.999") {
    nn::Parameter p("w", Tensor({1}, std::vector<double>{1.0}));
    train::AdamW opt({&p}, train::AdamWConfig{});
    opt.step(0.1);
    CHECK(p.value[0] == doctest::Approx(0.999).epsilon(1e-15));
  }
  SUBCASE("biases, gains and codebooks are not decayed") {
    nn::Parameter b("b", Tensor({2}, 1.0), nn::ParamRole::kBias);
    nn::Parameter g("g", Tensor({2}, 1.0), nn::ParamRole::kGain);
    nn::Parameter c("c", Tensor({2}, 1.0), nn::ParamRole::kCodebook, false);
    train::AdamW opt({&b, &g, &c}, train::AdamWConfig{});
    opt.step(0.1);
    CHECK(b.value[0] == 1.0);
    CHECK(g.value[0] == 1.0);
    CHECK(c.value[0] == 1.0);
  }
  SUBCASE("frozen parameters are skipped") {
    nn::Parameter p("w", Tensor({1}, 1.0), nn::ParamRole::kWeight, false);
    train::AdamW opt({&p}, train::AdamWConfig{});
    CHECK(opt.parameters().empty());
  }
  SUBCASE("non-finite gradient names the parameter") {
    nn::Parameter p("layer.weight", Tensor({2}, 1.0));
    train::AdamW opt({&p}, train::AdamWConfig{});
    p.grad[1] = std::nan("");
    try {
      opt.step(0.1);
      FAIL("no error");
    } catch (const DivergenceError& e) {
      CHECK(std::string(e.what()).find("layer.weight") != std::string::npos);
    }
    CHECK(p.value[0] == 1.0);
  }
}

TEST_CASE("AdamW matches a hand-stepped two-iteration oracle") {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.05;
  const std::vector<double> theta0{0.3, -1.2, 2.0};
  const std::vector<double> g1{0.5, -0.25, 1.5};
  const std::vector<double> g2{-0.1, 0.75, 0.2};
  std::vector<double> expect(3);
  for (std::size_t i = 0; i < 3; ++i) {
    // Step 1.
    double m = (1 - b1) * g1[i];
    double v = (1 - b2) * g1[i] * g1[i];
    double th = theta0[i] - lr * (m / (1 - b1)) / (std::sqrt(v / (1 - b2)) + eps);
    // Step 2.
    m = b1 * m + (1 - b1) * g2[i];
    v = b2 * v + (1 - b2) * g2[i] * g2[i];
    th -= lr * (m / (1 - b1 * b1)) / (std::sqrt(v / (1 - b2 * b2)) + eps);
    expect[i] = th;
  }
  nn::Parameter p("w", Tensor({3}, theta0));
  train::AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  train::AdamW opt({&p}, cfg);
  p.grad = Tensor({3}, g1);
  opt.step(lr);
  p.grad = Tensor({3}, g2);
  opt.step(lr);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p.value[i] - expect[i]) <= 1e-12);
}

namespace {

// Mean squared error of a linear model over samples [begin, end).
struct Toy {
  Tensor x = testing::random_tensor({64, 5}, 50);
  Tensor y = testing::random_tensor({64, 2}, 51);
  nn::Parameter w{"w", testing::random_tensor({5, 2}, 52)};
  nn::Parameter b{"b", testing::random_tensor({2}, 53), nn::ParamRole::kBias};

  double micro(std::size_t begin, std::size_t end, double weight) {
    Tensor xs({end - begin, 5}), ys({end - begin, 2});
    std::copy(x.data() + begin * 5, x.data() + end * 5, xs.data());
    std::copy(y.data() + begin * 2, y.data() + end * 2, ys.data());
    nn::Tape t;
    const nn::Var loss = nn::mean_squared_error(t, nn::affine(t, t.constant(xs), t.parameter(w), t.parameter(b)), ys);
    t.backward(nn::scale(t, loss, weight));
    return t.value(loss).item();
  }

  std::pair<Tensor, Tensor> gradients(std::size_t batch, std::size_t micro_size) {
    w.zero_grad();
    b.zero_grad();
    const auto acc = train::accumulate_gradients(
        batch, micro_size, [&](std::size_t s, std::size_t e, double wt) { return micro(s, e, wt); });
    CHECK(acc.micro_steps == batch / micro_size);
    return {w.grad, b.grad};
  }
};

double max_diff(const Tensor& a, const Tensor& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("gradient accumulation equals the full-batch gradient") {
  Toy toy;
  SUBCASE("16-sample toy problem, micro-batch 4") {
    const auto full = toy.gradients(16, 16);
    const auto acc = toy.gradients(16, 4);
    CHECK(max_diff(full.first, acc.first) <= 1e-10);
    CHECK(max_diff(full.second, acc.second) <= 1e-10);
  }
  SUBCASE("batch 64, micro-batch 4") {
    const auto full = toy.gradients(64, 64);
    const auto acc = toy.gradients(64, 4);
    CHECK(max_diff(full.first, acc.first) <= 1e-10);
  }
  SUBCASE("one micro-batch is the full batch, bitwise") {
    const auto a = toy.gradients(16, 16);
    const auto b = toy.gradients(16, 16);
    CHECK(a.first.identical(b.first));
  }
  SUBCASE("batch 256, micro 4 takes 64 micro-steps") {
    std::size_t calls = 0;
    const auto acc = train::accumulate_gradients(256, 4, [&](std::size_t, std::size_t, double w) {
      CHECK(w == 4.0 / 256.0);
      ++calls;
      return 1.0;
    });
    CHECK(calls == 64);
    CHECK(acc.micro_steps == 64);
    CHECK(acc.loss == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(train::accumulate_gradients(10, 4, [](std::size_t, std::size_t, double) { return 0.0; }),
                  ConfigError);
}

TEST_CASE("train config validation and defaults") {
  auto v = train::TrainConfig::vst_defaults();
  CHECK(v.iterations == 5000);
  CHECK(v.lr == 2e-4);
  CHECK(v.lr_min == 0.0);
  CHECK(v.adam.weight_decay == 0.01);
  auto l = train::TrainConfig::lora_defaults();
  CHECK(l.iterations == 2000);
  CHECK(l.lr == 3e-3);
  CHECK(l.micro_batch_size == 4);
  CHECK_NOTHROW(l.validate());
  l.batch_size = 6;
  CHECK_THROWS_AS(l.validate(), ConfigError);
  l.batch_size = 8;
  l.iterations = 0;
  CHECK_THROWS_AS(l.validate(), ConfigError);
  CHECK(train::format_log({12, 0.5, 0.001, 0.25}) == "12\t0.500000\t0.001\t0.2500");
}

TEST_CASE("checkpoint files") {
  const auto dir = scratch("ckpt");
  train::Checkpoint c;
  c.metadata["stage"] = "vst";
  c.metadata["note"] = "a b";
  c.put("x", testing::random_tensor({3, 4}, 1));
  c.put("s", Tensor::scalar(2.5));
  train::save_checkpoint(dir / "a.ckpt", c);
  const auto back = train::load_checkpoint(dir / "a.ckpt");
  CHECK(back.metadata == c.metadata);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.require("x").identical(c.require("x")));
  CHECK(back.require("s").item() == 2.5);
  CHECK_THROWS_AS(back.require("missing"), DataError);

  std::ifstream in(dir / "a.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  CHECK(bytes.substr(0, 6) == "VSTLM1");
  SUBCASE("same content, same bytes") {
    train::save_checkpoint(dir / "b.ckpt", c);
    std::ifstream in2(dir / "b.ckpt", std::ios::binary);
    CHECK(std::string((std::istreambuf_iterator<char>(in2)), {}) == bytes);
  }
  SUBCASE("bad magic") {
    std::ofstream(dir / "bad.ckpt", std::ios::binary) << "NOTIT!" << bytes.substr(6);
    CHECK_THROWS_AS(train::load_checkpoint(dir / "bad.ckpt"), DataError);
  }
  SUBCASE("truncated") {
    std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
    CHECK_THROWS_AS(train::load_checkpoint(dir / "short.ckpt"), DataError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(train::load_checkpoint(dir / "none.ckpt"), DataError); }
}

TEST_CASE("VST training is seeded and resumable") {
  auto cfg = tiny_pipeline();
  const auto samples = data::generate_synthetic(cfg.data);
  auto losses = [&](vst::VstModel& m, train::VstTrainer& tr, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(tr.step());
    (void)m;
    return out;
  };
  vst::VstModel a(cfg.vst, 1), b(cfg.vst, 1);
  train::VstTrainer ta(a, samples, cfg.vst_train), tb(b, samples, cfg.vst_train);
  const auto la = losses(a, ta, 20);
  CHECK(la == losses(b, tb, 20));
  CHECK(la.back() < la.front());

  SUBCASE("resume reproduces the next 10 losses bitwise") {
    vst::VstModel c(cfg.vst, 1);
    train::VstTrainer tc(c, samples, cfg.vst_train);
    (void)losses(c, tc, 10);
    const auto dir = scratch("vst_resume");
    train::save_checkpoint(dir / "vst.ckpt", tc.checkpoint());
    const auto expect = losses(c, tc, 10);

    vst::VstModel d(cfg.vst, 999);
    train::VstTrainer td(d, samples, cfg.vst_train);
    td.restore(train::load_checkpoint(dir / "vst.ckpt"));
    CHECK(td.steps_done() == 10);
    CHECK(losses(d, td, 10) == expect);
  }
  SUBCASE("load_vst restores an identical tokenizer") {
    auto ckpt = train::vst_checkpoint(a);
    auto back = train::load_vst(ckpt);
    CHECK(back.encode_video(samples[0].features) == a.encode_video(samples[0].features));
    CHECK(back.embed(samples[3].features).identical(a.embed(samples[3].features)));
  }
  SUBCASE("runaway learning rate is reported as divergence") {
    auto hot = cfg.vst_train;
    hot.lr = 1e200;
    hot.lr_min = 1e200;
    vst::VstModel e(cfg.vst, 1);
    train::VstTrainer te(e, samples, hot);
    CHECK_THROWS_AS(
        [&] {
          for (int i = 0; i < 20; ++i) te.step();
        }(),
        DivergenceError);
  }
  SUBCASE("non-finite features are rejected up front") {
    auto bad = samples;
    bad[0].features.features[0] = std::nan("");
    vst::VstModel e(cfg.vst, 1);
    CHECK_THROWS_AS(train::VstTrainer(e, bad, cfg.vst_train), DataError);
  }
}

TEST_CASE("LoRA fine-tuning") {
  auto& t = tiny();
  const auto examples = train::make_examples(t.base.vocab, t.vst, t.samples, t.config.instruction,
                                             t.base.model.config().context, train::Variant::kFull);
  REQUIRE(examples.size() == t.samples.size());

  SUBCASE("only adapters change and the loss falls") {
    auto b = adapter_ready(t);
    std::vector<Tensor> frozen;
    for (auto* p : b.model.base_parameters()) frozen.push_back(p->value);
    train::LoraTrainer trainer(b.model, examples, t.config.lora_train);
    std::vector<double> losses;
    for (int i = 0; i < 40; ++i) losses.push_back(trainer.step());
    const auto base_params = b.model.base_parameters();
    for (std::size_t i = 0; i < base_params.size(); ++i) CHECK(base_params[i]->value.identical(frozen[i]));
    double first = 0, last = 0;
    for (int i = 0; i < 5; ++i) first += losses[i], last += losses[35 + i];
    CHECK(last < first);
    bool moved = false;
    for (auto* p : train::adapter_parameters(b.model)) {
      for (double v : p->value.values()) moved = moved || v != 0.0;
    }
    CHECK(moved);
  }
  SUBCASE("step 0 equals the frozen base") {
    auto b = adapter_ready(t);
    auto plain = t.base;
    plain.model.install_semantic_embeddings(t.vst.codebook.embeddings.value, plain.vocab);
    for (std::size_t i = 0; i < 10; ++i) {
      lm::Prompt p;
      p.ids.assign(examples[i].ids.begin(), examples[i].ids.begin() + examples[i].answer_position + 1);
      CHECK(lm::class_logits(b.model, b.vocab, p) == lm::class_logits(plain.model, plain.vocab, p));
    }
  }
  SUBCASE("seeded runs repeat and resume bitwise") {
    auto b1 = adapter_ready(t);
    auto b2 = adapter_ready(t);
    train::LoraTrainer t1(b1.model, examples, t.config.lora_train);
    train::LoraTrainer t2(b2.model, examples, t.config.lora_train);
    std::vector<double> l1, l2;
    for (int i = 0; i < 10; ++i) l1.push_back(t1.step()), l2.push_back(t2.step());
    CHECK(l1 == l2);

    const auto dir = scratch("lora_resume");
    train::save_checkpoint(dir / "lm.ckpt", t1.checkpoint(train::lm_checkpoint(b1)));
    std::vector<double> expect;
    for (int i = 0; i < 10; ++i) expect.push_back(t1.step());

    const auto ckpt = train::load_checkpoint(dir / "lm.ckpt");
    auto b3 = train::load_lm(ckpt);
    REQUIRE(b3.lora.has_value());
    train::LoraTrainer t3(b3.model, examples, t.config.lora_train);
    t3.restore(ckpt);
    std::vector<double> got;
    for (int i = 0; i < 10; ++i) got.push_back(t3.step());
    CHECK(got == expect);
  }
  SUBCASE("an unfrozen base is refused") {
    auto b = t.base;
    CHECK_THROWS_AS(train::LoraTrainer(b.model, examples, t.config.lora_train), ConfigError);
  }
}

TEST_CASE("LM checkpoints round-trip") {
  auto& t = tiny();
  auto b = adapter_ready(t);
  for (auto* p : train::adapter_parameters(b.model)) p->value = testing::random_tensor(p->value.shape(), 7, 0.1);
  const auto back = train::load_lm(train::lm_checkpoint(b));
  CHECK(back.vocab.word_list() == b.vocab.word_list());
  CHECK(back.vocab.size() == b.vocab.size());
  auto copy = back;
  const std::vector<int> ids{1, 5, 6, 2, 3};
  nn::Tape t1(false), t2(false);
  CHECK(t1.value(copy.model.forward(t1, ids, nn::ForwardContext{}))
            .identical(t2.value(b.model.forward(t2, ids, nn::ForwardContext{}))));
  for (auto* p : copy.model.base_parameters()) CHECK_FALSE(p->trainable);
}

TEST_CASE("pipeline config and examples") {
  auto& t = tiny();
  CHECK(t.config.vst.feature_dim == t.config.data.feature_dim);
  CHECK(t.config.vst.classes == t.config.data.classes);
  CHECK(t.config.lm.embed_dim == t.config.vst.embed_dim);
  CHECK(t.config.lm.vocab_size == t.base.vocab.size());
  const auto direct = train::make_examples(t.base.vocab, t.vst, std::span(t.samples).first(5), t.config.instruction,
                                           48, train::Variant::kDirect);
  std::vector<const vst::FeatureSequence*> videos;
  for (std::size_t i = 0; i < 5; ++i) videos.push_back(&t.samples[i].features);
  const Tensor z = t.vst.embed(videos);
  const std::size_t k = t.config.vst.tokens_per_video;
  for (std::size_t i = 0; i < direct.size(); ++i) {
    REQUIRE(direct[i].semantic_rows.rows() == k);
    const auto* row = z.data() + i * k * z.cols();
    CHECK(std::equal(row, row + k * z.cols(), direct[i].semantic_rows.data()));
    // Batched and single-video encodings agree to rounding.
    const Tensor single = t.vst.embed(t.samples[i].features);
    for (std::size_t j = 0; j < single.size(); ++j) CHECK(std::abs(single[j] - direct[i].semantic_rows[j]) <= 1e-12);
  }
  auto zero = train::adapt(t.base, t.vst, t.samples, t.config, train::Variant::kZeroShot);
  CHECK_FALSE(zero.lora.has_value());
  CHECK(train::adapter_parameters(zero.model).empty());
}
