#include <doctest.h>

#include <cmath>
#include <numeric>

#include "camel/model.hpp"
#include "camel/synthdata.hpp"

using namespace camel;

namespace {

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.image_size = 16;
  cfg.patch = 8;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 12;
  return cfg;
}

std::vector<Image> random_images(std::size_t n, std::size_t size, Rng& rng) {
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) {
    Image img(size, size, 3);
    for (auto& p : img.pixels()) p = rng.uniform();
    out.push_back(std::move(img));
  }
  return out;
}

Caption random_caption(std::size_t len, Rng& rng) {
  Caption c;
  const auto hi = static_cast<std::int64_t>(Vocabulary::standard().size()) - 1;
  for (std::size_t i = 0; i < len; ++i) c.tokens.push_back(static_cast<int>(rng.uniform_int(2, hi)));
  return c;
}

}  // namespace

TEST_CASE("embeddings have unit norm") {
  Rng rng(1);
  const auto cfg = small_config();
  const auto params = init_params(cfg, rng);
  const auto imgs = random_images(5, 16, rng);
  std::vector<TextInput> texts;
  for (int i = 0; i < 5; ++i) texts.push_back(TextInput::plain(random_caption(3 + i, rng)));
  for (const Tensor& e : {embed_images(params, cfg, imgs), embed_texts(params, cfg, texts)}) {
    REQUIRE(e.shape() == Shape{5, cfg.embed_dim});
    for (std::size_t r = 0; r < 5; ++r) {
      double n = 0.0;
      for (std::size_t c = 0; c < cfg.embed_dim; ++c) n += e.at(r, c) * e.at(r, c);
      CHECK(std::abs(n - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("trailing padding does not change text embeddings") {
  Rng rng(2);
  const auto cfg = small_config();
  const auto params = init_params(cfg, rng);
  for (int trial = 0; trial < 20; ++trial) {
    Caption c = random_caption(static_cast<std::size_t>(rng.uniform_int(1, 10)), rng);
    Caption padded = c;
    padded.tokens.resize(c.tokens.size() + static_cast<std::size_t>(rng.uniform_int(1, 20)), kPadId);
    const std::vector<TextInput> a{TextInput::plain(c)}, b{TextInput::plain(padded)};
    const Tensor ea = embed_texts(params, cfg, a), eb = embed_texts(params, cfg, b);
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) CHECK(std::abs(ea.at(0, j) - eb.at(0, j)) < 1e-10);
  }
}

TEST_CASE("contrastive loss is invariant to permuting the batch") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6, d = 5;
    std::vector<double> a(n * d), b(n * d);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    std::vector<int> ids(n);
    for (auto& i : ids) i = static_cast<int>(rng.uniform_int(0, 3));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<double> pa(n * d), pb(n * d);
    std::vector<int> pids(n);
    for (std::size_t i = 0; i < n; ++i) {
      pids[i] = ids[perm[i]];
      for (std::size_t j = 0; j < d; ++j) {
        pa[i * d + j] = a[perm[i] * d + j];
        pb[i * d + j] = b[perm[i] * d + j];
      }
    }
    Tape tape;
    const double l1 = itc_loss(normalize_rows(tape.constant(Tensor({n, d}, a))),
                               normalize_rows(tape.constant(Tensor({n, d}, b))), 0.07, ids)
                          .value()
                          .item();
    const double l2 = itc_loss(normalize_rows(tape.constant(Tensor({n, d}, pa))),
                               normalize_rows(tape.constant(Tensor({n, d}, pb))), 0.07, pids)
                          .value()
                          .item();
    CHECK(std::abs(l1 - l2) < 1e-12);
  }
}

TEST_CASE("perfectly aligned unique pairs drive the contrastive loss down") {
  Tape tape;
  const Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const std::vector<int> ids{0, 1, 2};
  const double aligned = itc_loss(tape.constant(eye), tape.constant(eye), 0.07, ids).value().item();
  const double uniform = std::log(3.0);
  CHECK(aligned < 0.01 * uniform);
}

TEST_CASE("binary cross entropy closed form") {
  Tape tape;
  const std::vector<double> labels{1.0, 0.0};
  const double got = bce_with_logits(tape.constant(Tensor({2, 1}, {0.0, 2.0})), labels).value().item();
  const double want = 0.5 * (std::log(2.0) + std::log1p(std::exp(2.0)));
  CHECK(std::abs(got - want) < 1e-12);
  CHECK_THROWS(bce_with_logits(tape.constant(Tensor({2, 1}, {0.0, 2.0})), std::vector<double>{1.0}));
}

TEST_CASE("configuration and input errors") {
  EncoderConfig bad = small_config();
  bad.patch = 5;
  CHECK_THROWS(bad.validate());
  bad = small_config();
  bad.temperature = 0.0;
  CHECK_THROWS(bad.validate());

  Rng rng(4);
  const auto cfg = small_config();
  const auto params = init_params(cfg, rng);
  const auto wrong = random_images(2, 32, rng);
  CHECK_THROWS(embed_images(params, cfg, wrong));
  Caption oov;
  oov.tokens = {999999};
  const std::vector<TextInput> texts{TextInput::plain(oov)};
  CHECK_THROWS(embed_texts(params, cfg, texts));
}

TEST_CASE("task loss feeds the memory only when asked") {
  Rng rng(5);
  const auto cfg = small_config();
  const auto params = init_params(cfg, rng);
  TaskBatch task;
  task.tag = TaskTag::T3;
  task.images = random_images(4, 16, rng);
  for (int i = 0; i < 4; ++i) {
    task.texts.push_back(TextInput::plain(random_caption(4, rng)));
    task.identities.push_back(i);
    task.lambdas.push_back(1.0);
  }
  MemoryUnit mem(8);
  {
    Tape tape;
    const auto bound = tape.bind(params);
    const auto out = task_loss(tape, bound, cfg, task, &mem);
    CHECK(std::isfinite(out.loss.value().item()));
    CHECK(mem.empty());
  }
  Tape tape;
  const auto bound = tape.bind(params);
  const auto out = task_loss(tape, bound, cfg, task, &mem, &mem);
  CHECK(mem.size() == 4);
  CHECK(std::abs(out.loss.value().item() - (out.itc + cfg.itm_weight * out.itm)) < 1e-12);
  const Tensor img = embed_images(params, cfg, task.images);
  for (std::size_t j = 0; j < cfg.embed_dim; ++j)
    CHECK(std::abs(mem.entries()[0].image_embedding[j] - img.at(0, j)) < 1e-12);
}
