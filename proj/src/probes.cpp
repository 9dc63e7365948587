#include "camel/probes.hpp"

#include <memory>

#include "camel/memory.hpp"

namespace camel {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// |x| in [0.2, 1] with a random sign, so relu is differentiable everywhere nearby.
Tensor off_kink(Shape shape, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(0.2, 1.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  return Tensor(std::move(shape), std::move(v));
}

/// Contracts any output with fixed pseudo-random weights so every element matters.
Var project(Var y, std::uint64_t salt) {
  Rng rng(salt);
  return sum(mul(y, y.tape().constant(random_tensor(y.shape(), rng))));
}

std::vector<Image> random_images(std::size_t n, const EncoderConfig& cfg, Rng& rng) {
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> px(cfg.image_size * cfg.image_size * cfg.channels);
    for (auto& p : px) p = rng.uniform();
    out.emplace_back(cfg.image_size, cfg.image_size, cfg.channels, std::move(px));
  }
  return out;
}

std::vector<TextInput> random_texts(std::size_t n, const EncoderConfig& cfg, Rng& rng) {
  const auto v = static_cast<std::int64_t>(cfg.resolved_vocab_size());
  auto caption = [&] {
    Caption c;
    const auto len = rng.uniform_int(3, 6);
    for (std::int64_t i = 0; i < len; ++i) c.tokens.push_back(static_cast<int>(rng.uniform_int(2, v - 1)));
    return c;
  };
  std::vector<TextInput> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 2 == 0) {
      out.push_back(TextInput::plain(caption()));
    } else {
      out.push_back({caption(), caption(), rng.uniform(0.1, 0.9)});
    }
  }
  return out;
}

std::vector<double> unit_vector(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double n = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

}  // namespace

EncoderConfig tiny_encoder_config() {
  EncoderConfig c;
  c.image_size = 8;
  c.patch = 4;
  c.embed_dim = 4;
  c.hidden_dim = 5;
  c.vocab_size = 12;
  c.negatives_per_pair = 2;
  return c;
}

std::vector<GradProbe> gradient_probes(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradProbe> probes;
  const std::uint64_t salt = seed * 1000003u;

  auto one = [&](std::string name, Tensor a, auto op) {
    ParamVector p;
    p.add("a", std::move(a));
    probes.push_back({std::move(name), [op, salt](Tape&, const ParamMap& m) { return project(op(m["a"]), salt); },
                      std::move(p)});
  };
  auto two = [&](std::string name, Tensor a, Tensor b, auto op) {
    ParamVector p;
    p.add("a", std::move(a));
    p.add("b", std::move(b));
    probes.push_back({std::move(name),
                      [op, salt](Tape&, const ParamMap& m) { return project(op(m["a"], m["b"]), salt); },
                      std::move(p)});
  };

  two("matmul", random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), [](Var a, Var b) { return matmul(a, b); });
  one("transpose", random_tensor({3, 4}, rng), [](Var a) { return transpose(a); });
  two("add", random_tensor({3, 4}, rng), random_tensor({3, 4}, rng), [](Var a, Var b) { return add(a, b); });
  two("sub", random_tensor({3, 4}, rng), random_tensor({3, 4}, rng), [](Var a, Var b) { return sub(a, b); });
  two("mul", random_tensor({3, 4}, rng), random_tensor({3, 4}, rng), [](Var a, Var b) { return mul(a, b); });
  one("scale", random_tensor({3, 4}, rng), [](Var a) { return scale(a, -1.7); });
  one("exp", random_tensor({3, 4}, rng), [](Var a) { return exp(a); });
  one("log", random_tensor({3, 4}, rng, 0.5, 2.0), [](Var a) { return log(a); });
  one("relu", off_kink({3, 4}, rng), [](Var a) { return relu(a); });
  one("tanh", random_tensor({3, 4}, rng, -2.0, 2.0), [](Var a) { return tanh(a); });
  one("softplus", random_tensor({3, 4}, rng, -3.0, 3.0), [](Var a) { return softplus(a); });
  for (auto [label, op] : {std::pair{"sum", Reduction::sum}, std::pair{"mean", Reduction::mean},
                           std::pair{"logsumexp", Reduction::logsumexp}}) {
    const Reduction r = op;
    one(std::string(label) + "(all)", random_tensor({3, 4}, rng), [r](Var a) { return reduce(r, a); });
    one(std::string(label) + "(axis 0)", random_tensor({3, 4}, rng), [r](Var a) { return reduce(r, a, 0); });
    one(std::string(label) + "(axis 1)", random_tensor({3, 4}, rng), [r](Var a) { return reduce(r, a, 1); });
  }
  one("normalize_rows", random_tensor({3, 4}, rng), [](Var a) { return normalize_rows(a); });
  one("tile_rows", random_tensor({1, 4}, rng), [](Var a) { return tile_rows(a, 3); });
  two("concat_cols", random_tensor({3, 2}, rng), random_tensor({3, 4}, rng), [](Var a, Var b) {
    const Var parts[] = {a, b, a};
    return concat_cols(parts);
  });
  two("concat_rows", random_tensor({2, 3}, rng), random_tensor({4, 3}, rng), [](Var a, Var b) {
    const Var parts[] = {b, a, b};
    return concat_rows(parts);
  });
  one("gather_rows", random_tensor({3, 4}, rng), [](Var a) {
    const std::size_t idx[] = {2, 0, 2, 1};
    return gather_rows(a, idx);
  });
  one("reshape", random_tensor({3, 4}, rng), [](Var a) { return reshape(a, {4, 3}); });
  two("itc_loss", random_tensor({4, 3}, rng), random_tensor({4, 3}, rng), [](Var a, Var b) {
    const int ids[] = {0, 1, 2, 0};
    return itc_loss(normalize_rows(a), normalize_rows(b), 0.5, ids);
  });
  {
    ParamVector p;
    p.add("z", random_tensor({6, 1}, rng, -3.0, 3.0));
    probes.push_back({"bce_with_logits",
                      [](Tape&, const ParamMap& m) {
                        const double y[] = {1, 0, 1, 1, 0, 0};
                        return bce_with_logits(m["z"], y);
                      },
                      std::move(p)});
  }

  const EncoderConfig cfg = tiny_encoder_config();
  Rng init_rng = rng.split(1);
  const ParamVector model = init_params(cfg, init_rng);
  auto images = std::make_shared<std::vector<Image>>(random_images(4, cfg, rng));
  auto texts = std::make_shared<std::vector<TextInput>>(random_texts(4, cfg, rng));

  probes.push_back({"encode_image",
                    [cfg, images, salt](Tape& t, const ParamMap& m) {
                      return project(encode_image(t, m, cfg, *images), salt);
                    },
                    model});
  probes.push_back({"encode_text",
                    [cfg, texts, salt](Tape& t, const ParamMap& m) {
                      return project(encode_text(t, m, cfg, *texts), salt);
                    },
                    model});
  probes.push_back({"itm_logits",
                    [cfg, images, texts, salt](Tape& t, const ParamMap& m) {
                      return project(itm_logits(m, encode_image(t, m, cfg, *images), encode_text(t, m, cfg, *texts)),
                                     salt);
                    },
                    model});

  auto memory = std::make_shared<MemoryUnit>(6);
  {
    std::vector<MemoryEntry> entries;
    for (int i = 0; i < 6; ++i) {
      entries.push_back({unit_vector(cfg.embed_dim, rng), unit_vector(cfg.embed_dim, rng), 10 + i % 3, 0});
    }
    memory->push_batch(std::move(entries));
  }
  auto ids = std::make_shared<std::vector<int>>(std::vector<int>{0, 1, 2, 0});
  probes.push_back({"itc+itm (full loss)",
                    [cfg, images, texts, memory, ids](Tape& t, const ParamMap& m) {
                      Var img = encode_image(t, m, cfg, *images);
                      Var txt = encode_text(t, m, cfg, *texts);
                      Var itc = itc_loss(img, txt, cfg.temperature, *ids);
                      Var itm = itm_loss(m, img, txt, *ids, memory.get(), cfg.negatives_per_pair);
                      return add(itc, scale(itm, cfg.itm_weight));
                    },
                    model});
  return probes;
}

}  // namespace camel
