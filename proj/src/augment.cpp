#include "camel/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace camel {

namespace {

double sample_clamped(const Image& img, double y, double x, std::size_t c) {
  const double maxy = static_cast<double>(img.height() - 1), maxx = static_cast<double>(img.width() - 1);
  y = std::clamp(y, 0.0, maxy);
  x = std::clamp(x, 0.0, maxx);
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
  const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  const double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
  const double bot = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
  return top * (1.0 - fy) + bot * fy;
}

}  // namespace

// ---- Dynamic illumination ---------------------------------------------------

IlluminationParams sample_illumination(const IlluminationConfig& cfg, Rng& rng) {
  IlluminationParams p;
  p.brightness = rng.uniform(cfg.brightness_min, cfg.brightness_max);
  p.contrast = rng.uniform(cfg.contrast_min, cfg.contrast_max);
  if (rng.bernoulli(cfg.rotate_prob)) {
    p.rotation_degrees = rng.uniform(-cfg.max_rotation_degrees, cfg.max_rotation_degrees);
  }
  if (rng.bernoulli(cfg.crop_prob)) {
    const double side = std::sqrt(rng.uniform(cfg.min_crop_area, 1.0));
    CropBox box;
    box.height = box.width = side;
    box.top = rng.uniform(0.0, 1.0 - side);
    box.left = rng.uniform(0.0, 1.0 - side);
    p.crop = box;
  }
  return p;
}

Image apply_illumination(const Image& img, const IlluminationParams& p) {
  Image out = img;
  // c * (b * v - 0.5) + 0.5, arranged so b = c = 1 is an exact identity
  const double gain = p.contrast * p.brightness;
  const double offset = 0.5 * (1.0 - p.contrast);
  for (auto& v : out.pixels()) v = gain * v + offset;
  if (p.rotation_degrees) out = rotate_bilinear(out, *p.rotation_degrees);
  if (p.crop) out = crop_resize_bilinear(out, *p.crop);
  out.clamp01();
  return out;
}

Image dynamic_illumination(const Image& img, Rng& rng, const IlluminationConfig& cfg) {
  return apply_illumination(img, sample_illumination(cfg, rng));
}

Image rotate_bilinear(const Image& img, double degrees) {
  Image out(img.height(), img.width(), img.channels());
  const double th = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double cy = (static_cast<double>(img.height()) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width()) - 1.0) / 2.0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      // inverse rotation maps the output pixel back into the source
      const double sy = cy + cs * dy - sn * dx;
      const double sx = cx + sn * dy + cs * dx;
      for (std::size_t c = 0; c < img.channels(); ++c) out.at(y, x, c) = sample_clamped(img, sy, sx, c);
    }
  return out;
}

Image crop_resize_bilinear(const Image& img, const CropBox& box) {
  Image out(img.height(), img.width(), img.channels());
  const double H = static_cast<double>(img.height()), W = static_cast<double>(img.width());
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double sy = box.top * H + (static_cast<double>(y) + 0.5) * box.height - 0.5;
      const double sx = box.left * W + (static_cast<double>(x) + 0.5) * box.width - 0.5;
      for (std::size_t c = 0; c < img.channels(); ++c) out.at(y, x, c) = sample_clamped(img, sy, sx, c);
    }
  return out;
}

// ---- Gaussian blur ----------------------------------------------------------

BlurConfig BlurConfig::for_sigma(double sigma) {
  BlurConfig cfg{sigma, static_cast<int>(std::ceil(3.0 * sigma))};
  cfg.validate();
  return cfg;
}

void BlurConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("blur sigma must be positive");
  if (radius < 1 || radius < static_cast<int>(std::ceil(2.0 * sigma))) {
    throw std::invalid_argument("blur radius " + std::to_string(radius) + " must be at least ceil(2 sigma) = " +
                                std::to_string(static_cast<int>(std::ceil(2.0 * sigma))));
  }
}

Tensor gaussian_kernel(const BlurConfig& cfg) {
  cfg.validate();
  const int r = cfg.radius;
  const std::size_t n = static_cast<std::size_t>(2 * r + 1);
  std::vector<double> k(n * n);
  double total = 0.0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * cfg.sigma * cfg.sigma));
      k[static_cast<std::size_t>(y + r) * n + static_cast<std::size_t>(x + r)] = v;
      total += v;
    }
  for (auto& v : k) v /= total;
  return Tensor({n, n}, std::move(k));
}

Image gaussian_blur(const Image& img, const BlurConfig& cfg) {
  const Tensor k = gaussian_kernel(cfg);
  const long r = cfg.radius;
  const long H = static_cast<long>(img.height()), W = static_cast<long>(img.width());
  const std::size_t n = k.cols();
  Image out(img.height(), img.width(), img.channels());
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x)
      for (std::size_t c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (long dy = -r; dy <= r; ++dy) {
          const auto sy = static_cast<std::size_t>(std::clamp(y + dy, 0L, H - 1));
          for (long dx = -r; dx <= r; ++dx) {
            const auto sx = static_cast<std::size_t>(std::clamp(x + dx, 0L, W - 1));
            acc += k[static_cast<std::size_t>(dy + r) * n + static_cast<std::size_t>(dx + r)] * img.at(sy, sx, c);
          }
        }
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = acc;
      }
  out.clamp01();
  return out;
}

// ---- Text augmentation ------------------------------------------------------

TracedCaption text_augment_traced(const Caption& cap, Rng& rng, const Vocabulary& vocab,
                                  const TextAugmentConfig& cfg) {
  TracedCaption out{cap, {}};
  const std::size_t n = cap.tokens.size();
  out.origin.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.origin[i] = static_cast<int>(i);
  if (n == 0) return out;

  auto& tok = out.caption.tokens;
  auto& org = out.origin;

  for (auto& t : tok) {
    if (!rng.bernoulli(cfg.replace_prob)) continue;
    auto group = vocab.synonyms(t);
    if (group.size() < 2) continue;
    auto pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(group.size()) - 2));
    // skip over the token itself so the replacement is always a sibling
    std::size_t seen = 0;
    for (int g : group) {
      if (g == t) continue;
      if (seen++ == pick) {
        t = g;
        break;
      }
    }
  }

  for (std::size_t i = 0; i + 1 < tok.size(); ++i) {
    if (rng.bernoulli(cfg.swap_prob)) {
      std::swap(tok[i], tok[i + 1]);
      std::swap(org[i], org[i + 1]);
    }
  }

  std::vector<int> kept_tok, kept_org;
  for (std::size_t i = 0; i < tok.size(); ++i) {
    if (rng.bernoulli(cfg.delete_prob)) continue;
    kept_tok.push_back(tok[i]);
    kept_org.push_back(org[i]);
  }

  tok.clear();
  org.clear();
  const auto vocab_hi = static_cast<std::int64_t>(vocab.size()) - 1;
  for (std::size_t i = 0; i < kept_tok.size(); ++i) {
    tok.push_back(kept_tok[i]);
    org.push_back(kept_org[i]);
    if (rng.bernoulli(cfg.insert_prob) && vocab_hi >= 2) {
      tok.push_back(static_cast<int>(rng.uniform_int(2, vocab_hi)));
      org.push_back(-1);
    }
  }
  if (tok.size() > kMaxCaptionLength) {
    tok.resize(kMaxCaptionLength);
    org.resize(kMaxCaptionLength);
  }
  return out;
}

Caption text_augment(const Caption& cap, Rng& rng, const Vocabulary& vocab, const TextAugmentConfig& cfg) {
  return text_augment_traced(cap, rng, vocab, cfg).caption;
}

// ---- Mixup ------------------------------------------------------------------

void MixupConfig::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("mixup delta must be positive");
}

double sample_lambda(const MixupConfig& cfg, Rng& rng) {
  cfg.validate();
  const double x = rng.gamma(cfg.delta);
  const double y = rng.gamma(cfg.delta);
  if (x + y == 0.0) return 0.5;  // both underflowed; only reachable for tiny delta
  return x / (x + y);
}

Image mixup_images(const Image& a, const Image& b, double lambda) {
  if (!a.same_shape(b)) throw DimensionError("mixup_images: image shapes differ");
  Image out = a;
  const auto& pb = b.pixels();
  auto& po = out.pixels();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = lambda * po[i] + (1.0 - lambda) * pb[i];
  return out;
}

namespace {

int token_or_pad(const Caption& c, std::size_t p) {
  return p < c.tokens.size() ? c.tokens[p] : kPadId;
}

}  // namespace

Tensor mixup_captions(const Caption& a, const Caption& b, double lambda, const Tensor& table) {
  if (table.rank() != 2) throw DimensionError("mixup_captions: embedding table must be a matrix");
  const std::size_t len = std::max<std::size_t>({a.tokens.size(), b.tokens.size(), 1});
  const std::size_t d = table.cols();
  std::vector<double> out(len * d);
  for (std::size_t p = 0; p < len; ++p) {
    const auto ta = static_cast<std::size_t>(token_or_pad(a, p));
    const auto tb = static_cast<std::size_t>(token_or_pad(b, p));
    if (ta >= table.rows() || tb >= table.rows()) throw DimensionError("mixup_captions: token id outside table");
    for (std::size_t j = 0; j < d; ++j) out[p * d + j] = lambda * table.at(ta, j) + (1.0 - lambda) * table.at(tb, j);
  }
  return Tensor({len, d}, std::move(out));
}

std::vector<double> mixed_pool_weights(const Caption& a, const Caption& b, double lambda) {
  const std::size_t len = std::max(a.tokens.size(), b.tokens.size());
  std::vector<double> w(len);
  for (std::size_t p = 0; p < len; ++p) {
    const double ma = token_or_pad(a, p) != kPadId ? 1.0 : 0.0;
    const double mb = token_or_pad(b, p) != kPadId ? 1.0 : 0.0;
    w[p] = lambda * ma + (1.0 - lambda) * mb;
  }
  return w;
}

std::vector<double> pooling_coefficients(const TextInput& text, std::size_t vocab_size) {
  const auto w = mixed_pool_weights(text.first, text.second, text.lambda);
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) throw ContractError("caption has no non-[PAD] tokens");
  std::vector<double> coef(vocab_size, 0.0);
  for (std::size_t p = 0; p < w.size(); ++p) {
    if (w[p] == 0.0) continue;
    const auto ta = static_cast<std::size_t>(token_or_pad(text.first, p));
    const auto tb = static_cast<std::size_t>(token_or_pad(text.second, p));
    if (ta >= vocab_size || tb >= vocab_size) throw DimensionError("token id outside vocabulary");
    coef[ta] += w[p] * text.lambda / total;
    coef[tb] += w[p] * (1.0 - text.lambda) / total;
  }
  return coef;
}

// ---- Task assembly ----------------------------------------------------------

const char* task_tag_name(TaskTag t) {
  switch (t) {
    case TaskTag::T1: return "T1";
    case TaskTag::T2: return "T2";
    case TaskTag::T3: return "T3";
  }
  return "?";
}

std::array<TaskBatch, 3> build_tasks(std::span<const RawPair> batch, Rng& rng, const Vocabulary& vocab,
                                     const StylizeConfig& cfg) {
  if (batch.empty()) throw ContractError("build_tasks: empty batch");
  cfg.mixup.validate();
  std::array<TaskBatch, 3> tasks;
  tasks[0].tag = TaskTag::T1;
  tasks[1].tag = TaskTag::T2;
  tasks[2].tag = TaskTag::T3;

  for (const auto& pair : batch) {
    Image lit = dynamic_illumination(pair.image, rng, cfg.illumination);
    const double sigma = cfg.blur_sigma_min == cfg.blur_sigma_max
                             ? cfg.blur_sigma_min
                             : rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
    Image blurred = gaussian_blur(pair.image, BlurConfig::for_sigma(sigma));
    Caption ca = text_augment(pair.caption, rng, vocab, cfg.text);
    Caption cb = text_augment(pair.caption, rng, vocab, cfg.text);
    if (ca.tokens.empty()) ca = pair.caption;
    if (cb.tokens.empty()) cb = pair.caption;
    const double lambda = sample_lambda(cfg.mixup, rng);
    Image mixed = mixup_images(lit, blurred, lambda);
    const TextInput text{std::move(ca), std::move(cb), lambda};

    tasks[0].images.push_back(std::move(lit));
    tasks[1].images.push_back(std::move(blurred));
    tasks[2].images.push_back(std::move(mixed));
    for (auto& t : tasks) {
      t.texts.push_back(text);
      t.identities.push_back(pair.identity);
      t.lambdas.push_back(lambda);
    }
  }
  return tasks;
}

TaskBatch plain_task(std::span<const RawPair> batch, TaskTag tag) {
  if (batch.empty()) throw ContractError("plain_task: empty batch");
  TaskBatch t;
  t.tag = tag;
  t.stylized = false;
  for (const auto& p : batch) {
    t.images.push_back(p.image);
    t.texts.push_back(TextInput::plain(p.caption));
    t.identities.push_back(p.identity);
    t.lambdas.push_back(1.0);
  }
  return t;
}

}  // namespace camel
