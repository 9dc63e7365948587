#include "camel/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "camel/synthdata.hpp"

namespace camel {

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return Tensor({rows, cols}, std::move(v));
}

Var dense(const ParamMap& p, const std::string& prefix, Var x) {
  Var w = p[prefix + "_w"];
  Var b = p[prefix + "_b"];
  return add(matmul(x, w), tile_rows(b, x.value().rows()));
}

ParamMap bind_constants(Tape& tape, const ParamVector& params) {
  ParamMap map;
  for (const auto& [name, t] : params.entries()) map.insert(name, tape.constant(t));
  return map;
}

}  // namespace

std::size_t EncoderConfig::resolved_vocab_size() const {
  return vocab_size ? vocab_size : Vocabulary::standard().size();
}

void EncoderConfig::validate() const {
  if (embed_dim == 0 || hidden_dim == 0 || patch == 0 || image_size == 0 || channels == 0) {
    throw std::invalid_argument("encoder dimensions must be positive");
  }
  if (resolved_vocab_size() < 2) throw std::invalid_argument("vocabulary must hold at least [UNK] and [PAD]");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (image_size % patch != 0) {
    throw std::invalid_argument("image size " + std::to_string(image_size) + " is not divisible by patch size " +
                                std::to_string(patch));
  }
}

std::string EncoderConfig::shape_signature() const {
  std::ostringstream os;
  os << "image_size=" << image_size << ";channels=" << channels << ";patch=" << patch << ";embed_dim=" << embed_dim
     << ";hidden_dim=" << hidden_dim << ";vocab_size=" << resolved_vocab_size();
  return os.str();
}

ParamVector init_params(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t pd = cfg.patch_dim(), h = cfg.hidden_dim, d = cfg.embed_dim, v = cfg.resolved_vocab_size();
  auto fan = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
  ParamVector p;
  p.add("image.l1_w", random_matrix(pd, h, fan(pd), rng));
  p.add("image.l1_b", Tensor::zeros({h}));
  p.add("image.l2_w", random_matrix(h, h, fan(h), rng));
  p.add("image.l2_b", Tensor::zeros({h}));
  p.add("image.proj_w", random_matrix(h, d, fan(h), rng));
  p.add("image.proj_b", Tensor::zeros({d}));
  p.add("text.embed", random_matrix(v, h, 0.5, rng));
  p.add("text.l1_w", random_matrix(h, h, fan(h), rng));
  p.add("text.l1_b", Tensor::zeros({h}));
  p.add("text.l2_w", random_matrix(h, d, fan(h), rng));
  p.add("text.l2_b", Tensor::zeros({d}));
  p.add("cross.l1_w", random_matrix(3 * d, h, fan(3 * d), rng));
  p.add("cross.l1_b", Tensor::zeros({h}));
  p.add("cross.l2_w", random_matrix(h, 1, fan(h), rng));
  p.add("cross.l2_b", Tensor::zeros({1}));
  return p;
}

Tensor image_patches(std::span<const Image> images, const EncoderConfig& cfg) {
  cfg.validate();
  if (images.empty()) throw ContractError("image_patches: empty batch");
  const std::size_t s = cfg.image_size, ps = cfg.patch, grid = s / ps, pd = cfg.patch_dim();
  const std::size_t per = cfg.patches_per_image();
  std::vector<double> out(images.size() * per * pd);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Image& img = images[b];
    if (img.height() != s || img.width() != s || img.channels() != cfg.channels) {
      throw std::invalid_argument("image of size " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                                  "x" + std::to_string(img.channels()) + " does not match encoder input " +
                                  std::to_string(s) + "x" + std::to_string(s) + "x" + std::to_string(cfg.channels));
    }
    for (std::size_t gy = 0; gy < grid; ++gy)
      for (std::size_t gx = 0; gx < grid; ++gx) {
        double* row = out.data() + ((b * per) + gy * grid + gx) * pd;
        std::size_t k = 0;
        for (std::size_t y = 0; y < ps; ++y)
          for (std::size_t x = 0; x < ps; ++x)
            for (std::size_t c = 0; c < cfg.channels; ++c) row[k++] = img.at(gy * ps + y, gx * ps + x, c) - 0.5;
      }
  }
  return Tensor({images.size() * per, pd}, std::move(out));
}

Var encode_image(Tape& tape, const ParamMap& params, const EncoderConfig& cfg, std::span<const Image> images) {
  Var x = tape.constant(image_patches(images, cfg));
  Var h1 = tanh(dense(params, "image.l1", x));
  Var h2 = tanh(dense(params, "image.l2", h1));
  const std::size_t per = cfg.patches_per_image(), b = images.size();
  std::vector<double> pool(b * b * per, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < per; ++k) pool[i * b * per + i * per + k] = 1.0 / static_cast<double>(per);
  Var pooled = matmul(tape.constant(Tensor({b, b * per}, std::move(pool))), h2);
  return normalize_rows(dense(params, "image.proj", pooled));
}

Var encode_text(Tape& tape, const ParamMap& params, const EncoderConfig& cfg, std::span<const TextInput> texts) {
  if (texts.empty()) throw ContractError("encode_text: empty batch");
  const std::size_t v = cfg.resolved_vocab_size();
  std::vector<double> coef;
  coef.reserve(texts.size() * v);
  for (const auto& t : texts) {
    auto row = pooling_coefficients(t, v);
    coef.insert(coef.end(), row.begin(), row.end());
  }
  Var pooled = matmul(tape.constant(Tensor({texts.size(), v}, std::move(coef))), params["text.embed"]);
  Var h = tanh(dense(params, "text.l1", pooled));
  return normalize_rows(dense(params, "text.l2", h));
}

Var itc_loss(Var image_emb, Var text_emb, double temperature, std::span<const int> identities) {
  const std::size_t b = image_emb.value().rows();
  if (b < 2) throw ContractError("itc_loss: need at least 2 pairs for negatives");
  if (identities.size() != b || text_emb.value().rows() != b) {
    throw DimensionError("itc_loss: batch sizes disagree");
  }
  if (!(temperature > 0.0)) throw ContractError("itc_loss: temperature must be positive");
  Tape& tape = image_emb.tape();

  std::vector<double> targets(b * b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    double count = 0.0;
    for (std::size_t j = 0; j < b; ++j) count += identities[i] == identities[j] ? 1.0 : 0.0;
    for (std::size_t j = 0; j < b; ++j)
      if (identities[i] == identities[j]) targets[i * b + j] = 1.0 / count;
  }
  Var t = tape.constant(Tensor({b, b}, std::move(targets)));
  Var logits = scale(matmul(image_emb, transpose(text_emb)), 1.0 / temperature);
  Var picked = mul(logits, t);
  Var rows = mean(sub(logsumexp(logits, 1), sum(picked, 1)));
  Var cols = mean(sub(logsumexp(logits, 0), sum(picked, 0)));
  return scale(add(rows, cols), 0.5);
}

Var bce_with_logits(Var logits, std::span<const double> labels) {
  if (labels.size() != logits.value().size()) throw DimensionError("bce_with_logits: label count mismatch");
  Tape& tape = logits.tape();
  Var y = tape.constant(Tensor(logits.shape(), std::vector<double>(labels.begin(), labels.end())));
  return mean(sub(softplus(logits), mul(y, logits)));
}

Var itm_logits(const ParamMap& params, Var image_rows, Var text_rows) {
  const Var parts[] = {image_rows, text_rows, mul(image_rows, text_rows)};
  Var h = tanh(dense(params, "cross.l1", concat_cols(parts)));
  return dense(params, "cross.l2", h);
}

Var itm_loss(const ParamMap& params, Var image_emb, Var text_emb, std::span<const int> identities,
             const MemoryUnit* memory, std::size_t negatives_per_pair) {
  const Tensor& img = image_emb.value();
  const Tensor& txt = text_emb.value();
  const std::size_t b = img.rows(), d = img.cols();
  if (txt.rows() != b || identities.size() != b) throw DimensionError("itm_loss: batch sizes disagree");
  Tape& tape = image_emb.tape();
  const Tensor sims = matmul(img, transpose(txt));

  std::vector<std::size_t> batch_img, batch_txt;   // in-batch negative pairs
  std::vector<std::size_t> mem_img_q, mem_txt_q;   // batch rows paired with memory rows
  std::vector<double> mem_txt_rows, mem_img_rows;  // memory embeddings (constants)

  auto in_batch = [&](std::size_t i, bool image_query, std::size_t want, auto&& emit) {
    std::vector<std::size_t> cand;
    for (std::size_t j = 0; j < b; ++j)
      if (identities[j] != identities[i]) cand.push_back(j);
    auto score = [&](std::size_t j) { return image_query ? sims.at(i, j) : sims.at(j, i); };
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t x, std::size_t y) { return score(x) > score(y); });
    for (std::size_t k = 0; k < std::min(want, cand.size()); ++k) emit(cand[k]);
  };

  if (negatives_per_pair > 0) {
    for (std::size_t i = 0; i < b; ++i) {
      std::size_t from_memory = 0;
      if (memory && !memory->empty()) {
        auto row = img.data().subspan(i * d, d);
        for (const auto& hn : memory->sample_hard_negatives(row, identities[i], negatives_per_pair, Modality::image)) {
          mem_img_q.push_back(i);
          mem_txt_rows.insert(mem_txt_rows.end(), hn.entry->text_embedding.begin(), hn.entry->text_embedding.end());
          ++from_memory;
        }
      }
      in_batch(i, true, negatives_per_pair - from_memory, [&](std::size_t j) {
        batch_img.push_back(i);
        batch_txt.push_back(j);
      });

      from_memory = 0;
      if (memory && !memory->empty()) {
        auto row = txt.data().subspan(i * d, d);
        for (const auto& hn : memory->sample_hard_negatives(row, identities[i], negatives_per_pair, Modality::text)) {
          mem_txt_q.push_back(i);
          mem_img_rows.insert(mem_img_rows.end(), hn.entry->image_embedding.begin(), hn.entry->image_embedding.end());
          ++from_memory;
        }
      }
      in_batch(i, false, negatives_per_pair - from_memory, [&](std::size_t j) {
        batch_img.push_back(j);
        batch_txt.push_back(i);
      });
    }
  }

  std::vector<Var> left{image_emb}, right{text_emb};
  if (!batch_img.empty()) {
    left.push_back(gather_rows(image_emb, batch_img));
    right.push_back(gather_rows(text_emb, batch_txt));
  }
  if (!mem_img_q.empty()) {
    left.push_back(gather_rows(image_emb, mem_img_q));
    right.push_back(tape.constant(Tensor({mem_img_q.size(), d}, std::move(mem_txt_rows))));
  }
  if (!mem_txt_q.empty()) {
    left.push_back(tape.constant(Tensor({mem_txt_q.size(), d}, std::move(mem_img_rows))));
    right.push_back(gather_rows(text_emb, mem_txt_q));
  }
  Var l = left.size() == 1 ? left[0] : concat_rows(left);
  Var r = right.size() == 1 ? right[0] : concat_rows(right);
  std::vector<double> labels(l.value().rows(), 0.0);
  std::fill_n(labels.begin(), b, 1.0);
  return bce_with_logits(itm_logits(params, l, r), labels);
}

TaskLoss task_loss(Tape& tape, const ParamMap& params, const EncoderConfig& cfg, const TaskBatch& task,
                   const MemoryUnit* negatives, MemoryUnit* push_to) {
  Var img = encode_image(tape, params, cfg, task.images);
  Var txt = encode_text(tape, params, cfg, task.texts);
  TaskLoss out;
  Var itc = itc_loss(img, txt, cfg.temperature, task.identities);
  out.itc = itc.value().item();
  out.loss = itc;
  if (cfg.itm_weight != 0.0) {
    Var itm = itm_loss(params, img, txt, task.identities, negatives, cfg.negatives_per_pair);
    out.itm = itm.value().item();
    out.loss = add(itc, scale(itm, cfg.itm_weight));
  }
  if (push_to) {
    const std::size_t d = img.value().cols();
    std::vector<MemoryEntry> entries;
    entries.reserve(task.size());
    for (std::size_t i = 0; i < task.size(); ++i) {
      MemoryEntry e;
      auto ir = img.value().data().subspan(i * d, d);
      auto tr = txt.value().data().subspan(i * d, d);
      e.image_embedding.assign(ir.begin(), ir.end());
      e.text_embedding.assign(tr.begin(), tr.end());
      e.identity = task.identities[i];
      entries.push_back(std::move(e));
    }
    push_to->push_batch(std::move(entries));
  }
  return out;
}

Tensor embed_images(const ParamVector& params, const EncoderConfig& cfg, std::span<const Image> images) {
  Tape tape;
  auto p = bind_constants(tape, params);
  return encode_image(tape, p, cfg, images).value();
}

Tensor embed_texts(const ParamVector& params, const EncoderConfig& cfg, std::span<const TextInput> texts) {
  Tape tape;
  auto p = bind_constants(tape, params);
  return encode_text(tape, p, cfg, texts).value();
}

}  // namespace camel
