#include "camel/eval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace camel {

SimilarityMatrix::SimilarityMatrix(Tensor s, std::vector<int> q, std::vector<int> g)
    : scores(std::move(s)), query_ids(std::move(q)), gallery_ids(std::move(g)) {
  if (scores.rank() != 2 || scores.rows() != query_ids.size() || scores.cols() != gallery_ids.size()) {
    throw DimensionError("similarity matrix " + shape_string(scores.shape()) + " does not match " +
                         std::to_string(query_ids.size()) + " queries x " + std::to_string(gallery_ids.size()) +
                         " gallery labels");
  }
}

std::vector<std::size_t> ranking(const SimilarityMatrix& sim, std::size_t q) {
  std::vector<std::size_t> order(sim.gallery());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sim.scores.at(q, a) > sim.scores.at(q, b); });
  return order;
}

double recall_at_k(const SimilarityMatrix& sim, std::size_t k) {
  if (k == 0) throw std::invalid_argument("recall_at_k: K must be at least 1");
  if (k > sim.gallery()) {
    throw std::invalid_argument("recall_at_k: K = " + std::to_string(k) + " exceeds gallery size " +
                                std::to_string(sim.gallery()));
  }
  if (sim.queries() == 0) throw std::invalid_argument("recall_at_k: no queries");
  std::size_t hits = 0;
  for (std::size_t q = 0; q < sim.queries(); ++q) {
    const auto order = ranking(sim, q);
    for (std::size_t i = 0; i < k; ++i) {
      if (sim.gallery_ids[order[i]] == sim.query_ids[q]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(sim.queries());
}

double average_precision(const SimilarityMatrix& sim, std::size_t q) {
  const auto order = ranking(sim, q);
  std::size_t relevant = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (sim.gallery_ids[order[i]] != sim.query_ids[q]) continue;
    ++relevant;
    sum += static_cast<double>(relevant) / static_cast<double>(i + 1);
  }
  if (relevant == 0) {
    throw std::invalid_argument("mean_ap: query " + std::to_string(q) + " (identity " +
                                std::to_string(sim.query_ids[q]) + ") has no relevant gallery item");
  }
  return sum / static_cast<double>(relevant);
}

double mean_ap(const SimilarityMatrix& sim) {
  if (sim.queries() == 0) throw std::invalid_argument("mean_ap: no queries");
  double total = 0.0;
  for (std::size_t q = 0; q < sim.queries(); ++q) total += average_precision(sim, q);
  return total / static_cast<double>(sim.queries());
}

RetrievalMetrics retrieval_metrics(const SimilarityMatrix& sim) {
  const std::size_t g = sim.gallery();
  return {recall_at_k(sim, std::min<std::size_t>(1, g)), recall_at_k(sim, std::min<std::size_t>(5, g)),
          recall_at_k(sim, std::min<std::size_t>(10, g)), mean_ap(sim)};
}

Caption mask_caption(const Caption& c, std::size_t n_mask, Rng& rng) {
  Caption out = c;
  const std::size_t n = std::min(n_mask, c.tokens.size());
  if (n == 0) return out;
  std::vector<std::size_t> pos(c.tokens.size());
  std::iota(pos.begin(), pos.end(), 0);
  // partial Fisher-Yates: the first n slots are a uniform n-subset
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(pos.size() - 1)));
    std::swap(pos[i], pos[j]);
    out.tokens[pos[i]] = kUnkId;
  }
  return out;
}

SimilarityMatrix split_similarity(const ParamVector& params, const EncoderConfig& cfg, const Dataset& data, Split split,
                                  std::size_t n_mask, Rng* rng) {
  const auto idx = data.indices(split);
  if (idx.empty()) throw std::invalid_argument(std::string("split '") + split_name(split) + "' is empty");
  if (n_mask > 0 && !rng) throw ContractError("split_similarity: masking requires an rng");
  std::vector<Image> images;
  std::vector<TextInput> texts;
  std::vector<int> ids;
  for (auto i : idx) {
    const auto& s = data.samples[i];
    images.push_back(s.image);
    texts.push_back(TextInput::plain(n_mask > 0 ? mask_caption(s.caption, n_mask, *rng) : s.caption));
    ids.push_back(s.identity);
  }
  const Tensor img = embed_images(params, cfg, images);
  const Tensor txt = embed_texts(params, cfg, texts);
  return SimilarityMatrix(matmul(txt, transpose(img)), ids, ids);
}

RetrievalMetrics evaluate(const ParamVector& params, const EncoderConfig& cfg, const Dataset& data, Split split) {
  return retrieval_metrics(split_similarity(params, cfg, data, split));
}

std::vector<RetrievalMetrics> masked_query_eval(const ParamVector& params, const EncoderConfig& cfg,
                                                const Dataset& data, Split split, std::size_t max_mask, Rng& rng) {
  std::vector<RetrievalMetrics> curve;
  for (std::size_t n = 0; n <= max_mask; ++n) {
    Rng r = rng.split(n);
    curve.push_back(retrieval_metrics(split_similarity(params, cfg, data, split, n, &r)));
  }
  return curve;
}

}  // namespace camel
