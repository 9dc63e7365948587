#pragma once

#include <span>
#include <vector>

#include "camel/model.hpp"
#include "camel/rng.hpp"
#include "camel/synthdata.hpp"
#include "camel/tensor.hpp"

namespace camel {

/// Rows are text queries, columns are gallery images.
struct SimilarityMatrix {
  Tensor scores;
  std::vector<int> query_ids;
  std::vector<int> gallery_ids;

  SimilarityMatrix(Tensor s, std::vector<int> q, std::vector<int> g);
  std::size_t queries() const { return query_ids.size(); }
  std::size_t gallery() const { return gallery_ids.size(); }
};

/// Gallery columns of query `q`, best first; equal scores keep the lower column first.
std::vector<std::size_t> ranking(const SimilarityMatrix& sim, std::size_t q);

double recall_at_k(const SimilarityMatrix& sim, std::size_t k);
double average_precision(const SimilarityMatrix& sim, std::size_t q);
double mean_ap(const SimilarityMatrix& sim);

struct RetrievalMetrics {
  double r1 = 0.0, r5 = 0.0, r10 = 0.0, map = 0.0;
  bool operator==(const RetrievalMetrics&) const = default;
};

/// R@{1,5,10} and mAP; K is clamped to the gallery size.
RetrievalMetrics retrieval_metrics(const SimilarityMatrix& sim);

/// Replaces min(n_mask, length) distinct positions, drawn uniformly, with [UNK].
Caption mask_caption(const Caption& c, std::size_t n_mask, Rng& rng);

/// Text-to-image similarity over one split: every caption is a query and every image a gallery item.
SimilarityMatrix split_similarity(const ParamVector& params, const EncoderConfig& cfg, const Dataset& data, Split split,
                                  std::size_t n_mask = 0, Rng* rng = nullptr);

RetrievalMetrics evaluate(const ParamVector& params, const EncoderConfig& cfg, const Dataset& data, Split split);

/// Metrics for n_mask = 0..max_mask; entry i used i masked tokens per query.
std::vector<RetrievalMetrics> masked_query_eval(const ParamVector& params, const EncoderConfig& cfg,
                                                const Dataset& data, Split split, std::size_t max_mask, Rng& rng);

}  // namespace camel
