#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "camel/eval.hpp"

using namespace camel;

namespace {

SimilarityMatrix random_matrix(std::size_t q, std::size_t g, int identities, bool coarse, Rng& rng) {
  std::vector<double> s(q * g);
  // coarse scores force many ties
  for (auto& x : s) x = coarse ? static_cast<double>(rng.uniform_int(0, 4)) : rng.normal();
  std::vector<int> qi(q), gi(g);
  for (auto& i : gi) i = static_cast<int>(rng.uniform_int(0, identities - 1));
  for (auto& i : qi) i = gi[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(g) - 1))];
  return SimilarityMatrix(Tensor({q, g}, s), qi, gi);
}

SimilarityMatrix transformed(const SimilarityMatrix& m, double (*f)(double)) {
  std::vector<double> s(m.scores.data().begin(), m.scores.data().end());
  for (auto& x : s) x = f(x);
  return SimilarityMatrix(Tensor(m.scores.shape(), s), m.query_ids, m.gallery_ids);
}

// Rank of each column counted directly: columns scoring higher, or equal with a lower index, come first.
std::size_t oracle_rank(const SimilarityMatrix& m, std::size_t q, std::size_t col) {
  std::size_t r = 0;
  for (std::size_t j = 0; j < m.gallery(); ++j) {
    const double sj = m.scores.at(q, j), sc = m.scores.at(q, col);
    if (sj > sc || (sj == sc && j < col)) ++r;
  }
  return r;
}

double oracle_recall(const SimilarityMatrix& m, std::size_t k) {
  double hits = 0;
  for (std::size_t q = 0; q < m.queries(); ++q) {
    bool hit = false;
    for (std::size_t j = 0; j < m.gallery(); ++j)
      if (m.gallery_ids[j] == m.query_ids[q] && oracle_rank(m, q, j) < k) hit = true;
    hits += hit;
  }
  return hits / static_cast<double>(m.queries());
}

double oracle_map(const SimilarityMatrix& m) {
  double total = 0;
  for (std::size_t q = 0; q < m.queries(); ++q) {
    std::vector<std::size_t> ranks;
    for (std::size_t j = 0; j < m.gallery(); ++j)
      if (m.gallery_ids[j] == m.query_ids[q]) ranks.push_back(oracle_rank(m, q, j));
    std::sort(ranks.begin(), ranks.end());
    double ap = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) ap += static_cast<double>(i + 1) / static_cast<double>(ranks[i] + 1);
    total += ap / static_cast<double>(ranks.size());
  }
  return total / static_cast<double>(m.queries());
}

}  // namespace

TEST_CASE("metric examples") {
  const SimilarityMatrix eye(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}), {0, 1, 2}, {0, 1, 2});
  CHECK(recall_at_k(eye, 1) == 1.0);
  CHECK(mean_ap(eye) == 1.0);

  const SimilarityMatrix flat(Tensor({2, 4}, std::vector<double>(8, 0.3)), {0, 2}, {0, 1, 2, 3});
  CHECK(recall_at_k(flat, 1) == 0.5);  // only the query whose match sits at column 0 hits

  const SimilarityMatrix second(Tensor({1, 3}, {0.9, 0.5, 0.1}), {7}, {1, 7, 2});
  CHECK(average_precision(second, 0) == 0.5);
  CHECK(recall_at_k(second, 1) == 0.0);
  CHECK(recall_at_k(second, 2) == 1.0);

  CHECK_THROWS(recall_at_k(second, 0));
  CHECK_THROWS(recall_at_k(second, 4));
  const SimilarityMatrix orphan(Tensor({1, 2}, {0.1, 0.2}), {5}, {1, 2});
  CHECK_THROWS(mean_ap(orphan));
  CHECK_THROWS(SimilarityMatrix(Tensor({2, 2}), {0}, {0, 1}));

  const auto small = retrieval_metrics(second);
  CHECK(small.r5 == 1.0);
  CHECK(small.r10 == 1.0);
}

TEST_CASE("recall and mAP match a counting oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_matrix(20, 20, 6, trial % 2 == 0, rng);
    for (std::size_t k : {1, 5, 10}) CHECK(recall_at_k(m, k) == oracle_recall(m, k));
    CHECK(std::abs(mean_ap(m) - oracle_map(m)) < 1e-12);
    const auto r = retrieval_metrics(m);
    CHECK(r.r1 <= r.r5);
    CHECK(r.r5 <= r.r10);
    CHECK(r.map >= 0.0);
    CHECK(r.map <= 1.0);
  }
}

TEST_CASE("metrics are invariant under increasing transforms") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_matrix(15, 25, 5, trial % 3 == 0, rng);
    const auto base = retrieval_metrics(m);
    CHECK(retrieval_metrics(transformed(m, [](double x) { return 2.0 * x + 1.0; })) == base);
    CHECK(retrieval_metrics(transformed(m, [](double x) { return std::tanh(x); })) == base);
  }
}

TEST_CASE("perfect separation gives mAP of one") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_matrix(10, 12, 4, false, rng);
    std::vector<double> s(m.scores.data().begin(), m.scores.data().end());
    for (std::size_t q = 0; q < m.queries(); ++q)
      for (std::size_t j = 0; j < m.gallery(); ++j)
        if (m.gallery_ids[j] == m.query_ids[q]) s[q * m.gallery() + j] += 100.0;
    CHECK(mean_ap(SimilarityMatrix(Tensor(m.scores.shape(), s), m.query_ids, m.gallery_ids)) == 1.0);
  }
}

TEST_CASE("caption masking") {
  Rng rng(4);
  Caption c;
  c.tokens = {5, 6, 7, 8, 9};
  CHECK(mask_caption(c, 0, rng) == c);
  const Caption all = mask_caption(c, 9, rng);
  CHECK(std::all_of(all.tokens.begin(), all.tokens.end(), [](int t) { return t == kUnkId; }));
  for (std::size_t n = 0; n <= 5; ++n) {
    Rng a(n), b(n);
    const Caption x = mask_caption(c, n, a);
    CHECK(x == mask_caption(c, n, b));
    CHECK(x.tokens.size() == 5);
    CHECK(static_cast<std::size_t>(std::count(x.tokens.begin(), x.tokens.end(), kUnkId)) == n);
  }
  // each position is equally likely to be masked
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const Caption x = mask_caption(c, 2, rng);
    for (std::size_t p = 0; p < 5; ++p) counts[p] += x.tokens[p] == kUnkId;
  }
  for (int n : counts) CHECK(std::abs(n / 5000.0 - 0.4) < 0.03);
}

TEST_CASE("end-to-end evaluation") {
  EncoderConfig cfg;
  Rng data_rng(5);
  const auto data = generate_dataset(30, 3, DomainStyle::realistic(), data_rng);
  Rng init(6);
  const auto params = init_params(cfg, init);

  const auto sim = split_similarity(params, cfg, data, Split::test);
  CHECK(sim.queries() == data.indices(Split::test).size());
  CHECK(sim.gallery() == sim.queries());

  Rng r1(7), r2(7);
  const auto curve = masked_query_eval(params, cfg, data, Split::test, 3, r1);
  REQUIRE(curve.size() == 4);
  CHECK(curve[0] == evaluate(params, cfg, data, Split::test));
  CHECK(curve == masked_query_eval(params, cfg, data, Split::test, 3, r2));
}

TEST_CASE("untrained encoders retrieve at chance level") {
  // 40 test identities with one image each; chance R@1 is 1/40.
  EncoderConfig cfg;
  Rng data_rng(8);
  const auto data = generate_dataset(200, 1, DomainStyle::realistic(), data_rng);
  const std::size_t g = data.identity_count(Split::test);
  double total = 0.0, queries = 0.0;
  const int trials = 20;
  for (int seed = 0; seed < trials; ++seed) {
    Rng init(100 + seed);
    const auto sim = split_similarity(init_params(cfg, init), cfg, data, Split::test);
    total += recall_at_k(sim, 1) * static_cast<double>(sim.queries());
    queries += static_cast<double>(sim.queries());
  }
  const double p = 1.0 / static_cast<double>(g);
  const double mean = total / queries;
  CHECK(std::abs(mean - p) <= 3.0 * std::sqrt(p * (1.0 - p) / queries));
}
