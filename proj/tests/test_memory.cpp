#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "camel/memory.hpp"
#include "camel/rng.hpp"

using namespace camel;

namespace {

std::vector<double> random_vec(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double n = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

MemoryEntry entry(int identity, Rng& rng, std::size_t d = 4) { return {random_vec(d, rng), random_vec(d, rng), identity, 0}; }

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("capacity from ratio") {
  CHECK(capacity_from_ratio(80, 0.5) == 40);
  CHECK(capacity_from_ratio(10, 1.0) == 10);
  CHECK(capacity_from_ratio(3, 0.05) == 1);
  CHECK_THROWS(capacity_from_ratio(10, 0.0));
  CHECK_THROWS(capacity_from_ratio(10, 1.5));
  CHECK_THROWS(MemoryUnit(0));
}

TEST_CASE("FIFO keeps the newest entries in order") {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto cap = static_cast<std::size_t>(rng.uniform_int(1, 12));
    MemoryUnit mem(cap);
    std::vector<int> pushed;
    const int batches = static_cast<int>(rng.uniform_int(0, 8));
    for (int b = 0; b < batches; ++b) {
      std::vector<MemoryEntry> batch;
      const int n = static_cast<int>(rng.uniform_int(0, 7));
      for (int i = 0; i < n; ++i) {
        batch.push_back(entry(static_cast<int>(pushed.size()), rng));
        pushed.push_back(static_cast<int>(pushed.size()));
      }
      mem.push_batch(std::move(batch));
      REQUIRE(mem.size() <= cap);
    }
    const std::size_t keep = std::min(cap, pushed.size());
    REQUIRE(mem.size() == keep);
    for (std::size_t i = 0; i < keep; ++i) {
      CHECK(mem.entries()[i].identity == pushed[pushed.size() - keep + i]);
      CHECK(mem.entries()[i].insertion_counter == static_cast<std::uint64_t>(pushed.size() - keep + i));
    }
  }
}

TEST_CASE("hard negatives match a brute-force ranking") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    MemoryUnit mem(30);
    std::vector<MemoryEntry> batch;
    for (int i = 0; i < 30; ++i) batch.push_back(entry(static_cast<int>(rng.uniform_int(0, 5)), rng));
    // duplicate an embedding so ties occur
    batch[7].text_embedding = batch[3].text_embedding;
    batch[7].image_embedding = batch[3].image_embedding;
    mem.push_batch(batch);

    const auto query = random_vec(4, rng);
    const int qid = static_cast<int>(rng.uniform_int(0, 5));
    const auto modality = trial % 2 ? Modality::image : Modality::text;
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 40));
    const auto got = mem.sample_hard_negatives(query, qid, m, modality);

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mem.size(); ++i)
      if (mem.entries()[i].identity != qid) idx.push_back(i);
    auto sim = [&](std::size_t i) {
      const auto& e = mem.entries()[i];
      return cosine(query, modality == Modality::image ? e.text_embedding : e.image_embedding);
    };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return sim(a) > sim(b); });
    idx.resize(std::min(idx.size(), m));

    REQUIRE(got.size() == idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      CHECK(got[i].entry == &mem.entries()[idx[i]]);
      CHECK(std::abs(got[i].similarity - sim(idx[i])) < 1e-12);
      if (i > 0) CHECK(got[i].similarity <= got[i - 1].similarity);
    }
  }
}

TEST_CASE("hard negatives from an empty or single-identity memory") {
  Rng rng(3);
  MemoryUnit mem(5);
  const auto q = random_vec(4, rng);
  CHECK(mem.sample_hard_negatives(q, 0, 3, Modality::image).empty());
  mem.push_batch({entry(2, rng), entry(2, rng)});
  CHECK(mem.sample_hard_negatives(q, 2, 3, Modality::text).empty());
  CHECK(mem.sample_hard_negatives(q, 1, 3, Modality::text).size() == 2);
  mem.clear();
  CHECK(mem.empty());
}
