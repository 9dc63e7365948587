#include "camel/memory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "camel/tensor.hpp"

namespace camel {

namespace {

constexpr double kUnitTolerance = 1e-6;

void require_unit(const std::vector<double>& v, const char* what) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  if (std::abs(std::sqrt(ss) - 1.0) > kUnitTolerance) {
    throw ContractError(std::string("memory entry ") + what + " embedding is not unit-norm (norm " +
                        std::to_string(std::sqrt(ss)) + ")");
  }
}

}  // namespace

std::size_t capacity_from_ratio(std::size_t batch_sample_count, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("memory ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
  if (batch_sample_count == 0) throw std::invalid_argument("memory batch sample count must be positive");
  const auto c = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(batch_sample_count)));
  return std::max<std::size_t>(1, c);
}

MemoryUnit::MemoryUnit(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("memory capacity must be positive");
}

void MemoryUnit::push_batch(std::vector<MemoryEntry> entries) {
  for (auto& e : entries) {
    require_unit(e.image_embedding, "image");
    require_unit(e.text_embedding, "text");
    e.insertion_counter = next_counter_++;
    queue_.push_back(std::move(e));
  }
  while (queue_.size() > capacity_) queue_.pop_front();
}

std::vector<HardNegative> MemoryUnit::sample_hard_negatives(std::span<const double> query, int query_identity,
                                                            std::size_t m, Modality query_modality) const {
  if (m == 0) throw ContractError("sample_hard_negatives: m must be at least 1");
  double qn = 0.0;
  for (double v : query) qn += v * v;
  qn = std::sqrt(qn);

  std::vector<HardNegative> candidates;
  for (const auto& e : queue_) {
    if (e.identity == query_identity) continue;
    const auto& other = query_modality == Modality::image ? e.text_embedding : e.image_embedding;
    if (other.size() != query.size()) throw DimensionError("sample_hard_negatives: embedding width mismatch");
    double dot = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) dot += query[j] * other[j];
    candidates.push_back({&e, qn > 0.0 ? dot / qn : 0.0});
  }
  // queue order is oldest-first, so a stable sort keeps older entries ahead on ties
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const HardNegative& a, const HardNegative& b) { return a.similarity > b.similarity; });
  if (candidates.size() > m) candidates.resize(m);
  return candidates;
}

}  // namespace camel
