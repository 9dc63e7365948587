#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

namespace camel {

enum class Modality { image, text };

struct MemoryEntry {
  std::vector<double> image_embedding;
  std::vector<double> text_embedding;
  int identity = 0;
  std::uint64_t insertion_counter = 0;
};

struct HardNegative {
  const MemoryEntry* entry = nullptr;
  double similarity = 0.0;
};

/// max(1, round(ratio * batch_sample_count)); ratio must lie in (0, 1].
std::size_t capacity_from_ratio(std::size_t batch_sample_count, double ratio);

/// Bounded FIFO of embedded samples that supplies hard negatives for the
/// matching loss. Stored embeddings are never re-encoded.
class MemoryUnit {
 public:
  explicit MemoryUnit(std::size_t capacity);

  /// Appends in order, then evicts oldest entries until size <= capacity.
  /// Insertion counters are assigned here; the caller's values are ignored.
  void push_batch(std::vector<MemoryEntry> entries);

  /// Up to m entries with identity != query_identity, ranked by cosine
  /// similarity between `query` (of modality `query_modality`) and the
  /// entry's opposite-modality embedding. Ties go to the older entry.
  std::vector<HardNegative> sample_hard_negatives(std::span<const double> query, int query_identity,
                                                  std::size_t m, Modality query_modality) const;

  std::size_t size() const { return queue_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return queue_.empty(); }
  const std::deque<MemoryEntry>& entries() const { return queue_; }
  void clear() { queue_.clear(); }

 private:
  std::size_t capacity_;
  std::uint64_t next_counter_ = 0;
  std::deque<MemoryEntry> queue_;
};

}  // namespace camel
