#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "camel/cli/config.hpp"
#include "camel/eval.hpp"
#include "camel/meta.hpp"
#include "camel/synthdata.hpp"

namespace camel::cli {

/// Appends one JSON object per line.
class MetricsLog {
 public:
  explicit MetricsLog(const std::filesystem::path& path);
  void write(std::size_t epoch, const std::string& split, std::size_t n_mask, const RetrievalMetrics& m,
             std::uint64_t seed, std::optional<char> phase = std::nullopt, std::optional<double> loss = std::nullopt);
  std::size_t records() const { return records_; }

 private:
  std::ofstream out_;
  std::size_t records_ = 0;
};

/// Independent random streams for one seed; every stage of a run draws from its own.
struct SeedStreams {
  Rng train_data, eval_data, init, train, mask;
  explicit SeedStreams(std::uint64_t seed);
};

struct Datasets {
  Dataset train;  // pretraining domain
  Dataset eval;   // zero-shot target domain
};

/// Imports from the configured directories when set, otherwise generates from the seed.
Datasets load_datasets(const RunConfig& cfg, std::uint64_t seed);

std::vector<RawPair> pairs_of(const Dataset& data, Split split);

struct RunOutcome {
  TrainResult train;
  std::vector<RetrievalMetrics> curve;  // target-domain test metrics for n_mask = 0..max_mask
  double seconds = 0.0;
};

/// Initializes, trains on the training-domain train split, then evaluates on the
/// target-domain test split. With `log`, validation metrics are recorded per epoch.
RunOutcome run_experiment(const RunConfig& cfg, std::uint64_t seed, const Datasets& data, MetricsLog* log = nullptr,
                          const ParamVector* init = nullptr);

struct SweepCell {
  std::string label;
  RunConfig config;
  std::vector<std::uint64_t> seeds;
  std::vector<RunOutcome> runs;  // parallel to seeds

  double mean(const std::function<double(const RunOutcome&)>& f) const;
  RetrievalMetrics mean_metrics(std::size_t n_mask = 0) const;
};

enum class SweepKind { components, memory, k };
SweepKind sweep_kind(const std::string& name);

/// The cells of a sweep with their configs filled in but no runs yet.
std::vector<SweepCell> plan_sweep(const RunConfig& base, SweepKind kind, std::size_t seeds);

/// Runs every (cell, seed) job on up to `threads` threads. Seeds are
/// base.seed, base.seed+1, ...; all cells share datasets and initialization per seed.
void run_sweep(std::vector<SweepCell>& cells, std::size_t threads,
               const std::function<void(const SweepCell&, std::size_t seed_index)>& on_done = {});

/// CAMEL_THREADS if set and positive, otherwise the hardware concurrency.
std::size_t sweep_threads();

std::string format_sweep_table(const std::vector<SweepCell>& cells);

}  // namespace camel::cli
