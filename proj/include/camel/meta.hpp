#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camel/augment.hpp"
#include "camel/grad_check.hpp"
#include "camel/memory.hpp"
#include "camel/model.hpp"
#include "camel/param_vector.hpp"
#include "camel/rng.hpp"

namespace camel {

enum class SlowCycleUnit { meta_epochs, tasks };

struct MetaConfig {
  double inner_lr = 0.2;          // eta, per-step learning rate inside a task
  std::size_t inner_iters = 5;    // gradient steps per task
  double eps_fast = 1.0;          // fast meta-learning rate
  double eps_slow = 0.5;          // slow meta-learning rate (smoothing factor)
  std::size_t k = 6;              // slow-update cycle
  SlowCycleUnit k_unit = SlowCycleUnit::tasks;
  std::size_t num_tasks = 3;      // N
  std::size_t swa_every = 3;      // fine-tuning epochs between SWA snapshots, 0 disables
  bool parallel_start = false;    // every task starts from theta_0 instead of chaining
  bool random_task_order = false;

  void validate() const;
};

/// Which method components are active. All off is plain SGD on raw pairs.
struct Toggles {
  bool st = true;    // stylization tasks and the hard-negative memory
  bool adsu = true;  // slow parameters pulled toward the fast ones every k units
  bool cmml = true;  // per-task inner loops aggregated by the fast update

  static Toggles baseline() { return {false, false, false}; }
  static Toggles camel() { return {true, true, true}; }
  std::string label() const;
  bool operator==(const Toggles&) const = default;
};

struct MetaState {
  ParamVector fast;  // theta_0
  ParamVector slow;  // theta'
  ParamVector swa_mean;
  std::size_t swa_count = 0;
  std::size_t meta_epoch = 0;
  std::size_t completed_tasks = 0;

  static MetaState init(const ParamVector& theta);
  bool operator==(const MetaState&) const = default;
};

/// `iters` steps of theta <- theta - lr * grad. Numeric failures are rethrown
/// with `context`, the step index and the loss value.
ParamVector gradient_descent(const ParamVector& start, std::size_t iters, double lr, const LossBuilder& loss,
                             const std::string& context = "gradient descent", std::vector<double>* losses = nullptr);

/// Inner-loop adaptation on one task; `start` is not modified. Every step
/// draws hard negatives from `memory`; the mixup task (T3) also pushes its
/// final-step embeddings into it.
ParamVector task_update(const ParamVector& start, const TaskBatch& task, MemoryUnit* memory, const MetaConfig& cfg,
                        const EncoderConfig& enc, std::vector<double>* losses = nullptr);

/// theta_0 + eps_fast * (1/N) * sum_i (theta_i - theta_0). N = 1 with
/// eps_fast = 1 returns theta_1 as is.
ParamVector fast_update(const ParamVector& theta0, std::span<const ParamVector> task_params, double eps_fast);

/// theta' + eps_slow * (theta_0 - theta'); returns (new slow, new fast) where
/// the fast parameters are reset to the new slow ones.
std::pair<ParamVector, ParamVector> slow_update(const ParamVector& slow, const ParamVector& fast, double eps_slow);

/// Yields raw training batches forever, reshuffling after every pass.
class BatchSource {
 public:
  BatchSource(std::vector<RawPair> pairs, std::size_t batch_size, Rng rng);

  std::vector<RawPair> next();
  std::size_t batches_per_pass() const;
  std::size_t batch_size() const { return batch_size_; }

 private:
  void reshuffle();

  std::vector<RawPair> pairs_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct MetaEpochReport {
  std::vector<TaskTag> task_order;
  std::vector<double> task_losses;  // mean inner-loop loss per task
  bool stylized = false;
  bool slow_update = false;
};

/// One outer iteration: N tasks built from one raw batch, chained so task i
/// starts where task i-1 ended, then the fast update and (if due) the slow one.
MetaEpochReport meta_epoch(MetaState& state, BatchSource& source, const MetaConfig& cfg, const EncoderConfig& enc,
                           const StylizeConfig& stylize, const Toggles& toggles, MemoryUnit* memory, Rng& rng);

/// Folds the current slow parameters into the running SWA mean.
void swa_accumulate(MetaState& state);
ParamVector swa_finalize(const MetaState& state);

struct TrainConfig {
  MetaConfig meta;
  EncoderConfig encoder;
  StylizeConfig stylize;
  Toggles toggles;
  std::size_t phase_a_epochs = 20;  // meta-epochs with stylization tasks
  std::size_t phase_b_epochs = 20;  // plain fine-tuning passes over the data
  std::size_t batch_size = 16;
  double memory_ratio = 0.5;
  double finetune_lr = 0.1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based across both phases
  char phase = 'A';
  bool stylized = false;
  double loss = 0.0;
  std::vector<double> task_losses;
  bool slow_update = false;
  bool swa_snapshot = false;
};

struct TrainResult {
  ParamVector params;  // SWA mean when snapshots were taken, otherwise theta'
  MetaState state;
  std::vector<EpochRecord> log;
};

using EpochObserver = std::function<void(const EpochRecord&, const ParamVector& current)>;

/// Phase A: meta-epochs over stylized tasks. Phase B: plain SGD at a fixed
/// learning rate on unaugmented pairs, with SWA snapshots every swa_every epochs.
TrainResult train(const TrainConfig& cfg, const ParamVector& init, std::span<const RawPair> pairs, Rng& rng,
                  const EpochObserver& observer = {});

}  // namespace camel
