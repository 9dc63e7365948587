#include "camel/meta.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "camel/synthdata.hpp"

namespace camel {

void MetaConfig::validate() const {
  if (!(inner_lr >= 0.0)) throw std::invalid_argument("inner learning rate must be non-negative");
  if (!(eps_fast > 0.0)) throw std::invalid_argument("eps_fast must be positive");
  if (!(eps_slow > 0.0 && eps_slow <= 1.0)) throw std::invalid_argument("eps_slow must lie in (0, 1]");
  if (k < 1) throw std::invalid_argument("slow-update cycle k must be at least 1");
  if (num_tasks < 1) throw std::invalid_argument("number of tasks N must be at least 1");
}

std::string Toggles::label() const {
  if (!st && !adsu && !cmml) return "Baseline";
  if (st && adsu && cmml) return "CAMeL";
  if (st && !adsu && !cmml) return "+ST";
  if (st && adsu && !cmml) return "+ADSU";
  if (st && !adsu && cmml) return "+CMML";
  std::string s;
  if (st) s += "ST";
  if (adsu) s += s.empty() ? "ADSU" : "+ADSU";
  if (cmml) s += s.empty() ? "CMML" : "+CMML";
  return s;
}

MetaState MetaState::init(const ParamVector& theta) {
  MetaState s;
  s.fast = theta;
  s.slow = theta;
  return s;
}

ParamVector gradient_descent(const ParamVector& start, std::size_t iters, double lr, const LossBuilder& loss,
                             const std::string& context, std::vector<double>* losses) {
  ParamVector theta = start;
  for (std::size_t step = 0; step < iters; ++step) {
    Tape tape;
    auto params = tape.bind(theta);
    Var l;
    try {
      l = loss(tape, params);
    } catch (const NumericError& e) {
      std::ostringstream os;
      os << context << ": step " << step << ": loss = non-finite (" << e.what() << ")";
      throw NumericError(os.str());
    }
    const double value = l.value().item();
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << context << ": step " << step << ": loss = " << value;
      throw NumericError(os.str());
    }
    if (losses) losses->push_back(value);
    theta = param_axpy(theta, -lr, tape.backward(l));
  }
  return theta;
}

ParamVector task_update(const ParamVector& start, const TaskBatch& task, MemoryUnit* memory, const MetaConfig& cfg,
                        const EncoderConfig& enc, std::vector<double>* losses) {
  std::size_t step = 0;
  LossBuilder builder = [&](Tape& tape, const ParamMap& params) {
    const bool last = ++step == cfg.inner_iters;
    MemoryUnit* push = last && task.tag == TaskTag::T3 ? memory : nullptr;
    return task_loss(tape, params, enc, task, memory, push).loss;
  };
  return gradient_descent(start, cfg.inner_iters, cfg.inner_lr, builder, std::string("task ") + task_tag_name(task.tag),
                          losses);
}

ParamVector fast_update(const ParamVector& theta0, std::span<const ParamVector> task_params, double eps_fast) {
  if (task_params.empty()) throw ContractError("fast_update: no task parameters");
  // A full step on a single task is plain assignment; taking it literally keeps
  // the result bit-exact where theta_0 + (theta_1 - theta_0) would round.
  if (task_params.size() == 1 && eps_fast == 1.0) {
    if (!theta0.compatible(task_params[0])) throw DimensionError("fast_update: " + theta0.incompatibility(task_params[0]));
    return task_params[0];
  }
  ParamVector displacement = param_axpy(task_params[0], -1.0, theta0);
  for (std::size_t i = 1; i < task_params.size(); ++i)
    displacement = param_axpy(displacement, 1.0, param_axpy(task_params[i], -1.0, theta0));
  const double step = eps_fast / static_cast<double>(task_params.size());
  return param_axpy(theta0, step, displacement);
}

std::pair<ParamVector, ParamVector> slow_update(const ParamVector& slow, const ParamVector& fast, double eps_slow) {
  ParamVector next = eps_slow == 1.0 ? fast : param_axpy(slow, eps_slow, param_axpy(fast, -1.0, slow));
  if (!next.compatible(slow)) throw DimensionError("slow_update: " + slow.incompatibility(fast));
  ParamVector reset = next;
  return {std::move(next), std::move(reset)};
}

// ---------------------------------------------------------------------------

BatchSource::BatchSource(std::vector<RawPair> pairs, std::size_t batch_size, Rng rng)
    : pairs_(std::move(pairs)), batch_size_(batch_size), rng_(std::move(rng)) {
  if (pairs_.empty()) throw std::invalid_argument("batch source needs at least one pair");
  if (batch_size_ == 0) throw std::invalid_argument("batch size must be positive");
  batch_size_ = std::min(batch_size_, pairs_.size());
  order_.resize(pairs_.size());
  reshuffle();
}

void BatchSource::reshuffle() {
  std::iota(order_.begin(), order_.end(), 0);
  rng_.shuffle(order_);
  cursor_ = 0;
}

std::size_t BatchSource::batches_per_pass() const { return pairs_.size() / batch_size_; }

std::vector<RawPair> BatchSource::next() {
  if (cursor_ + batch_size_ > order_.size()) reshuffle();
  std::vector<RawPair> out;
  out.reserve(batch_size_);
  for (std::size_t i = 0; i < batch_size_; ++i) out.push_back(pairs_[order_[cursor_ + i]]);
  cursor_ += batch_size_;
  return out;
}

MetaEpochReport meta_epoch(MetaState& state, BatchSource& source, const MetaConfig& cfg, const EncoderConfig& enc,
                           const StylizeConfig& stylize, const Toggles& toggles, MemoryUnit* memory, Rng& rng) {
  cfg.validate();
  const auto raw = source.next();
  MetaEpochReport report;
  report.stylized = toggles.st;

  std::vector<std::size_t> order(cfg.num_tasks);
  std::iota(order.begin(), order.end(), 0);
  if (cfg.random_task_order) rng.shuffle(order);

  std::array<TaskBatch, 3> built;
  if (toggles.st) built = build_tasks(raw, rng, Vocabulary::standard(), stylize);

  MemoryUnit* mem = toggles.st ? memory : nullptr;
  std::vector<ParamVector> results;
  results.reserve(cfg.num_tasks);
  ParamVector chained = state.fast;
  for (std::size_t i = 0; i < cfg.num_tasks; ++i) {
    const auto tag = static_cast<TaskTag>(order[i] % 3);
    const TaskBatch task = toggles.st ? built[order[i] % 3] : plain_task(raw, tag);
    const ParamVector& start = cfg.parallel_start && toggles.cmml ? state.fast : chained;
    std::vector<double> losses;
    ParamVector theta_i = task_update(start, task, mem, cfg, enc, &losses);
    report.task_order.push_back(tag);
    report.task_losses.push_back(
        losses.empty() ? 0.0 : std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size()));
    chained = theta_i;
    results.push_back(std::move(theta_i));
  }

  state.fast = toggles.cmml ? fast_update(state.fast, results, cfg.eps_fast) : std::move(chained);

  const std::size_t before = state.completed_tasks;
  state.completed_tasks += cfg.num_tasks;
  state.meta_epoch += 1;
  const bool due = cfg.k_unit == SlowCycleUnit::meta_epochs ? state.meta_epoch % cfg.k == 0
                                                             : before / cfg.k != state.completed_tasks / cfg.k;
  if (toggles.adsu) {
    if (due) {
      std::tie(state.slow, state.fast) = slow_update(state.slow, state.fast, cfg.eps_slow);
      report.slow_update = true;
    }
  } else {
    state.slow = state.fast;
  }
  return report;
}

void swa_accumulate(MetaState& state) {
  state.swa_count += 1;
  if (state.swa_count == 1) {
    state.swa_mean = state.slow;
    return;
  }
  // running mean: m <- m + (x - m) / n
  const ParamVector delta = param_axpy(state.slow, -1.0, state.swa_mean);
  state.swa_mean = param_axpy(state.swa_mean, 1.0 / static_cast<double>(state.swa_count), delta);
}

ParamVector swa_finalize(const MetaState& state) {
  if (state.swa_count == 0) throw ContractError("swa_finalize: no snapshots were taken");
  return state.swa_mean;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  meta.validate();
  encoder.validate();
  stylize.mixup.validate();
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  if (!(finetune_lr >= 0.0)) throw std::invalid_argument("fine-tuning learning rate must be non-negative");
  capacity_from_ratio(batch_size, memory_ratio);
}

TrainResult train(const TrainConfig& cfg, const ParamVector& init, std::span<const RawPair> pairs, Rng& rng,
                  const EpochObserver& observer) {
  cfg.validate();
  TrainResult result;
  result.state = MetaState::init(init);
  MetaState& state = result.state;
  if (cfg.phase_a_epochs + cfg.phase_b_epochs == 0) {
    result.params = init;
    return result;
  }

  BatchSource source(std::vector<RawPair>(pairs.begin(), pairs.end()), cfg.batch_size, rng.split(1));
  Rng task_rng = rng.split(2);
  std::optional<MemoryUnit> memory;
  if (cfg.toggles.st) memory.emplace(capacity_from_ratio(source.batch_size(), cfg.memory_ratio));

  std::size_t epoch = 0;
  for (std::size_t e = 0; e < cfg.phase_a_epochs; ++e) {
    auto rep = meta_epoch(state, source, cfg.meta, cfg.encoder, cfg.stylize, cfg.toggles,
                          memory ? &*memory : nullptr, task_rng);
    EpochRecord rec;
    rec.epoch = ++epoch;
    rec.phase = 'A';
    rec.stylized = rep.stylized;
    rec.task_losses = rep.task_losses;
    rec.loss = std::accumulate(rep.task_losses.begin(), rep.task_losses.end(), 0.0) /
               static_cast<double>(rep.task_losses.size());
    rec.slow_update = rep.slow_update;
    if (observer) observer(rec, state.slow);
    result.log.push_back(std::move(rec));
  }

  for (std::size_t e = 0; e < cfg.phase_b_epochs; ++e) {
    EpochRecord rec;
    rec.epoch = ++epoch;
    rec.phase = 'B';
    std::vector<double> losses;
    ParamVector theta = state.slow;
    for (std::size_t b = 0; b < source.batches_per_pass(); ++b) {
      const auto raw = source.next();
      const TaskBatch task = plain_task(raw);
      LossBuilder builder = [&](Tape& tape, const ParamMap& params) {
        return task_loss(tape, params, cfg.encoder, task, nullptr).loss;
      };
      theta = gradient_descent(theta, 1, cfg.finetune_lr, builder, "fine-tuning", &losses);
    }
    state.fast = theta;
    state.slow = std::move(theta);
    rec.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
    if (cfg.meta.swa_every > 0 && (e + 1) % cfg.meta.swa_every == 0) {
      swa_accumulate(state);
      rec.swa_snapshot = true;
    }
    if (observer) observer(rec, state.slow);
    result.log.push_back(std::move(rec));
  }

  result.params = state.swa_count > 0 ? swa_finalize(state) : state.slow;
  return result;
}

}  // namespace camel
