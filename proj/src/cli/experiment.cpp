#include "camel/cli/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace camel::cli {

MetricsLog::MetricsLog(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write metrics file " + path.string());
}

void MetricsLog::write(std::size_t epoch, const std::string& split, std::size_t n_mask, const RetrievalMetrics& m,
                       std::uint64_t seed, std::optional<char> phase, std::optional<double> loss) {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["split"] = split;
  j["n_mask"] = n_mask;
  j["r1"] = m.r1;
  j["r5"] = m.r5;
  j["r10"] = m.r10;
  j["map"] = m.map;
  j["seed"] = seed;
  if (phase) j["phase"] = std::string(1, *phase);
  if (loss) j["loss"] = *loss;
  out_ << j.dump() << '\n';
  out_.flush();
  ++records_;
}

SeedStreams::SeedStreams(std::uint64_t seed)
    : train_data(Rng(seed).split(1)),
      eval_data(Rng(seed).split(2)),
      init(Rng(seed).split(3)),
      train(Rng(seed).split(4)),
      mask(Rng(seed).split(5)) {}

Datasets load_datasets(const RunConfig& cfg, std::uint64_t seed) {
  SeedStreams streams(seed);
  auto source = [&](const std::filesystem::path& dir, const std::string& style, Rng& rng) {
    if (!dir.empty()) return import_dataset(dir);
    return generate_dataset(cfg.data.identities, cfg.data.images_per_identity, DomainStyle::by_name(style), rng);
  };
  Datasets d;
  d.train = source(cfg.data.train_dir, cfg.data.train_style, streams.train_data);
  d.eval = source(cfg.data.eval_dir, cfg.data.eval_style, streams.eval_data);
  return d;
}

std::vector<RawPair> pairs_of(const Dataset& data, Split split) {
  std::vector<RawPair> out;
  for (auto i : data.indices(split)) {
    const auto& s = data.samples[i];
    out.push_back({s.image, s.caption, s.identity});
  }
  return out;
}

RunOutcome run_experiment(const RunConfig& cfg, std::uint64_t seed, const Datasets& data, MetricsLog* log,
                          const ParamVector* init) {
  const auto t0 = std::chrono::steady_clock::now();
  SeedStreams streams(seed);
  const ParamVector start = init ? *init : init_params(cfg.train.encoder, streams.init);
  const auto pairs = pairs_of(data.train, Split::train);
  if (pairs.size() < 2) throw std::invalid_argument("training split has fewer than two pairs");

  EpochObserver observer;
  const bool has_val = !data.train.indices(Split::val).empty();
  if (log && cfg.eval.per_epoch && has_val) {
    observer = [&](const EpochRecord& rec, const ParamVector& current) {
      log->write(rec.epoch, "val", 0, evaluate(current, cfg.train.encoder, data.train, Split::val), seed, rec.phase,
                 rec.loss);
    };
  }

  RunOutcome outcome;
  outcome.train = train(cfg.train, start, pairs, streams.train, observer);
  outcome.curve =
      masked_query_eval(outcome.train.params, cfg.train.encoder, data.eval, Split::test, cfg.eval.max_mask, streams.mask);
  outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return outcome;
}

// ---------------------------------------------------------------------------

double SweepCell::mean(const std::function<double(const RunOutcome&)>& f) const {
  if (runs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : runs) s += f(r);
  return s / static_cast<double>(runs.size());
}

RetrievalMetrics SweepCell::mean_metrics(std::size_t n_mask) const {
  return {mean([&](const RunOutcome& r) { return r.curve.at(n_mask).r1; }),
          mean([&](const RunOutcome& r) { return r.curve.at(n_mask).r5; }),
          mean([&](const RunOutcome& r) { return r.curve.at(n_mask).r10; }),
          mean([&](const RunOutcome& r) { return r.curve.at(n_mask).map; })};
}

SweepKind sweep_kind(const std::string& name) {
  if (name == "components") return SweepKind::components;
  if (name == "memory") return SweepKind::memory;
  if (name == "k") return SweepKind::k;
  throw ConfigError("unknown sweep '" + name + "' (expected components, memory or k)");
}

std::vector<SweepCell> plan_sweep(const RunConfig& base, SweepKind kind, std::size_t seeds) {
  std::vector<SweepCell> cells;
  auto add = [&](std::string label, auto&& edit) {
    SweepCell c;
    c.label = std::move(label);
    c.config = base;
    edit(c.config);
    for (std::size_t i = 0; i < seeds; ++i) c.seeds.push_back(base.seed + i);
    cells.push_back(std::move(c));
  };
  switch (kind) {
    case SweepKind::components:
      for (Toggles t : {Toggles{false, false, false}, Toggles{true, false, false}, Toggles{true, true, false},
                        Toggles{true, false, true}, Toggles{true, true, true}}) {
        add(t.label(), [&](RunConfig& c) { c.train.toggles = t; });
      }
      break;
    case SweepKind::memory:
      for (double r : {0.05, 0.10, 0.20, 0.30, 0.50, 1.00}) {
        std::ostringstream l;
        l << "memory " << std::lround(r * 100) << "%";
        add(l.str(), [&](RunConfig& c) { c.train.memory_ratio = r; });
      }
      break;
    case SweepKind::k:
      for (std::size_t k : {3, 6, 15, 30}) {
        add("k=" + std::to_string(k), [&](RunConfig& c) { c.train.meta.k = k; });
      }
      break;
  }
  return cells;
}

std::size_t sweep_threads() {
  if (const char* env = std::getenv("CAMEL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void run_sweep(std::vector<SweepCell>& cells, std::size_t threads,
               const std::function<void(const SweepCell&, std::size_t)>& on_done) {
  std::vector<std::uint64_t> seeds;
  for (const auto& c : cells) {
    for (auto s : c.seeds) {
      if (std::find(seeds.begin(), seeds.end(), s) == seeds.end()) seeds.push_back(s);
    }
  }
  std::map<std::uint64_t, Datasets> data;
  for (auto s : seeds) data.emplace(s, load_datasets(cells.front().config, s));

  struct Job {
    std::size_t cell, seed_index;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    cells[c].runs.assign(cells[c].seeds.size(), {});
    for (std::size_t i = 0; i < cells[c].seeds.size(); ++i) jobs.push_back({c, i});
  }

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      auto& cell = cells[jobs[j].cell];
      const auto seed = cell.seeds[jobs[j].seed_index];
      try {
        cell.runs[jobs[j].seed_index] = run_experiment(cell.config, seed, data.at(seed));
        std::lock_guard lock(mu);
        if (on_done) on_done(cell, jobs[j].seed_index);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

std::string format_sweep_table(const std::vector<SweepCell>& cells) {
  std::ostringstream o;
  o << std::left << std::setw(14) << "cell" << std::right << std::setw(7) << "seeds" << std::setw(8) << "R@1"
    << std::setw(8) << "R@5" << std::setw(8) << "R@10" << std::setw(8) << "mAP" << std::setw(10) << "R@1 m=3"
    << '\n';
  o << std::fixed << std::setprecision(4);
  for (const auto& c : cells) {
    const auto m = c.mean_metrics();
    o << std::left << std::setw(14) << c.label << std::right << std::setw(7) << c.runs.size() << std::setw(8) << m.r1
      << std::setw(8) << m.r5 << std::setw(8) << m.r10 << std::setw(8) << m.map;
    if (c.config.eval.max_mask >= 3) {
      o << std::setw(10) << c.mean_metrics(3).r1;
    } else {
      o << std::setw(10) << "-";
    }
    o << '\n';
  }
  return o.str();
}

}  // namespace camel::cli
