// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: camel_acceptance [criterion numbers...]   (default: all)

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "camel/augment.hpp"
#include "camel/cli/checkpoint.hpp"
#include "camel/cli/experiment.hpp"
#include "camel/eval.hpp"
#include "camel/memory.hpp"
#include "camel/meta.hpp"
#include "camel/probes.hpp"

using namespace camel;
using namespace camel::cli;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

ParamVector random_params(Rng& rng, double scale = 2.0) {
  ParamVector p;
  std::vector<double> a(12), b(4);
  for (auto& x : a) x = rng.normal(0.0, scale);
  for (auto& x : b) x = rng.normal(0.0, scale);
  p.add("a", Tensor({3, 4}, a));
  p.add("b", Tensor({4}, b));
  return p;
}

std::vector<double> unit_vector(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double n = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

std::vector<RawPair> train_pairs(const Dataset& d) {
  std::vector<RawPair> out;
  for (auto i : d.indices(Split::train)) out.push_back({d.samples[i].image, d.samples[i].caption, d.samples[i].identity});
  return out;
}

ParamVector sgd_step(const ParamVector& p, const TaskBatch& task, const EncoderConfig& enc, double lr) {
  Tape tape;
  const auto grad = tape.backward(task_loss(tape, tape.bind(p), enc, task, nullptr).loss);
  auto flat = p.flatten();
  const auto g = grad.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= lr * g[i];
  return p.with_flat(flat);
}

// ---- 1 ----------------------------------------------------------------------

Verdict gradients() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t probes = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& p : gradient_probes(seed)) {
      ++probes;
      const auto analytic = value_and_grad(p.loss, p.theta).second.flatten();
      auto flat = p.theta.flatten();
      for (std::size_t i = 0; i < flat.size(); ++i) {
        const double keep = flat[i];
        flat[i] = keep + 1e-5;
        const double up = evaluate_loss(p.loss, p.theta.with_flat(flat));
        flat[i] = keep - 1e-5;
        const double down = evaluate_loss(p.loss, p.theta.with_flat(flat));
        flat[i] = keep;
        const double numeric = (up - down) / 2e-5;
        const double err =
            std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        if (err > worst) worst = err, worst_name = p.name;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.detail << probes << " probe/seed pairs, max rel error " << worst << " (" << worst_name << "), " << secs << " s";
  v.require(worst < 1e-4, "max rel error < 1e-4");
  v.require(secs < 30.0, "runtime < 30 s");
  return v;
}

// ---- 2 ----------------------------------------------------------------------

Verdict fast_identity() {
  Verdict v;
  Rng rng(2);
  bool exact = true;
  for (int i = 0; i < 100; ++i) {
    const auto t0 = random_params(rng, 100.0), t1 = random_params(rng, 1e-3);
    exact &= fast_update(t0, std::vector<ParamVector>{t1}, 1.0) == t1;
  }
  v.require(exact, "N=1, eps_fast=1 returns theta_1 bitwise");

  Rng data_rng(20);
  const auto data = generate_dataset(12, 2, DomainStyle::synthetic(), data_rng);
  const auto pairs = train_pairs(data);
  EncoderConfig enc;
  enc.embed_dim = 8;
  enc.hidden_dim = 12;
  MetaConfig cfg;
  cfg.num_tasks = 1;
  cfg.inner_iters = 1;
  cfg.eps_fast = 1.0;
  cfg.inner_lr = 0.1;
  Rng init(21);
  const auto theta = init_params(enc, init);
  MetaState state = MetaState::init(theta);
  BatchSource source(pairs, 8, Rng(22)), oracle_source(pairs, 8, Rng(22));
  Rng task_rng(23);
  ParamVector oracle = theta;
  double gap = 0.0;
  for (int step = 0; step < 10; ++step) {
    meta_epoch(state, source, cfg, enc, {}, Toggles{false, false, true}, nullptr, task_rng);
    oracle = sgd_step(oracle, plain_task(oracle_source.next()), enc, cfg.inner_lr);
    gap = std::max(gap, param_max_abs_diff(state.fast, oracle));
  }
  v.detail << "bitwise identity over 100 pairs: " << (exact ? "yes" : "no") << "; 10-step trajectory gap " << gap;
  v.require(gap <= 1e-12, "trajectory within 1e-12 of plain SGD");
  return v;
}

// ---- 3 ----------------------------------------------------------------------

Verdict contraction() {
  Verdict v;
  Rng rng(3);
  double worst = 0.0;
  bool full = true;
  for (int i = 0; i < 100; ++i) {
    const auto slow = random_params(rng), fast = random_params(rng);
    const double eps = rng.uniform(0.01, 1.0);
    const auto [next, reset] = slow_update(slow, fast, eps);
    double ns = 0.0, os = 0.0;
    const auto a = next.flatten(), b = fast.flatten(), c = slow.flatten();
    for (std::size_t j = 0; j < a.size(); ++j) {
      ns += (a[j] - b[j]) * (a[j] - b[j]);
      os += (c[j] - b[j]) * (c[j] - b[j]);
    }
    worst = std::max(worst, std::abs(std::sqrt(ns) - (1.0 - eps) * std::sqrt(os)));
    full &= slow_update(slow, fast, 1.0).first == fast;
  }
  v.detail << "max contraction gap " << worst << "; eps_slow=1 exact: " << (full ? "yes" : "no");
  v.require(worst <= 1e-10, "contraction within 1e-10");
  v.require(full, "eps_slow=1 gives theta_0 exactly");
  return v;
}

// ---- 4 ----------------------------------------------------------------------

Verdict mixup_beta() {
  Verdict v;
  Rng rng(4);
  bool ends = true;
  for (int i = 0; i < 20; ++i) {
    Image a(32, 32, 3), b(32, 32, 3);
    for (auto& p : a.pixels()) p = rng.uniform();
    for (auto& p : b.pixels()) p = rng.uniform();
    ends &= mixup_images(a, b, 1.0) == a && mixup_images(a, b, 0.0) == b;
  }
  std::vector<double> d(10000);
  for (auto& x : d) x = sample_lambda({1.0}, rng);
  std::sort(d.begin(), d.end());
  double ks = 0.0;
  const double n = static_cast<double>(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) ks = std::max({ks, (i + 1) / n - d[i], d[i] - i / n});
  v.detail << "endpoints exact: " << (ends ? "yes" : "no") << "; KS statistic " << ks;
  v.require(ends, "endpoint identities");
  v.require(ks < 0.02, "KS < 0.02");
  return v;
}

// ---- 5 ----------------------------------------------------------------------

Verdict blur() {
  Verdict v;
  double sum_gap = 0.0, flat_gap = 0.0, impulse_gap = 0.0;
  for (double sigma : {0.5, 1.0, 1.7, 2.5}) {
    const auto cfg = BlurConfig::for_sigma(sigma);
    const Tensor k = gaussian_kernel(cfg);
    double s = 0.0;
    for (double x : k.data()) s += x;
    sum_gap = std::max(sum_gap, std::abs(s - 1.0));

    const Image flat(20, 20, 3, 0.37);
    const Image smoothed = gaussian_blur(flat, cfg);
    for (double x : smoothed.pixels()) flat_gap = std::max(flat_gap, std::abs(x - 0.37));

    const std::size_t n = 2 * static_cast<std::size_t>(cfg.radius) + 9, c = n / 2, r = static_cast<std::size_t>(cfg.radius);
    Image spike(n, n, 1, 0.0);
    spike.at(c, c, 0) = 1.0;
    const Image resp = gaussian_blur(spike, cfg);
    for (std::size_t y = 0; y <= 2 * r; ++y)
      for (std::size_t x = 0; x <= 2 * r; ++x)
        impulse_gap = std::max(impulse_gap, std::abs(resp.at(c - r + y, c - r + x, 0) - k.at(y, x)));
  }
  v.detail << "kernel sum gap " << sum_gap << "; constant-image gap " << flat_gap << "; impulse gap " << impulse_gap;
  v.require(sum_gap <= 1e-12, "kernel sums to 1");
  v.require(flat_gap <= 1e-10, "constant image invariant");
  v.require(impulse_gap <= 1e-10, "impulse response equals kernel");
  return v;
}

// ---- 6 ----------------------------------------------------------------------

Verdict memory() {
  Verdict v;
  Rng rng(6);
  std::size_t fifo_bad = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    const auto cap = static_cast<std::size_t>(rng.uniform_int(1, 20));
    MemoryUnit mem(cap);
    std::vector<int> pushed;
    const int batches = static_cast<int>(rng.uniform_int(1, 10));
    bool ok = true;
    for (int b = 0; b < batches; ++b) {
      std::vector<MemoryEntry> batch;
      for (int i = 0, n = static_cast<int>(rng.uniform_int(0, 8)); i < n; ++i) {
        const int tag = static_cast<int>(pushed.size());
        batch.push_back({unit_vector(3, rng), unit_vector(3, rng), tag, 0});
        pushed.push_back(tag);
      }
      mem.push_batch(std::move(batch));
      const std::size_t keep = std::min(cap, pushed.size());
      ok &= mem.size() == keep;
      for (std::size_t i = 0; ok && i < keep; ++i) ok &= mem.entries()[i].identity == pushed[pushed.size() - keep + i];
    }
    fifo_bad += !ok;
  }

  std::size_t neg_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    MemoryUnit mem(40);
    std::vector<MemoryEntry> batch;
    for (int i = 0; i < 40; ++i) batch.push_back({unit_vector(5, rng), unit_vector(5, rng), static_cast<int>(rng.uniform_int(0, 7)), 0});
    mem.push_batch(batch);
    const auto q = unit_vector(5, rng);
    const int qid = static_cast<int>(rng.uniform_int(0, 7));
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const bool image_query = trial % 2 == 0;
    const auto got = mem.sample_hard_negatives(q, qid, m, image_query ? Modality::image : Modality::text);

    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const auto& e = mem.entries()[i];
      if (e.identity == qid) continue;
      const auto& other = image_query ? e.text_embedding : e.image_embedding;
      double s = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) s += q[j] * other[j];
      ranked.push_back({-s, i});
    }
    std::sort(ranked.begin(), ranked.end());
    ranked.resize(std::min(ranked.size(), m));
    bool ok = got.size() == ranked.size();
    for (std::size_t i = 0; ok && i < ranked.size(); ++i) ok &= got[i].entry == &mem.entries()[ranked[i].second];
    neg_bad += !ok;
  }
  v.detail << "FIFO mismatches " << fifo_bad << "/1000; hard-negative mismatches " << neg_bad << "/100";
  v.require(fifo_bad == 0, "FIFO property");
  v.require(neg_bad == 0, "hard-negative oracle");
  return v;
}

// ---- 7 ----------------------------------------------------------------------

Verdict metrics() {
  Verdict v;
  Rng rng(7);
  std::size_t bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(400);
    for (auto& x : s) x = static_cast<double>(rng.uniform_int(0, 9));
    std::vector<int> qi(20), gi(20);
    for (auto& g : gi) g = static_cast<int>(rng.uniform_int(0, 5));
    for (auto& q : qi) q = gi[static_cast<std::size_t>(rng.uniform_int(0, 19))];
    const SimilarityMatrix sim(Tensor({20, 20}, s), qi, gi);

    // oracle: sort each row by (score desc, column asc)
    double hits[3] = {0, 0, 0}, map = 0.0;
    const std::size_t ks[3] = {1, 5, 10};
    for (std::size_t q = 0; q < 20; ++q) {
      std::vector<std::size_t> order(20);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return s[q * 20 + a] != s[q * 20 + b] ? s[q * 20 + a] > s[q * 20 + b] : a < b;
      });
      double found = 0.0, ap = 0.0;
      std::size_t first = 20;
      for (std::size_t r = 0; r < 20; ++r)
        if (gi[order[r]] == qi[q]) {
          found += 1.0;
          ap += found / static_cast<double>(r + 1);
          first = std::min(first, r);
        }
      map += ap / found;
      for (int k = 0; k < 3; ++k) hits[k] += first < ks[k];
    }
    bool ok = std::abs(mean_ap(sim) - map / 20.0) < 1e-12;
    for (int k = 0; k < 3; ++k) ok &= recall_at_k(sim, ks[k]) == hits[k] / 20.0;
    bad += !ok;
  }
  const SimilarityMatrix second(Tensor({1, 3}, {0.9, 0.8, 0.1}), {4}, {1, 4, 2});
  const double ap2 = average_precision(second, 0);
  v.detail << "oracle mismatches " << bad << "/100; AP at rank 2 = " << ap2;
  v.require(bad == 0, "recall and mAP oracles");
  v.require(ap2 == 0.5, "AP rank 2");
  return v;
}

// ---- 8, 9, 10 -----------------------------------------------------------------

RunConfig sweep_base() {
  RunConfig cfg;
  cfg.eval.per_epoch = false;
  cfg.eval.max_mask = 3;
  // Longer pretraining than the desk defaults, shared by every row.
  cfg.train.phase_a_epochs = 300;
  cfg.train.phase_b_epochs = 10;
  cfg.train.meta.inner_iters = 2;
  return cfg;
}

struct ComponentSweep {
  std::vector<SweepCell> cells;
  double cpu = 0.0;
  bool done = false;
};

ComponentSweep& component_sweep() {
  static ComponentSweep s;
  if (!s.done) {
    s.cells = plan_sweep(sweep_base(), SweepKind::components, 10);
    const double c0 = cpu_seconds();
    run_sweep(s.cells, sweep_threads(), [](const SweepCell& c, std::size_t i) {
      std::fprintf(stderr, "  %-9s seed %zu  R@1 %.3f\n", c.label.c_str(), i, c.runs[i].curve[0].r1);
    });
    s.cpu = cpu_seconds() - c0;
    s.done = true;
  }
  return s;
}

const SweepCell& cell(const std::vector<SweepCell>& cells, const std::string& label) {
  for (const auto& c : cells)
    if (c.label == label) return c;
  throw std::logic_error("no sweep cell " + label);
}

Verdict component_trend() {
  Verdict v;
  auto& sweep = component_sweep();
  const auto& base = cell(sweep.cells, "Baseline");
  const auto& st = cell(sweep.cells, "+ST");
  const auto& cmml = cell(sweep.cells, "+CMML");
  const auto& full = cell(sweep.cells, "CAMeL");
  auto r1 = [](const RunOutcome& o) { return o.curve[0].r1; };
  const double mb = base.mean(r1), ms = st.mean(r1), mc = cmml.mean(r1), mf = full.mean(r1);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < full.runs.size(); ++i) wins += full.runs[i].curve[0].r1 > base.runs[i].curve[0].r1;
  v.detail << "mean R@1 CAMeL " << mf << ", +CMML " << mc << ", +ST " << ms << ", Baseline " << mb << "; CAMeL > Baseline in "
           << wins << "/10 seeds; " << sweep.cpu / 60.0 << " CPU-min";
  v.require(mf >= mc, "CAMeL >= +CMML");
  v.require(mc >= ms, "+CMML >= +ST");
  v.require(ms >= mb, "+ST >= Baseline");
  v.require(wins >= 8, "CAMeL beats Baseline in >= 8 seeds");
  v.require(sweep.cpu < 3600.0, "under 60 CPU-minutes");
  return v;
}

Verdict masking_trend() {
  Verdict v;
  auto& sweep = component_sweep();
  const auto& base = cell(sweep.cells, "Baseline");
  const auto& full = cell(sweep.cells, "CAMeL");
  std::size_t better = 0;
  double db = 0.0, df = 0.0;
  for (std::size_t i = 0; i < full.runs.size(); ++i) {
    const double drop_full = full.runs[i].curve[0].r1 - full.runs[i].curve[3].r1;
    const double drop_base = base.runs[i].curve[0].r1 - base.runs[i].curve[3].r1;
    better += drop_full < drop_base;
    db += drop_base / 10.0;
    df += drop_full / 10.0;
  }
  v.detail << "R@1 drop at 3 masked tokens: CAMeL " << df << ", Baseline " << db << " (mean); CAMeL smaller in " << better
           << "/10 seeds";
  v.require(better >= 7, "smaller degradation in >= 7 seeds");
  return v;
}

Verdict memory_shape() {
  Verdict v;
  auto cells = plan_sweep(sweep_base(), SweepKind::memory, 10);
  run_sweep(cells, sweep_threads(), [](const SweepCell& c, std::size_t i) {
    std::fprintf(stderr, "  %-12s seed %zu  R@1 %.3f\n", c.label.c_str(), i, c.runs[i].curve[0].r1);
  });
  std::vector<double> means;
  for (const auto& c : cells) {
    means.push_back(c.mean([](const RunOutcome& o) { return o.curve[0].r1; }));
    v.detail << c.label << " " << means.back() << "; ";
  }
  const auto best = static_cast<std::size_t>(std::max_element(means.begin(), means.end()) - means.begin());
  const bool interior = best != 0 && best != means.size() - 1 && means[best] > means.front() && means[best] > means.back();
  v.detail << "maximum at " << cells[best].label;
  v.require(interior, "interior maximum");
  return v;
}

// ---- 11 ---------------------------------------------------------------------

int run_binary(const std::string& args) {
  const std::string cmd = std::string(CAMEL_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Verdict persistence() {
  Verdict v;
  const auto dir = fs::temp_directory_path() / "camel_acceptance_11";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto ini = dir / "run.ini";
  std::ofstream(ini) << "[data]\nidentities = 12\nimages_per_identity = 2\n"
                        "[train]\nphase_a_epochs = 3\nphase_b_epochs = 3\nbatch_size = 8\n"
                        "[eval]\nper_epoch = off\nmax_mask = 1\n";
  const int a = run_binary("pretrain --config " + ini.string() + " --seed 11 --out " + (dir / "a").string());
  const int b = run_binary("pretrain --config " + ini.string() + " --seed 11 --out " + (dir / "b").string());
  const auto ca = slurp(dir / "a" / "checkpoint.caml"), cb = slurp(dir / "b" / "checkpoint.caml");
  const bool identical = a == 0 && b == 0 && !ca.empty() && ca == cb;

  Rng rng(11);
  EncoderConfig enc;
  const Checkpoint ck{init_params(enc, rng), config_hash(enc)};
  save_checkpoint(dir / "rt.caml", ck);
  const auto back = load_checkpoint(dir / "rt.caml");
  const bool round_trip = back.params == ck.params && back.config_hash == ck.config_hash;

  const int self = run_binary("selfcheck");
  fs::remove_all(dir);
  v.detail << "checkpoints byte-identical: " << (identical ? "yes" : "no") << "; round trip bit-exact: "
           << (round_trip ? "yes" : "no") << "; selfcheck exit " << self;
  v.require(identical, "byte-identical checkpoints");
  v.require(round_trip, "bit-exact round trip");
  v.require(self == 0, "selfcheck exits 0");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient correctness", gradients},
      {"fast update identity and SGD reduction", fast_identity},
      {"slow update contraction", contraction},
      {"mixup endpoints and Beta sampling", mixup_beta},
      {"Gaussian blur", blur},
      {"memory unit", memory},
      {"retrieval metric oracles", metrics},
      {"component ablation trend", component_trend},
      {"robustness to masked query tokens", masking_trend},
      {"memory size sweep shape", memory_shape},
      {"determinism and persistence", persistence},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::stoul(argv[i])));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.str().c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
