#include "camel/cli/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "camel/augment.hpp"
#include "camel/cli/checkpoint.hpp"
#include "camel/eval.hpp"
#include "camel/memory.hpp"
#include "camel/meta.hpp"
#include "camel/probes.hpp"

namespace camel::cli {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ParamVector random_params(Rng& rng) {
  ParamVector p;
  for (const auto& [name, shape] : std::vector<std::pair<std::string, Shape>>{{"w", {3, 4}}, {"b", {4}}, {"s", {1}}}) {
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.normal(0.0, 2.0);
    p.add(name, Tensor(shape, std::move(v)));
  }
  return p;
}

std::vector<double> unit(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double n = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

SimilarityMatrix random_similarity(Rng& rng, std::size_t n) {
  std::vector<double> s(n * n);
  // coarse values so ties actually occur
  for (auto& x : s) x = std::round(rng.uniform(-1.0, 1.0) * 8.0) / 8.0;
  std::vector<int> q(n), g(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = g[i] = static_cast<int>(i % 7);
  return SimilarityMatrix(Tensor({n, n}, std::move(s)), q, g);
}

// Rank of column j for query q by counting, independent of any sort.
std::size_t rank_of(const SimilarityMatrix& sim, std::size_t q, std::size_t j) {
  std::size_t r = 0;
  for (std::size_t l = 0; l < sim.gallery(); ++l) {
    const double a = sim.scores.at(q, l), b = sim.scores.at(q, j);
    if (a > b || (a == b && l < j)) ++r;
  }
  return r;
}

double oracle_recall(const SimilarityMatrix& sim, std::size_t k) {
  double hits = 0.0;
  for (std::size_t q = 0; q < sim.queries(); ++q) {
    bool hit = false;
    for (std::size_t j = 0; j < sim.gallery(); ++j)
      hit = hit || (sim.gallery_ids[j] == sim.query_ids[q] && rank_of(sim, q, j) < k);
    hits += hit ? 1.0 : 0.0;
  }
  return hits / static_cast<double>(sim.queries());
}

double oracle_map(const SimilarityMatrix& sim) {
  double total = 0.0;
  for (std::size_t q = 0; q < sim.queries(); ++q) {
    std::vector<std::size_t> ranks;
    for (std::size_t j = 0; j < sim.gallery(); ++j)
      if (sim.gallery_ids[j] == sim.query_ids[q]) ranks.push_back(rank_of(sim, q, j));
    std::sort(ranks.begin(), ranks.end());
    double ap = 0.0;
    for (std::size_t i = 0; i < ranks.size(); ++i) ap += static_cast<double>(i + 1) / static_cast<double>(ranks[i] + 1);
    total += ap / static_cast<double>(ranks.size());
  }
  return total / static_cast<double>(sim.queries());
}

}  // namespace

std::vector<CheckResult> run_selfcheck() {
  std::vector<CheckResult> out;
  auto record = [&](std::string name, double measured, double threshold) {
    out.push_back({std::move(name), measured, threshold, measured <= threshold});
  };

  // gradients: every probe at five seeds, reporting the worst seed
  std::map<std::string, double> worst;
  std::vector<std::string> order;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& p : gradient_probes(seed)) {
      double err = kInf;
      try {
        err = grad_check(p.loss, p.theta).max_rel_error;
      } catch (const std::exception&) {
      }
      if (!worst.count(p.name)) order.push_back(p.name);
      worst[p.name] = std::max(worst[p.name], std::isnan(err) ? kInf : err);
    }
  }
  for (const auto& n : order) record("grad_check " + n, worst[n], 1e-4);

  Rng rng(2024);
  {
    const ParamVector t0 = random_params(rng), t1 = random_params(rng);
    const ParamVector single[] = {t1};
    record("fast_update N=1 eps=1 returns theta_1 bitwise", fast_update(t0, single, 1.0) == t1 ? 0.0 : 1.0, 0.0);
    ParamVector zero, two, four;
    zero.add("x", Tensor::scalar(0.0));
    two.add("x", Tensor::scalar(2.0));
    four.add("x", Tensor::scalar(4.0));
    const ParamVector pair[] = {two, four};
    record("fast_update(0; {2, 4}; 0.5) = 1.5", std::abs(fast_update(zero, pair, 0.5).get("x").item() - 1.5), 0.0);
  }
  {
    double worst_gap = 0.0;
    for (int i = 0; i < 100; ++i) {
      const ParamVector slow = random_params(rng), fast = random_params(rng);
      const double eps = rng.uniform(0.05, 1.0);
      const auto [next, reset] = slow_update(slow, fast, eps);
      worst_gap = std::max(worst_gap,
                           std::abs(param_distance(next, fast) - (1.0 - eps) * param_distance(slow, fast)));
    }
    record("slow_update contraction over 100 pairs", worst_gap, 1e-10);
    const ParamVector slow = random_params(rng), fast = random_params(rng);
    const auto [next, reset] = slow_update(slow, fast, 1.0);
    record("slow_update eps=1 gives theta_0 exactly", next == fast && reset == fast ? 0.0 : 1.0, 0.0);
  }
  {
    Rng beta(77);
    std::vector<double> draws(10000);
    for (auto& d : draws) d = sample_lambda(MixupConfig{1.0}, beta);
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    const double n = static_cast<double>(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) {
      ks = std::max({ks, static_cast<double>(i + 1) / n - draws[i], draws[i] - static_cast<double>(i) / n});
    }
    record("Beta(1,1) vs Uniform KS statistic (10k draws)", ks, 0.02);

    Image a(4, 4, 3, 0.0), b(4, 4, 3, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a.pixels()[i] = beta.uniform();
      b.pixels()[i] = beta.uniform();
    }
    const bool ends = mixup_images(a, b, 1.0) == a && mixup_images(a, b, 0.0) == b;
    record("mixup endpoints lambda=1 and lambda=0 exact", ends ? 0.0 : 1.0, 0.0);
  }
  {
    double ksum = 0.0, constant = 0.0, impulse = 0.0;
    for (double sigma : {0.5, 1.0, 1.7, 2.5}) {
      const auto cfg = BlurConfig::for_sigma(sigma);
      const Tensor k = gaussian_kernel(cfg);
      double s = 0.0;
      for (double v : k.data()) s += v;
      ksum = std::max(ksum, std::abs(s - 1.0));
      const std::size_t size = 2 * static_cast<std::size_t>(cfg.radius) + 7;
      const Image flat(size, size, 3, 0.37);
      const Image blurred = gaussian_blur(flat, cfg);
      for (double v : blurred.pixels()) constant = std::max(constant, std::abs(v - 0.37));
      Image spike(size, size, 1, 0.0);
      const std::size_t c = size / 2;
      spike.at(c, c, 0) = 1.0;
      const Image resp = gaussian_blur(spike, cfg);
      const auto r = static_cast<std::size_t>(cfg.radius);
      for (std::size_t y = 0; y < k.rows(); ++y)
        for (std::size_t x = 0; x < k.cols(); ++x)
          impulse = std::max(impulse, std::abs(resp.at(c - r + y, c - r + x, 0) - k.at(y, x)));
    }
    record("blur kernel sums to 1", ksum, 1e-12);
    record("blur leaves a constant image unchanged", constant, 1e-10);
    record("blur impulse response equals the kernel", impulse, 1e-10);
  }
  {
    std::size_t failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const auto cap = static_cast<std::size_t>(rng.uniform_int(1, 8));
      MemoryUnit mem(cap);
      std::vector<int> pushed;
      const auto pushes = rng.uniform_int(0, 6);
      for (std::int64_t p = 0; p < pushes; ++p) {
        std::vector<MemoryEntry> batch;
        const auto n = rng.uniform_int(0, 5);
        for (std::int64_t e = 0; e < n; ++e) {
          const int id = static_cast<int>(pushed.size());
          batch.push_back({unit(3, rng), unit(3, rng), id, 0});
          pushed.push_back(id);
        }
        mem.push_batch(std::move(batch));
      }
      const std::size_t keep = std::min(cap, pushed.size());
      bool ok = mem.size() == keep;
      for (std::size_t i = 0; ok && i < keep; ++i) ok = mem.entries()[i].identity == pushed[pushed.size() - keep + i];
      failures += ok ? 0 : 1;
    }
    record("memory FIFO content over 1000 push sequences (failures)", static_cast<double>(failures), 0.0);

    failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
      MemoryUnit mem(12);
      std::vector<MemoryEntry> batch;
      for (int e = 0; e < 12; ++e) batch.push_back({unit(4, rng), unit(4, rng), static_cast<int>(rng.uniform_int(0, 3)), 0});
      mem.push_batch(batch);
      const auto q = unit(4, rng);
      const int qid = static_cast<int>(rng.uniform_int(0, 3));
      const auto m = static_cast<std::size_t>(rng.uniform_int(1, 5));
      const auto got = mem.sample_hard_negatives(q, qid, m, Modality::image);
      // oracle: pick the best remaining candidate m times (older wins ties)
      std::vector<bool> used(12, false);
      std::vector<std::size_t> want;
      for (std::size_t r = 0; r < m; ++r) {
        std::optional<std::size_t> best;
        double best_s = 0.0;
        for (std::size_t e = 0; e < 12; ++e) {
          if (used[e] || batch[e].identity == qid) continue;
          double s = 0.0;
          for (int j = 0; j < 4; ++j) s += q[j] * batch[e].text_embedding[j];
          if (!best || s > best_s) best = e, best_s = s;
        }
        if (!best) break;
        used[*best] = true;
        want.push_back(*best);
      }
      bool ok = got.size() == want.size();
      for (std::size_t i = 0; ok && i < want.size(); ++i) ok = got[i].entry->insertion_counter == mem.entries()[want[i]].insertion_counter;
      failures += ok ? 0 : 1;
    }
    record("hard negatives match selection oracle on 100 memories (failures)", static_cast<double>(failures), 0.0);
  }
  {
    double rec = 0.0, map = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto sim = random_similarity(rng, 20);
      for (std::size_t k : {1, 5, 10}) rec = std::max(rec, std::abs(recall_at_k(sim, k) - oracle_recall(sim, k)));
      map = std::max(map, std::abs(mean_ap(sim) - oracle_map(sim)));
    }
    record("recall_at_k matches counting oracle on 100 matrices", rec, 0.0);
    record("mean_ap matches counting oracle on 100 matrices", map, 1e-12);
    const SimilarityMatrix two(Tensor({1, 3}, {0.9, 0.5, 0.1}), {1}, {0, 1, 2});
    record("AP with the single relevant item at rank 2 is 0.5", std::abs(mean_ap(two) - 0.5), 0.0);
  }
  {
    Rng init(5);
    Checkpoint ckpt{init_params(tiny_encoder_config(), init), config_hash(tiny_encoder_config())};
    const auto back = decode_checkpoint(encode_checkpoint(ckpt));
    record("checkpoint round trip is bit-exact",
           back.params == ckpt.params && back.config_hash == ckpt.config_hash ? 0.0 : 1.0, 0.0);
  }
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.pass; });
}

std::string format_report(const std::vector<CheckResult>& results) {
  std::ostringstream o;
  std::size_t failed = 0;
  for (const auto& r : results) {
    o << (r.pass ? "ok    " : "FAIL  ") << std::left << std::setw(64) << r.name << " measured " << std::scientific
      << std::setprecision(3) << r.measured << "  limit " << r.threshold << '\n';
    failed += r.pass ? 0 : 1;
  }
  o << results.size() - failed << "/" << results.size() << " checks passed\n";
  if (failed) {
    o << "failed:";
    for (const auto& r : results)
      if (!r.pass) o << "\n  " << r.name;
    o << '\n';
  }
  return o.str();
}

}  // namespace camel::cli
