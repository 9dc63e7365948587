#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "camel/cli/checkpoint.hpp"
#include "camel/cli/config.hpp"
#include "camel/cli/experiment.hpp"
#include "camel/cli/selfcheck.hpp"
#include "camel/tape.hpp"

namespace fs = std::filesystem;
using namespace camel;
using namespace camel::cli;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string toggles;
  std::string task_order;
  std::string checkpoint;
  std::string sweep;
  std::optional<std::size_t> seeds;
  bool corrupt_gradient = false;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out = o.out;
  if (!o.toggles.empty()) apply_toggles(cfg.train.toggles, o.toggles);
  if (!o.task_order.empty()) {
    if (o.task_order != "fixed" && o.task_order != "random") {
      throw ConfigError("--task-order must be fixed or random, got '" + o.task_order + "'");
    }
    cfg.train.meta.random_task_order = o.task_order == "random";
  }
  if (!o.sweep.empty()) cfg.ablate.sweep = o.sweep;
  if (o.seeds) cfg.ablate.seeds = *o.seeds;
  cfg.validate();
  return cfg;
}

void print_metrics_row(const std::string& label, const RetrievalMetrics& m) {
  std::printf("%-12s R@1 %.4f  R@5 %.4f  R@10 %.4f  mAP %.4f\n", label.c_str(), m.r1, m.r5, m.r10, m.map);
}

void print_curve(const std::vector<RetrievalMetrics>& curve) {
  for (std::size_t n = 0; n < curve.size(); ++n) print_metrics_row("n_mask=" + std::to_string(n), curve[n]);
}

int cmd_gen_data(const RunConfig& cfg) {
  const auto data = load_datasets(cfg, cfg.seed);
  const fs::path train_dir = cfg.out / cfg.data.train_style;
  const fs::path eval_dir = cfg.out / cfg.data.eval_style;
  export_dataset(data.train, train_dir);
  if (eval_dir != train_dir) export_dataset(data.eval, eval_dir);
  std::printf("wrote %zu pairs to %s\n", data.train.samples.size(), train_dir.string().c_str());
  if (eval_dir != train_dir) std::printf("wrote %zu pairs to %s\n", data.eval.samples.size(), eval_dir.string().c_str());
  return 0;
}

void save_run(const RunConfig& cfg, const fs::path& ckpt_path, const ParamVector& params) {
  save_checkpoint(ckpt_path, {params, config_hash(cfg.train.encoder)});
  std::ofstream(cfg.out / "config.ini") << dump_run_config(cfg);
}

int cmd_pretrain(const RunConfig& cfg) {
  const auto data = load_datasets(cfg, cfg.seed);
  MetricsLog log(cfg.out / "metrics.jsonl");
  const auto run = run_experiment(cfg, cfg.seed, data, &log);
  save_run(cfg, cfg.out / "checkpoint.caml", run.train.params);
  std::printf("%s on %s: %zu epochs in %.1fs, checkpoint %s\n", cfg.train.toggles.label().c_str(),
              cfg.data.train_style.c_str(), run.train.log.size(), run.seconds,
              (cfg.out / "checkpoint.caml").string().c_str());
  std::printf("zero-shot on %s test split:\n", cfg.data.eval_style.c_str());
  print_curve(run.curve);
  return 0;
}

int cmd_finetune(const RunConfig& cfg, const std::string& checkpoint) {
  if (checkpoint.empty()) throw ConfigError("finetune needs --checkpoint");
  const ParamVector start = load_params_for(checkpoint, cfg.train.encoder);
  auto data = load_datasets(cfg, cfg.seed);
  data.train = data.eval;  // adapt on the target domain itself
  MetricsLog log(cfg.out / "metrics.jsonl");
  const auto run = run_experiment(cfg, cfg.seed, data, &log, &start);
  save_run(cfg, cfg.out / "finetuned.caml", run.train.params);
  std::printf("fine-tuned on %s: %zu epochs in %.1fs\n", cfg.data.eval_style.c_str(), run.train.log.size(),
              run.seconds);
  print_curve(run.curve);
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint) {
  if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  const ParamVector params = load_params_for(checkpoint, cfg.train.encoder);
  const auto data = load_datasets(cfg, cfg.seed);
  SeedStreams streams(cfg.seed);
  const auto curve =
      masked_query_eval(params, cfg.train.encoder, data.eval, Split::test, cfg.eval.max_mask, streams.mask);
  MetricsLog log(cfg.out / "eval.jsonl");
  for (std::size_t n = 0; n < curve.size(); ++n) log.write(0, "test", n, curve[n], cfg.seed);
  std::printf("%s test split, %zu queries:\n", cfg.data.eval_style.c_str(), data.eval.indices(Split::test).size());
  print_curve(curve);
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  auto cells = plan_sweep(cfg, sweep_kind(cfg.ablate.sweep), cfg.ablate.seeds);
  const std::size_t threads = sweep_threads();
  std::fprintf(stderr, "%s sweep: %zu cells x %zu seeds on %zu threads\n", cfg.ablate.sweep.c_str(), cells.size(),
               cfg.ablate.seeds, threads);
  run_sweep(cells, threads, [](const SweepCell& c, std::size_t i) {
    std::fprintf(stderr, "  %-12s seed %llu  R@1 %.4f  (%.1fs)\n", c.label.c_str(),
                 static_cast<unsigned long long>(c.seeds[i]), c.runs[i].curve[0].r1, c.runs[i].seconds);
  });
  fs::create_directories(cfg.out);
  std::ofstream jsonl(cfg.out / ("ablate_" + cfg.ablate.sweep + ".jsonl"));
  for (const auto& c : cells) {
    for (std::size_t i = 0; i < c.runs.size(); ++i) {
      for (std::size_t n = 0; n < c.runs[i].curve.size(); ++n) {
        const auto& m = c.runs[i].curve[n];
        nlohmann::ordered_json j{{"cell", c.label},     {"epoch", c.runs[i].train.log.size()},
                                 {"split", "test"},     {"n_mask", n},
                                 {"r1", m.r1},          {"r5", m.r5},
                                 {"r10", m.r10},        {"map", m.map},
                                 {"seed", c.seeds[i]}};
        jsonl << j.dump() << '\n';
      }
    }
  }
  std::cout << format_sweep_table(cells);
  return 0;
}

int cmd_selfcheck(bool corrupt) {
  testing::set_corrupt_tanh_backward(corrupt);
  const auto results = run_selfcheck();
  testing::set_corrupt_tanh_backward(false);
  std::cout << format_report(results);
  return all_passed(results) ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal meta-learning on a procedural person-retrieval dataset"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override run.seed");
    sub->add_option("--out", o.out, "override run.out");
    sub->add_option("--toggle", o.toggles, "components, e.g. st=on,adsu=off,cmml=on");
    sub->add_option("--task-order", o.task_order, "fixed or random");
  };
  auto* gen = app.add_subcommand("gen-data", "write the training and target datasets");
  auto* pre = app.add_subcommand("pretrain", "train on the training-domain dataset");
  auto* fin = app.add_subcommand("finetune", "continue training a checkpoint on the target domain");
  auto* ev = app.add_subcommand("eval", "full and masked-query metrics on the target test split");
  auto* abl = app.add_subcommand("ablate", "component, memory-ratio or k sweep over several seeds");
  auto* chk = app.add_subcommand("selfcheck", "verify gradients, update rules and metric oracles");
  for (auto* s : {gen, pre, fin, ev, abl, chk}) common(s);
  for (auto* s : {fin, ev}) s->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  abl->add_option("--sweep", o.sweep, "components, memory or k");
  abl->add_option("--seeds", o.seeds, "number of seeds per cell");
  chk->add_flag("--corrupt-gradient", o.corrupt_gradient, "negative control: perturb the tanh backward pass")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (chk->parsed()) return cmd_selfcheck(o.corrupt_gradient);
    const RunConfig cfg = resolve(o);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (pre->parsed()) return cmd_pretrain(cfg);
    if (fin->parsed()) return cmd_finetune(cfg, o.checkpoint);
    if (ev->parsed()) return cmd_eval(cfg, o.checkpoint);
    if (abl->parsed()) return cmd_ablate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
