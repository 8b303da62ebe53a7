// blocksel: selective-block fine-tuning runs on a small built-in transformer.
//
//   blocksel train   --config run.cfg [--seed N] [--strategy S] [--k PCT] [--out DIR]
//   blocksel compare --configs a.cfg b.cfg ... --out DIR
//   blocksel report  --run DIR

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blocksel/metrics.hpp"
#include "blocksel/run_config.hpp"
#include "blocksel/trainer.hpp"

namespace {

blocksel::RunConfig load_config(const std::string& path) {
  if (path.empty()) {
    return blocksel::RunConfig{};
  }
  return blocksel::parse_run_config_file(path);
}

void print_frequency(const blocksel::FrequencyReport& rep) {
  std::printf("%-12s %10s %8s\n", "block", "count", "share");
  for (const auto& e : rep.entries) {
    std::printf("%-12s %10lld %8.4f\n", e.name.c_str(), e.count, e.share);
  }
  std::printf("%-12s %10lld\n", "total", rep.total);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective-block fine-tuning engine"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string strategy;
  std::string seed;
  std::string k_percent;

  auto* train = app.add_subcommand("train", "Run one training configuration");
  train->add_option("--config", config_path, "Run config file (key = value lines)");
  train->add_option("--seed", seed, "Override the run seed");
  train->add_option("--strategy", strategy,
                    "Override the strategy (full | fixed_topk | ada_grad_select | "
                    "uniform_random)");
  train->add_option("--k", k_percent, "Override k percent");
  train->add_option("--out", out_dir, "Output directory for metrics.csv / summary.json");

  std::vector<std::string> compare_paths;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Run several configs against each other");
  compare->add_option("--configs", compare_paths, "Run config files")->required();
  compare->add_option("--out", compare_out, "Output directory for the comparison table")
      ->required();

  std::string run_dir;
  auto* report = app.add_subcommand("report", "Per-block selection histogram of a finished run");
  report->add_option("--run", run_dir, "Run directory containing metrics.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      blocksel::RunConfig cfg = load_config(config_path);
      if (!seed.empty()) blocksel::apply_config_key(cfg, "seed", seed);
      if (!strategy.empty()) blocksel::apply_config_key(cfg, "strategy", strategy);
      if (!k_percent.empty()) blocksel::apply_config_key(cfg, "k_percent", k_percent);
      if (!out_dir.empty()) blocksel::apply_config_key(cfg, "out_dir", out_dir);

      const blocksel::RunMetrics m = blocksel::run_training(cfg);
      std::printf("strategy=%s k=%s steps=%zu final_loss=%.6f mean_last10=%.6f\n",
                  blocksel::strategy_name(cfg.strategy).c_str(),
                  blocksel::format_double(cfg.k_percent).c_str(), m.rows.size(), m.final_loss,
                  m.mean_loss_last_10pct);
      std::printf("optimizer memory: selected %zu of %zu params, %.2f%% reduction\n",
                  m.final_memory.p_selected, m.final_memory.p_total,
                  m.final_memory.percent_reduction);
      if (!cfg.out_dir.empty()) {
        std::printf("wrote %s/metrics.csv and %s/summary.json\n", cfg.out_dir.c_str(),
                    cfg.out_dir.c_str());
      }
    } else if (compare->parsed()) {
      std::vector<blocksel::RunConfig> cfgs;
      cfgs.reserve(compare_paths.size());
      for (const auto& p : compare_paths) {
        cfgs.push_back(blocksel::parse_run_config_file(p));
      }
      const blocksel::Comparison cmp = blocksel::compare_runs(cfgs);
      std::error_code ec;
      std::filesystem::create_directories(compare_out, ec);
      if (ec) {
        throw std::runtime_error("cannot create out dir '" + compare_out + "': " + ec.message());
      }
      blocksel::write_comparison_csv(compare_out + "/comparison.csv", cmp);
      blocksel::write_comparison_json(compare_out + "/comparison.json", cmp);
      std::printf("%-18s %6s %12s %18s %16s\n", "strategy", "k", "final_loss",
                  "mean_dev_bytes", "transfer_bytes");
      for (const auto& r : cmp.rows) {
        std::printf("%-18s %6.1f %12.6f %18.0f %16zu\n", r.strategy.c_str(), r.k_percent,
                    r.final_loss, r.mean_device_opt_bytes, r.total_transfer_bytes);
      }
      std::printf("wrote %s/comparison.csv and %s/comparison.json\n", compare_out.c_str(),
                  compare_out.c_str());
    } else if (report->parsed()) {
      const auto rows = blocksel::read_metrics_csv(run_dir + "/metrics.csv");
      print_frequency(blocksel::frequency_report(rows));
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
