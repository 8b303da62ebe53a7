#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "blocksel/optim.hpp"
#include "blocksel/run_config.hpp"

namespace blocksel {

/// One metrics row per optimizer step. `wall_ms` is informational only and
/// excluded from any determinism contract.
struct StepRow {
  long long step = 0;
  int epoch = 1;
  double loss = 0.0;
  std::string decision;
  double epsilon = 0.0;
  std::vector<std::string> selected;  // block names, selection order
  std::size_t device_opt_bytes = 0;
  std::size_t prefetch_bytes = 0;
  std::size_t evict_bytes = 0;
  double wall_ms = 0.0;
};

struct FrequencyEntry {
  std::string name;
  long long count = 0;
  double share = 0.0;
};

struct FrequencyReport {
  std::vector<FrequencyEntry> entries;
  long long total = 0;  // = selection steps x m
};

struct RunMetrics {
  RunConfig config;
  std::vector<StepRow> rows;
  double final_loss = 0.0;
  double mean_loss_last_10pct = 0.0;
  double total_wall_ms = 0.0;
  int selection_m = 0;
  MemoryReport final_memory;
  double mean_device_opt_bytes = 0.0;
  FrequencyReport frequency;
};

struct ComparisonRow {
  std::string strategy;
  double k_percent = 0.0;
  double final_loss = 0.0;
  double mean_device_opt_bytes = 0.0;
  std::size_t total_transfer_bytes = 0;
  double percent_reduction = 0.0;  // of the final step's selection
  double wall_ms = 0.0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
};

/// Columns, in order: step, epoch, loss, decision, epsilon, selected,
/// device_opt_bytes, prefetch_bytes, evict_bytes, wall_ms. `selected` is a
/// ';'-joined list of block names.
void write_metrics_csv(const std::string& path, const std::vector<StepRow>& rows);
std::vector<StepRow> read_metrics_csv(const std::string& path);

void write_summary_json(const std::string& path, const RunMetrics& metrics);

void write_comparison_csv(const std::string& path, const Comparison& cmp);
void write_comparison_json(const std::string& path, const Comparison& cmp);

/// Shortest round-trippable decimal text for a double (CSV cells).
std::string format_double(double v);

}  // namespace blocksel
