#pragma once

#include <vector>

#include "blocksel/metrics.hpp"
#include "blocksel/run_config.hpp"

namespace blocksel {

/// Executes one run: backward -> norm accumulation -> strategy selection ->
/// residency reconciliation -> selective AdamW -> metrics row, for
/// epochs x steps_per_epoch steps. Writes metrics.csv and summary.json under
/// cfg.out_dir when it is non-empty. Fully determined by (config, seed)
/// except the wall_ms column.
RunMetrics run_training(const RunConfig& cfg);

/// Runs every config (out_dir suppressed) and tabulates the results.
/// All configs must share model, task, seed and step budget; mismatches
/// throw std::invalid_argument.
Comparison compare_runs(const std::vector<RunConfig>& configs);

/// Per-block selection counts and shares recounted from the metrics rows.
FrequencyReport frequency_report(const RunMetrics& metrics);
FrequencyReport frequency_report(const std::vector<StepRow>& rows);

}  // namespace blocksel
