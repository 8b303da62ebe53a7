#pragma once

#include <cstdint>
#include <string>

#include "blocksel/ada_select.hpp"
#include "blocksel/model.hpp"
#include "blocksel/optim.hpp"
#include "blocksel/tasks.hpp"

namespace blocksel {

enum class Strategy { Full, FixedTopK, AdaGradSelect, UniformRandom };

std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

std::string task_name(TaskKind t);
TaskKind parse_task(const std::string& name);

/// Everything one training run needs. Every field has a usable default;
/// values come from a key-value config file and/or CLI overrides.
struct RunConfig {
  ModelConfig model{.vocab_size = 16,
                    .d_model = 32,
                    .n_heads = 4,
                    .n_blocks = 8,
                    .mlp_ratio = 4,
                    .max_seq_len = 64,
                    .param_dtype_bytes = 4};
  AdamWConfig adamw{};
  Strategy strategy = Strategy::AdaGradSelect;
  double k_percent = 10.0;
  int epochs = 2;
  int steps_per_epoch = 100;
  int batch_size = 8;
  int seq_len = 16;
  TaskKind task = TaskKind::SyntheticCopy;
  int copy_prefix = 2;
  std::string charlm_path;
  bool include_auxiliary = false;
  /// false: gradient norms reset every optimizer step; true: they keep
  /// accumulating across steps.
  bool cumulative_norms = false;
  double delta = 1.0;
  double epsilon0 = 1.0;
  double epsilon_end = 0.01;
  double lambda = -1.0;  // < 0 means derive from epsilon_end at run start
  bool force_first_explore = true;
  std::uint64_t seed = 1;
  std::string out_dir;

  /// The resolved Algorithm-2 configuration for this run.
  AdaConfig ada() const;

  /// Throws std::invalid_argument naming the first invalid field.
  void validate() const;
};

/// Parses a `key = value` document (one pair per line, '#' comments).
/// Unknown keys are an error naming the key.
RunConfig parse_run_config_file(const std::string& path);

/// Applies a single key=value pair on top of `cfg` (also the CLI override
/// path). Throws std::invalid_argument for unknown keys or bad values.
void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace blocksel
