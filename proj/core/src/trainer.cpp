#include "blocksel/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <stdexcept>

#include "blocksel/ada_select.hpp"
#include "blocksel/grad_select.hpp"

namespace blocksel {

namespace {

// Independent RNG streams so that, e.g., changing the selector never
// perturbs initialization or the data order.
constexpr std::uint64_t kModelStream = 0x01;
constexpr std::uint64_t kTaskStream = 0x02;
constexpr std::uint64_t kSelectorStream = 0x03;

std::unique_ptr<Task> make_task(const RunConfig& cfg) {
  Rng rng = Rng::derive(cfg.seed, kTaskStream);
  switch (cfg.task) {
    case TaskKind::SyntheticCopy:
      return make_copy_task(cfg.model.vocab_size, cfg.copy_prefix, rng);
    case TaskKind::SyntheticModAdd:
      return make_mod_add_task(cfg.model.vocab_size, rng);
    case TaskKind::CharLM:
      return make_char_lm_task_from_file(cfg.model.vocab_size, cfg.charlm_path, rng);
  }
  throw std::invalid_argument("RunConfig: unknown task");
}

// Sort key for block names recovered from a metrics file, matching the
// partition's ordinal order: embed, block.0..n, final_norm, head.
long long name_rank(const std::string& name) {
  if (name == "embed") return -1;
  if (name == "final_norm") return std::numeric_limits<long long>::max() - 1;
  if (name == "head") return std::numeric_limits<long long>::max();
  if (name.rfind("block.", 0) == 0) {
    return std::stoll(name.substr(6));
  }
  return std::numeric_limits<long long>::max() - 2;
}

double elapsed_ms(std::chrono::steady_clock::time_point from) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - from)
      .count();
}

}  // namespace

RunMetrics run_training(const RunConfig& cfg) {
  cfg.validate();

  Model model(cfg.model, derive_seed(cfg.seed, kModelStream));
  const BlockPartition partition = build_partition(model, cfg.include_auxiliary);
  std::unique_ptr<Task> task = make_task(cfg);
  SelectiveAdamW optim(model, partition, cfg.adamw, cfg.model.param_dtype_bytes);
  Rng strategy_rng = Rng::derive(cfg.seed, kSelectorStream);

  std::unique_ptr<Selector> selector;
  int m = 0;
  if (cfg.strategy == Strategy::AdaGradSelect) {
    selector = std::make_unique<Selector>(cfg.ada(), partition.pool, partition.total_count(),
                                          strategy_rng);
    m = selector->selection_count();
  } else if (cfg.strategy == Strategy::Full) {
    m = static_cast<int>(partition.pool.size());
  } else {
    m = selection_size(cfg.k_percent, static_cast<int>(partition.pool.size()));
  }

  RunMetrics metrics;
  metrics.config = cfg;
  metrics.selection_m = m;
  metrics.rows.reserve(static_cast<std::size_t>(cfg.epochs) * cfg.steps_per_epoch);

  GradNormTable running(partition.total_count());
  BlockSet last_selected;
  long long step = 0;

  auto flush_outputs = [&]() {
    if (cfg.out_dir.empty()) {
      return;
    }
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) {
      throw std::runtime_error("run error: cannot create out_dir '" + cfg.out_dir +
                               "': " + ec.message());
    }
    write_metrics_csv(cfg.out_dir + "/metrics.csv", metrics.rows);
    write_summary_json(cfg.out_dir + "/summary.json", metrics);
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int s = 0; s < cfg.steps_per_epoch; ++s, ++step) {
      const auto t0 = std::chrono::steady_clock::now();
      const Batch batch = task->next_batch(cfg.batch_size, cfg.seq_len);

      double loss;
      try {
        loss = model.backward(batch);
      } catch (const std::runtime_error& err) {
        StepRow diag;
        diag.step = step;
        diag.epoch = epoch;
        diag.loss = std::numeric_limits<double>::quiet_NaN();
        diag.decision = "abort";
        metrics.rows.push_back(diag);
        flush_outputs();
        throw std::runtime_error("run error at step " + std::to_string(step) + ": " +
                                 err.what());
      }

      if (!cfg.cumulative_norms) {
        running.reset();
      }
      accumulate_block_norms(model.params(), partition, running);

      StepRow row;
      row.step = step;
      row.epoch = epoch;
      row.loss = loss;

      BlockSet selected;
      switch (cfg.strategy) {
        case Strategy::Full:
          selected.ordinals = partition.pool;
          row.decision = "full";
          break;
        case Strategy::FixedTopK:
          selected = select_top_k(running, cfg.k_percent, partition.pool);
          row.decision = "topk";
          break;
        case Strategy::AdaGradSelect: {
          const SelectionRecord rec = selector->select(running);
          selected = rec.selected;
          row.decision = rec.decision == Decision::Explore ? "explore" : "exploit";
          row.epsilon = rec.epsilon;
          break;
        }
        case Strategy::UniformRandom: {
          const std::vector<double> uniform(partition.pool.size(),
                                            1.0 / static_cast<double>(partition.pool.size()));
          for (std::size_t i :
               weighted_sample_without_replacement(uniform, static_cast<std::size_t>(m),
                                                   strategy_rng)) {
            selected.ordinals.push_back(partition.pool[i]);
          }
          row.decision = "random";
          break;
        }
      }

      const TransferLog tlog = optim.ensure_residency(selected);
      optim.step(model, selected);

      for (int o : selected.ordinals) {
        row.selected.push_back(partition.block(o).name());
      }
      row.device_opt_bytes = optim.device_resident_bytes();
      row.prefetch_bytes = tlog.prefetch_bytes();
      row.evict_bytes = tlog.evict_bytes();
      row.wall_ms = elapsed_ms(t0);
      metrics.rows.push_back(std::move(row));
      last_selected = selected;
    }
    if (selector && epoch < cfg.epochs) {
      selector->advance_epoch();
    }
  }

  metrics.final_loss = metrics.rows.back().loss;
  const std::size_t n = metrics.rows.size();
  const std::size_t tail = std::max<std::size_t>(1, (n + 9) / 10);
  double tail_sum = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) {
    tail_sum += metrics.rows[i].loss;
  }
  metrics.mean_loss_last_10pct = tail_sum / static_cast<double>(tail);
  double wall = 0.0, bytes = 0.0;
  for (const auto& r : metrics.rows) {
    wall += r.wall_ms;
    bytes += static_cast<double>(r.device_opt_bytes);
  }
  metrics.total_wall_ms = wall;
  metrics.mean_device_opt_bytes = bytes / static_cast<double>(n);
  metrics.final_memory = memory_report(partition, last_selected, cfg.model.param_dtype_bytes);
  metrics.frequency = frequency_report(metrics.rows);

  flush_outputs();
  return metrics;
}

Comparison compare_runs(const std::vector<RunConfig>& configs) {
  if (configs.empty()) {
    throw std::invalid_argument("comparison error: no configs given");
  }
  const RunConfig& ref = configs.front();
  for (const RunConfig& c : configs) {
    const bool same_model = c.model.vocab_size == ref.model.vocab_size &&
                            c.model.d_model == ref.model.d_model &&
                            c.model.n_heads == ref.model.n_heads &&
                            c.model.n_blocks == ref.model.n_blocks &&
                            c.model.mlp_ratio == ref.model.mlp_ratio &&
                            c.model.max_seq_len == ref.model.max_seq_len &&
                            c.model.param_dtype_bytes == ref.model.param_dtype_bytes;
    const bool same_task = c.task == ref.task && c.copy_prefix == ref.copy_prefix &&
                           c.charlm_path == ref.charlm_path &&
                           c.batch_size == ref.batch_size && c.seq_len == ref.seq_len;
    const bool same_budget =
        c.epochs == ref.epochs && c.steps_per_epoch == ref.steps_per_epoch;
    if (!same_model || !same_task || !same_budget || c.seed != ref.seed) {
      throw std::invalid_argument(
          "comparison error: configs must share model, task, seed and step budget");
    }
  }

  Comparison cmp;
  for (RunConfig c : configs) {
    c.out_dir.clear();  // member runs stay in memory
    const RunMetrics m = run_training(c);
    ComparisonRow row;
    row.strategy = strategy_name(c.strategy);
    row.k_percent = c.k_percent;
    row.final_loss = m.final_loss;
    row.mean_device_opt_bytes = m.mean_device_opt_bytes;
    std::size_t transfer = 0;
    for (const auto& r : m.rows) {
      transfer += r.prefetch_bytes + r.evict_bytes;
    }
    row.total_transfer_bytes = transfer;
    row.percent_reduction = m.final_memory.percent_reduction;
    row.wall_ms = m.total_wall_ms;
    cmp.rows.push_back(std::move(row));
  }
  return cmp;
}

FrequencyReport frequency_report(const std::vector<StepRow>& rows) {
  std::map<std::string, long long> counts;
  long long total = 0;
  for (const auto& r : rows) {
    for (const auto& name : r.selected) {
      ++counts[name];
      ++total;
    }
  }
  std::vector<std::string> names;
  names.reserve(counts.size());
  for (const auto& [name, c] : counts) {
    names.push_back(name);
  }
  std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
    const long long ra = name_rank(a), rb = name_rank(b);
    return ra != rb ? ra < rb : a < b;
  });
  FrequencyReport rep;
  rep.total = total;
  for (const auto& name : names) {
    FrequencyEntry e;
    e.name = name;
    e.count = counts[name];
    e.share = total > 0 ? static_cast<double>(e.count) / static_cast<double>(total) : 0.0;
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

FrequencyReport frequency_report(const RunMetrics& metrics) {
  return frequency_report(metrics.rows);
}

}  // namespace blocksel
