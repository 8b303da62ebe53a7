#pragma once

#include <cstddef>
#include <vector>

#include "blocksel/partition.hpp"

namespace blocksel {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

enum class Residency { Host, Device };

/// Modeled host<->device moves of one residency reconciliation. Transfer
/// bytes are 2 * P_block * bytes_per_param (both moment buffers move).
struct TransferLog {
  enum class Action { Prefetch, Evict, Retain };
  struct Entry {
    int ordinal;
    Action action;
    std::size_t bytes;
  };
  std::vector<Entry> entries;

  std::size_t prefetch_bytes() const;
  std::size_t evict_bytes() const;
};

/// Deterministic optimizer-state memory accounting: 2 accumulators per
/// parameter, only selected blocks resident on device.
struct MemoryReport {
  std::size_t p_total = 0;
  std::size_t p_selected = 0;
  int bytes_per_param = 4;
  std::size_t mem_full = 0;       // 2 * p_total * bytes_per_param
  std::size_t mem_selective = 0;  // 2 * p_selected * bytes_per_param
  std::size_t mem_saved = 0;
  double percent_reduction = 0.0;
};

MemoryReport memory_report_from_counts(std::size_t p_total, std::size_t p_selected,
                                       int bytes_per_param);

MemoryReport memory_report(const BlockPartition& partition, const BlockSet& selected,
                           int bytes_per_param);

/// AdamW restricted to the selected blocks, with two-tier optimizer-state
/// residency. Moments and per-parameter step counters of unselected blocks
/// are never touched; evicted moments are preserved host-side and restored
/// verbatim on prefetch.
class SelectiveAdamW {
 public:
  SelectiveAdamW(const Model& model, const BlockPartition& partition, AdamWConfig cfg,
                 int bytes_per_param);

  /// Reconciles residency with `selected`: prefetch newly selected blocks,
  /// evict deselected ones, retain the intersection at zero transfer cost.
  TransferLog ensure_residency(const BlockSet& selected);

  /// One AdamW update over every parameter of the selected blocks. Each
  /// parameter's bias correction uses its own update count. Everything
  /// outside the selected set stays bit-identical. Throws std::runtime_error
  /// if a selected block is still host-resident (prefetch first).
  void step(Model& model, const BlockSet& selected);

  /// 2 * (params of device-resident blocks) * bytes_per_param.
  std::size_t device_resident_bytes() const;

  Residency residency(int ordinal) const { return residency_[ordinal]; }
  const std::vector<double>& first_moment(int param_index) const { return m_[param_index]; }
  const std::vector<double>& second_moment(int param_index) const { return v_[param_index]; }
  long long update_count(int param_index) const { return update_count_[param_index]; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  const BlockPartition* partition_;
  AdamWConfig cfg_;
  int bytes_per_param_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::vector<long long> update_count_;
  std::vector<Residency> residency_;
};

}  // namespace blocksel
