#pragma once

#include <cstdint>
#include <vector>

#include "blocksel/grad_select.hpp"
#include "blocksel/rng.hpp"

namespace blocksel {

struct AdaConfig {
  double k_percent = 10.0;
  double delta = 1.0;            // Dirichlet smoothing, keeps every alpha > 0
  double epsilon0 = 1.0;         // initial exploration probability
  double lambda = 0.0;           // exploration decay rate
  int steps_per_epoch = 1;
  bool force_first_explore = true;

  /// Throws std::invalid_argument naming the bad field.
  void validate() const;
};

/// epsilon0 * exp(-lambda * t).
double epsilon_at(long long t, const AdaConfig& cfg);

/// lambda = ln(epsilon0/epsilon_end) / steps_per_epoch, so the exploration
/// probability reaches epsilon_end exactly at the end of epoch 1.
double default_lambda(double epsilon0, double epsilon_end, int steps_per_epoch);

enum class Decision { Explore, Exploit };

struct SelectionRecord {
  long long step = 0;
  int epoch = 1;
  Decision decision = Decision::Explore;
  double epsilon = 0.0;
  BlockSet selected;
};

/// Adaptive block selection: epsilon-greedy in epoch 1 (explore = top-k by
/// gradient norm, exploit = Dirichlet over update-frequency counts), pure
/// exploitation from epoch 2 on. Frequency counts grow on both branches.
class Selector {
 public:
  Selector(const AdaConfig& cfg, std::vector<int> pool, int total_blocks, Rng rng);

  /// One selection step. `norms` must cover the pool; it is only consulted
  /// by the epoch-1 explore branch.
  SelectionRecord select(const GradNormTable& norms);

  /// Moves to the next epoch; frequency counts and the step counter carry
  /// over unchanged.
  void advance_epoch() { ++epoch_; }

  const std::vector<long long>& freq() const { return freq_; }
  long long step_count() const { return step_; }
  int epoch() const { return epoch_; }
  int selection_count() const { return m_; }
  const std::vector<int>& pool() const { return pool_; }
  Rng& rng() { return rng_; }

 private:
  AdaConfig cfg_;
  std::vector<int> pool_;
  std::vector<long long> freq_;  // indexed by block ordinal
  long long step_ = 0;
  int epoch_ = 1;
  int m_ = 1;
  Rng rng_;
};

}  // namespace blocksel
