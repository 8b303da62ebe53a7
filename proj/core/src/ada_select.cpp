#include "blocksel/ada_select.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace blocksel {

void AdaConfig::validate() const {
  if (!(k_percent > 0.0) || k_percent > 100.0) {
    throw std::invalid_argument("AdaConfig: k_percent must be in (0, 100]");
  }
  if (!(delta > 0.0)) {
    throw std::invalid_argument("AdaConfig: delta must be > 0");
  }
  if (epsilon0 < 0.0 || epsilon0 > 1.0) {
    throw std::invalid_argument("AdaConfig: epsilon0 must be in [0, 1]");
  }
  if (lambda < 0.0) {
    throw std::invalid_argument("AdaConfig: lambda must be >= 0");
  }
  if (steps_per_epoch < 1) {
    throw std::invalid_argument("AdaConfig: steps_per_epoch must be >= 1");
  }
}

double epsilon_at(long long t, const AdaConfig& cfg) {
  if (t < 0) {
    throw std::invalid_argument("epsilon_at: t must be >= 0");
  }
  return cfg.epsilon0 * std::exp(-cfg.lambda * static_cast<double>(t));
}

double default_lambda(double epsilon0, double epsilon_end, int steps_per_epoch) {
  if (!(epsilon_end > 0.0) || !(epsilon_end < epsilon0)) {
    throw std::invalid_argument("default_lambda: need 0 < epsilon_end < epsilon0");
  }
  if (steps_per_epoch < 1) {
    throw std::invalid_argument("default_lambda: steps_per_epoch must be >= 1");
  }
  return std::log(epsilon0 / epsilon_end) / steps_per_epoch;
}

Selector::Selector(const AdaConfig& cfg, std::vector<int> pool, int total_blocks, Rng rng)
    : cfg_(cfg), pool_(std::move(pool)), rng_(rng) {
  cfg_.validate();
  if (pool_.empty()) {
    throw std::runtime_error("Selector: empty block pool");
  }
  for (int o : pool_) {
    if (o < 0 || o >= total_blocks) {
      throw std::invalid_argument("Selector: pool ordinal out of range");
    }
  }
  freq_.assign(total_blocks, 0);
  m_ = selection_size(cfg_.k_percent, static_cast<int>(pool_.size()));
}

SelectionRecord Selector::select(const GradNormTable& norms) {
  SelectionRecord rec;
  rec.step = step_;
  rec.epoch = epoch_;

  Decision decision = Decision::Exploit;
  double eps = 0.0;
  if (epoch_ == 1) {
    eps = epsilon_at(step_, cfg_);
    if (cfg_.force_first_explore && step_ == 0) {
      decision = Decision::Explore;
    } else if (rng_.next_double() < eps) {
      decision = Decision::Explore;
    }
  }
  rec.decision = decision;
  rec.epsilon = eps;

  if (decision == Decision::Explore) {
    rec.selected = select_top_k(norms, cfg_.k_percent, pool_);
  } else {
    std::vector<double> alpha(pool_.size());
    for (std::size_t i = 0; i < pool_.size(); ++i) {
      alpha[i] = static_cast<double>(freq_[pool_[i]]) + cfg_.delta;
    }
    const std::vector<double> p = sample_dirichlet(alpha, rng_);
    const std::vector<std::size_t> picks =
        weighted_sample_without_replacement(p, static_cast<std::size_t>(m_), rng_);
    rec.selected.ordinals.reserve(picks.size());
    for (std::size_t i : picks) {
      rec.selected.ordinals.push_back(pool_[i]);
    }
  }

  // Alg-2 frequency update is unconditional: both branches count.
  for (int o : rec.selected.ordinals) {
    ++freq_[o];
  }
  ++step_;
  return rec;
}

}  // namespace blocksel
