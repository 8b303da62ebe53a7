#include "blocksel/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace blocksel {

void AdamWConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("AdamWConfig: lr must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0) throw std::invalid_argument("AdamWConfig: beta1 must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) throw std::invalid_argument("AdamWConfig: beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("AdamWConfig: eps must be > 0");
  if (weight_decay < 0.0) throw std::invalid_argument("AdamWConfig: weight_decay must be >= 0");
}

std::size_t TransferLog::prefetch_bytes() const {
  std::size_t n = 0;
  for (const auto& e : entries) {
    if (e.action == Action::Prefetch) n += e.bytes;
  }
  return n;
}

std::size_t TransferLog::evict_bytes() const {
  std::size_t n = 0;
  for (const auto& e : entries) {
    if (e.action == Action::Evict) n += e.bytes;
  }
  return n;
}

MemoryReport memory_report_from_counts(std::size_t p_total, std::size_t p_selected,
                                       int bytes_per_param) {
  MemoryReport r;
  r.p_total = p_total;
  r.p_selected = p_selected;
  r.bytes_per_param = bytes_per_param;
  r.mem_full = 2 * r.p_total * static_cast<std::size_t>(bytes_per_param);
  r.mem_selective = 2 * r.p_selected * static_cast<std::size_t>(bytes_per_param);
  r.mem_saved = r.mem_full - r.mem_selective;
  r.percent_reduction =
      (1.0 - static_cast<double>(r.p_selected) / static_cast<double>(r.p_total)) * 100.0;
  return r;
}

MemoryReport memory_report(const BlockPartition& partition, const BlockSet& selected,
                           int bytes_per_param) {
  return memory_report_from_counts(partition.total_params, partition.params_in(selected),
                                   bytes_per_param);
}

SelectiveAdamW::SelectiveAdamW(const Model& model, const BlockPartition& partition,
                               AdamWConfig cfg, int bytes_per_param)
    : partition_(&partition), cfg_(cfg), bytes_per_param_(bytes_per_param) {
  cfg_.validate();
  const auto& params = model.params();
  m_.resize(params.size());
  v_.resize(params.size());
  update_count_.assign(params.size(), 0);
  for (std::size_t p = 0; p < params.size(); ++p) {
    m_[p].assign(params[p].size(), 0.0);
    v_[p].assign(params[p].size(), 0.0);
  }
  // All optimizer state starts host-side.
  residency_.assign(partition.total_count(), Residency::Host);
}

TransferLog SelectiveAdamW::ensure_residency(const BlockSet& selected) {
  TransferLog log;
  const int blocks = partition_->total_count();
  std::vector<bool> wanted(blocks, false);
  for (int o : selected.ordinals) {
    if (o < 0 || o >= blocks) {
      throw std::invalid_argument("ensure_residency: selected ordinal out of range");
    }
    wanted[o] = true;
  }
  for (int o = 0; o < blocks; ++o) {
    const std::size_t bytes =
        2 * partition_->block_param_count(o) * static_cast<std::size_t>(bytes_per_param_);
    const bool on_device = residency_[o] == Residency::Device;
    if (wanted[o] && !on_device) {
      residency_[o] = Residency::Device;
      log.entries.push_back({o, TransferLog::Action::Prefetch, bytes});
    } else if (!wanted[o] && on_device) {
      residency_[o] = Residency::Host;
      log.entries.push_back({o, TransferLog::Action::Evict, bytes});
    } else if (wanted[o]) {
      // Still resident from the previous step: no transfer.
      log.entries.push_back({o, TransferLog::Action::Retain, 0});
    }
  }
  return log;
}

void SelectiveAdamW::step(Model& model, const BlockSet& selected) {
  for (int o : selected.ordinals) {
    if (residency_[o] != Residency::Device) {
      throw std::runtime_error("SelectiveAdamW::step: block '" + partition_->block(o).name() +
                               "' is host-resident; call ensure_residency first");
    }
  }
  auto& params = model.params();
  for (int o : selected.ordinals) {
    for (int p : partition_->block_params[o]) {
      ParamTensor& t = params[p];
      if (t.grad.size() != t.values.size()) {
        throw std::runtime_error("SelectiveAdamW::step: tensor '" + t.id + "' has no gradient");
      }
      const long long n = ++update_count_[p];
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(n));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(n));
      double* mp = m_[p].data();
      double* vp = v_[p].data();
      for (std::size_t i = 0; i < t.values.size(); ++i) {
        const double g = t.grad[i];
        mp[i] = cfg_.beta1 * mp[i] + (1.0 - cfg_.beta1) * g;
        vp[i] = cfg_.beta2 * vp[i] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = mp[i] / bc1;
        const double v_hat = vp[i] / bc2;
        // Decoupled weight decay.
        t.values[i] -= cfg_.lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) +
                                  cfg_.weight_decay * t.values[i]);
      }
    }
  }
}

std::size_t SelectiveAdamW::device_resident_bytes() const {
  std::size_t params_on_device = 0;
  for (int o = 0; o < partition_->total_count(); ++o) {
    if (residency_[o] == Residency::Device) {
      params_on_device += partition_->block_param_count(o);
    }
  }
  return 2 * params_on_device * static_cast<std::size_t>(bytes_per_param_);
}

}  // namespace blocksel
