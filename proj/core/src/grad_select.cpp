#include "blocksel/grad_select.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace blocksel {

void accumulate_block_norms(const std::vector<ParamTensor>& params,
                            const BlockPartition& partition, GradNormTable& table) {
  if (table.norms.size() != static_cast<std::size_t>(partition.total_count())) {
    throw std::invalid_argument("accumulate_block_norms: table size does not match partition");
  }
  // Per-call contributions are summed per block first, then added to the
  // table once, so re-running on the same grads doubles entries exactly.
  std::vector<double> contribution(table.norms.size(), 0.0);
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].grad.size() != params[p].values.size()) {
      throw std::runtime_error("accumulate_block_norms: tensor '" + params[p].id +
                               "' has no populated gradient");
    }
    double sq = 0.0;
    for (double g : params[p].grad) {
      sq += g * g;
    }
    contribution[partition.param_to_block[p]] += std::sqrt(sq);
  }
  for (std::size_t o = 0; o < contribution.size(); ++o) {
    table.norms[o] += contribution[o];
  }
}

GradNormTable accumulate_block_norms(const std::vector<ParamTensor>& params,
                                     const BlockPartition& partition) {
  GradNormTable table(partition.total_count());
  accumulate_block_norms(params, partition, table);
  return table;
}

int selection_size(double k_percent, int pool_size) {
  if (pool_size < 1) {
    throw std::invalid_argument("selection_size: pool must be non-empty");
  }
  if (!(k_percent > 0.0) || k_percent > 100.0) {
    throw std::invalid_argument("selection_size: k_percent must be in (0, 100]");
  }
  const int m = static_cast<int>(std::floor(k_percent * pool_size / 100.0));
  return std::max(1, std::min(m, pool_size));
}

BlockSet select_top_k(const GradNormTable& table, double k_percent,
                      const std::vector<int>& pool) {
  const int m = selection_size(k_percent, static_cast<int>(pool.size()));
  for (int o : pool) {
    if (o < 0 || static_cast<std::size_t>(o) >= table.norms.size()) {
      throw std::invalid_argument("select_top_k: norm table does not cover the pool");
    }
  }
  std::vector<int> order = pool;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (table.norms[a] != table.norms[b]) {
      return table.norms[a] > table.norms[b];
    }
    return a < b;
  });
  BlockSet out;
  out.ordinals.assign(order.begin(), order.begin() + m);
  return out;
}

}  // namespace blocksel
