#pragma once

#include <vector>

#include "blocksel/partition.hpp"

namespace blocksel {

/// Accumulated per-block gradient norms for one step, indexed by ordinal.
struct GradNormTable {
  std::vector<double> norms;

  explicit GradNormTable(int block_count = 0) : norms(block_count, 0.0) {}
  void reset() { norms.assign(norms.size(), 0.0); }
};

/// Adds each tensor's L2 norm to its block's accumulator: the sum of
/// per-tensor norms, not the norm of the concatenation.
/// Throws std::runtime_error naming a tensor whose grad buffer is missing.
void accumulate_block_norms(const std::vector<ParamTensor>& params,
                            const BlockPartition& partition, GradNormTable& table);

GradNormTable accumulate_block_norms(const std::vector<ParamTensor>& params,
                                     const BlockPartition& partition);

/// m = max(1, floor(k_percent * pool_size / 100)); at least one block is
/// always updated. Throws std::invalid_argument on out-of-range arguments.
int selection_size(double k_percent, int pool_size);

/// The m pool blocks with the largest accumulated norms, in descending norm
/// order; ties broken toward the lower ordinal.
BlockSet select_top_k(const GradNormTable& table, double k_percent,
                      const std::vector<int>& pool);

}  // namespace blocksel
