#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "blocksel/model.hpp"

namespace blocksel {

enum class BlockKind { Embedding, Transformer, FinalNorm, Head };

/// A named group of parameters updated atomically. Ordinals are dense and
/// stable for a config: embed=0, block.i=1+i, final_norm=1+n, head=2+n.
struct BlockId {
  BlockKind kind = BlockKind::Embedding;
  int transformer_index = -1;  // valid only for BlockKind::Transformer
  int ordinal = -1;

  std::string name() const;
  bool operator==(const BlockId&) const = default;
};

/// An ordered selection of block ordinals. Order is the selection order
/// (descending norm for top-k, draw order for sampled picks), which is what
/// the metrics log records.
struct BlockSet {
  std::vector<int> ordinals;

  bool contains(int ordinal) const;
  std::size_t size() const { return ordinals.size(); }
};

/// Assignment of every parameter tensor to exactly one block, plus the pool
/// of blocks eligible for top-k% selection.
struct BlockPartition {
  std::vector<BlockId> blocks;                       // indexed by ordinal
  std::vector<int> param_to_block;                   // param index -> ordinal
  std::vector<std::vector<int>> block_params;        // ordinal -> param indices
  std::vector<std::size_t> param_counts;             // ordinal -> scalar count
  std::vector<int> pool;                             // ordinals in the k% pool
  std::size_t total_params = 0;

  int total_count() const { return static_cast<int>(blocks.size()); }
  int selectable_count() const { return static_cast<int>(pool.size()); }

  /// Exact scalar parameter count of one block; throws on unknown ordinal.
  std::size_t block_param_count(int ordinal) const;
  const BlockId& block(int ordinal) const;

  /// Scalar parameters summed over a block set.
  std::size_t params_in(const BlockSet& set) const;
};

/// Maps every model parameter to its block. With include_auxiliary=false
/// (default) the selection pool holds only the transformer blocks; embedding,
/// final norm and head stay in the partition but out of the pool.
/// Throws std::runtime_error naming any parameter it cannot place.
BlockPartition build_partition(const Model& model, bool include_auxiliary = false);

}  // namespace blocksel
