#include "blocksel/partition.hpp"

#include <algorithm>
#include <stdexcept>

namespace blocksel {

std::string BlockId::name() const {
  switch (kind) {
    case BlockKind::Embedding:
      return "embed";
    case BlockKind::Transformer:
      return "block." + std::to_string(transformer_index);
    case BlockKind::FinalNorm:
      return "final_norm";
    case BlockKind::Head:
      return "head";
  }
  return "?";
}

bool BlockSet::contains(int ordinal) const {
  return std::find(ordinals.begin(), ordinals.end(), ordinal) != ordinals.end();
}

std::size_t BlockPartition::block_param_count(int ordinal) const {
  if (ordinal < 0 || ordinal >= total_count()) {
    throw std::out_of_range("block_param_count: unknown block ordinal " +
                            std::to_string(ordinal));
  }
  return param_counts[ordinal];
}

const BlockId& BlockPartition::block(int ordinal) const {
  if (ordinal < 0 || ordinal >= total_count()) {
    throw std::out_of_range("block: unknown block ordinal " + std::to_string(ordinal));
  }
  return blocks[ordinal];
}

std::size_t BlockPartition::params_in(const BlockSet& set) const {
  std::size_t n = 0;
  for (int o : set.ordinals) {
    n += block_param_count(o);
  }
  return n;
}

BlockPartition build_partition(const Model& model, bool include_auxiliary) {
  const int n_blocks = model.config().n_blocks;
  BlockPartition part;

  part.blocks.push_back({BlockKind::Embedding, -1, 0});
  for (int i = 0; i < n_blocks; ++i) {
    part.blocks.push_back({BlockKind::Transformer, i, 1 + i});
  }
  part.blocks.push_back({BlockKind::FinalNorm, -1, 1 + n_blocks});
  part.blocks.push_back({BlockKind::Head, -1, 2 + n_blocks});

  const auto& params = model.params();
  part.param_to_block.assign(params.size(), -1);
  part.block_params.assign(part.blocks.size(), {});
  part.param_counts.assign(part.blocks.size(), 0);

  auto assign = [&](int param_index, int ordinal) {
    part.param_to_block[param_index] = ordinal;
    part.block_params[ordinal].push_back(param_index);
    part.param_counts[ordinal] += params[param_index].size();
    part.total_params += params[param_index].size();
  };

  assign(model.embedding_index(), 0);
  for (int i = 0; i < n_blocks; ++i) {
    const Model::BlockParams& bp = model.block_indices()[i];
    for (int idx : {bp.ln1_gain, bp.ln1_bias, bp.wq, bp.wk, bp.wv, bp.wo, bp.ln2_gain,
                    bp.ln2_bias, bp.mlp_w1, bp.mlp_w2}) {
      assign(idx, 1 + i);
    }
  }
  assign(model.final_norm_gain_index(), 1 + n_blocks);
  assign(model.final_norm_bias_index(), 1 + n_blocks);
  assign(model.head_index(), 2 + n_blocks);

  for (std::size_t p = 0; p < params.size(); ++p) {
    if (part.param_to_block[p] < 0) {
      throw std::runtime_error("build_partition: parameter '" + params[p].id +
                               "' is not assigned to any block");
    }
  }
  for (const auto& members : part.block_params) {
    if (members.empty()) {
      throw std::runtime_error("build_partition: empty block in partition");
    }
  }

  if (include_auxiliary) {
    for (const auto& b : part.blocks) {
      part.pool.push_back(b.ordinal);
    }
  } else {
    for (int i = 0; i < n_blocks; ++i) {
      part.pool.push_back(1 + i);
    }
  }
  return part;
}

}  // namespace blocksel
