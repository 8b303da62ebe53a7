#include <stdexcept>

#include <doctest.h>

#include "blocksel/partition.hpp"

using blocksel::BlockKind;
using blocksel::BlockPartition;
using blocksel::Model;
using blocksel::ModelConfig;

namespace {

ModelConfig config_with_blocks(int n_blocks) {
  ModelConfig cfg;
  cfg.vocab_size = 8;
  cfg.d_model = 4;
  cfg.n_heads = 1;
  cfg.n_blocks = n_blocks;
  cfg.mlp_ratio = 4;
  cfg.max_seq_len = 8;
  return cfg;
}

}  // namespace

TEST_CASE("default pool holds only the transformer blocks") {
  Model m(config_with_blocks(25), 1);
  const BlockPartition part = build_partition(m);
  CHECK(part.selectable_count() == 25);
  CHECK(part.total_count() == 27 + 1);  // embed + 25 + final_norm + head
  for (int o : part.pool) {
    CHECK(part.block(o).kind == BlockKind::Transformer);
  }
}

TEST_CASE("single-block model partitions into four blocks") {
  Model m(config_with_blocks(1), 1);
  const BlockPartition part = build_partition(m);
  CHECK(part.total_count() == 4);
  CHECK(part.block(0).name() == "embed");
  CHECK(part.block(1).name() == "block.0");
  CHECK(part.block(2).name() == "final_norm");
  CHECK(part.block(3).name() == "head");
}

TEST_CASE("include_auxiliary widens the pool to every block") {
  Model m(config_with_blocks(3), 1);
  const BlockPartition part = build_partition(m, /*include_auxiliary=*/true);
  CHECK(part.selectable_count() == part.total_count());
}

TEST_CASE("per-block counts sum to the total parameter count") {
  for (int blocks : {1, 3, 6}) {
    Model m(config_with_blocks(blocks), 9);
    const BlockPartition part = build_partition(m);
    std::size_t total = 0;
    for (int o = 0; o < part.total_count(); ++o) {
      CHECK(part.block_param_count(o) > 0);
      total += part.block_param_count(o);
    }
    CHECK(total == m.param_count());
    CHECK(total == part.total_params);
  }
}

TEST_CASE("block parameter counts match the hand tally") {
  // d=4, heads=1, mlp_ratio=4, no biases: Q,K,V,O 4x4 each + MLP (4x16, 16x4)
  // + 2 norms (2x4 each) = 64 + 128 + 16 = 208.
  Model m(config_with_blocks(2), 1);
  const BlockPartition part = build_partition(m);
  CHECK(part.block_param_count(1) == 208);
  CHECK(part.block_param_count(2) == 208);
  CHECK(part.block_param_count(0) == 32);  // embed 8x4
  CHECK(part.block_param_count(3) == 8);   // final norm gain+bias
  CHECK(part.block_param_count(4) == 32);  // head 4x8
}

TEST_CASE("counts do not change when parameter values do") {
  Model m(config_with_blocks(1), 1);
  const BlockPartition before = build_partition(m);
  for (auto& p : m.params()) {
    for (auto& w : p.values) w += 1.0;
  }
  const BlockPartition after = build_partition(m);
  for (int o = 0; o < before.total_count(); ++o) {
    CHECK(before.block_param_count(o) == after.block_param_count(o));
  }
}

TEST_CASE("every parameter appears in exactly one block") {
  Model m(config_with_blocks(4), 2);
  const BlockPartition part = build_partition(m);
  std::vector<int> seen(m.params().size(), 0);
  for (int o = 0; o < part.total_count(); ++o) {
    for (int p : part.block_params[o]) {
      ++seen[p];
    }
  }
  for (int count : seen) {
    CHECK(count == 1);
  }
}

TEST_CASE("ordinals are dense and round-trip") {
  Model m(config_with_blocks(5), 2);
  const BlockPartition part = build_partition(m);
  for (int o = 0; o < part.total_count(); ++o) {
    CHECK(part.block(o).ordinal == o);
  }
  CHECK(part.block(1 + 2).kind == BlockKind::Transformer);
  CHECK(part.block(1 + 2).transformer_index == 2);
}

TEST_CASE("unknown ordinals are rejected") {
  Model m(config_with_blocks(1), 1);
  const BlockPartition part = build_partition(m);
  CHECK_THROWS_AS(part.block_param_count(-1), std::out_of_range);
  CHECK_THROWS_AS(part.block_param_count(99), std::out_of_range);
}

TEST_CASE("block set membership and sizing") {
  blocksel::BlockSet set;
  set.ordinals = {3, 1};
  CHECK(set.contains(3));
  CHECK(set.contains(1));
  CHECK_FALSE(set.contains(2));
  CHECK(set.size() == 2);
}
