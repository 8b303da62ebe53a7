#include <benchmark/benchmark.h>

#include "blocksel/ada_select.hpp"
#include "blocksel/grad_select.hpp"
#include "blocksel/model.hpp"
#include "blocksel/optim.hpp"
#include "blocksel/partition.hpp"
#include "blocksel/rng.hpp"
#include "blocksel/tasks.hpp"

namespace {

blocksel::ModelConfig bench_model_config(int n_blocks, int d_model) {
  blocksel::ModelConfig cfg;
  cfg.vocab_size = 16;
  cfg.d_model = d_model;
  cfg.n_heads = 4;
  cfg.n_blocks = n_blocks;
  cfg.mlp_ratio = 4;
  cfg.max_seq_len = 64;
  return cfg;
}

void BM_Backward(benchmark::State& state) {
  blocksel::Model model(bench_model_config(static_cast<int>(state.range(0)), 32), 7);
  auto task = blocksel::make_copy_task(16, 2, blocksel::Rng(11));
  const blocksel::Batch batch = task->next_batch(8, 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.backward(batch));
  }
}
BENCHMARK(BM_Backward)->Arg(2)->Arg(4)->Arg(8);

void BM_AccumulateBlockNorms(benchmark::State& state) {
  blocksel::Model model(bench_model_config(8, 32), 7);
  const blocksel::BlockPartition part = blocksel::build_partition(model);
  auto task = blocksel::make_copy_task(16, 2, blocksel::Rng(11));
  model.backward(task->next_batch(8, 16));
  for (auto _ : state) {
    benchmark::DoNotOptimize(blocksel::accumulate_block_norms(model.params(), part));
  }
}
BENCHMARK(BM_AccumulateBlockNorms);

void BM_DirichletDraw(benchmark::State& state) {
  blocksel::Rng rng(42);
  const std::vector<double> alpha(static_cast<std::size_t>(state.range(0)), 1.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(blocksel::sample_dirichlet(alpha, rng));
  }
}
BENCHMARK(BM_DirichletDraw)->Arg(8)->Arg(32)->Arg(128);

void BM_SelectorStep(benchmark::State& state) {
  blocksel::AdaConfig cfg;
  cfg.k_percent = 30.0;
  cfg.lambda = blocksel::default_lambda(1.0, 0.01, 200);
  cfg.steps_per_epoch = 200;
  std::vector<int> pool;
  for (int i = 0; i < 25; ++i) pool.push_back(1 + i);
  blocksel::Selector selector(cfg, pool, 28, blocksel::Rng(3));
  selector.advance_epoch();  // exercise the Dirichlet path
  blocksel::GradNormTable norms(28);
  for (auto _ : state) {
    benchmark::DoNotOptimize(selector.select(norms));
  }
}
BENCHMARK(BM_SelectorStep);

void BM_SelectiveAdamWStep(benchmark::State& state) {
  blocksel::Model model(bench_model_config(8, 32), 7);
  const blocksel::BlockPartition part = blocksel::build_partition(model);
  auto task = blocksel::make_copy_task(16, 2, blocksel::Rng(11));
  model.backward(task->next_batch(8, 16));
  blocksel::SelectiveAdamW optim(model, part, {}, 4);
  blocksel::BlockSet sel;
  sel.ordinals = {1, 2};
  optim.ensure_residency(sel);
  for (auto _ : state) {
    optim.step(model, sel);
  }
}
BENCHMARK(BM_SelectiveAdamWStep);

}  // namespace

BENCHMARK_MAIN();
