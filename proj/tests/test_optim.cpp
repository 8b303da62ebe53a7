#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "blocksel/grad_select.hpp"
#include "blocksel/optim.hpp"
#include "blocksel/rng.hpp"
#include "blocksel/tasks.hpp"
#include "reference_oracles.hpp"

using blocksel::AdamWConfig;
using blocksel::BlockPartition;
using blocksel::BlockSet;
using blocksel::MemoryReport;
using blocksel::Model;
using blocksel::ModelConfig;
using blocksel::Residency;
using blocksel::SelectiveAdamW;
using blocksel::TransferLog;

namespace {

ModelConfig small_config(int blocks) {
  ModelConfig cfg;
  cfg.vocab_size = 8;
  cfg.d_model = 4;
  cfg.n_heads = 1;
  cfg.n_blocks = blocks;
  cfg.mlp_ratio = 2;
  cfg.max_seq_len = 8;
  return cfg;
}

BlockSet set_of(std::vector<int> ordinals) {
  BlockSet s;
  s.ordinals = std::move(ordinals);
  return s;
}

BlockSet all_blocks(const BlockPartition& part) {
  BlockSet s;
  for (int o = 0; o < part.total_count(); ++o) s.ordinals.push_back(o);
  return s;
}

void fill_grads(Model& m, blocksel::Rng& rng) {
  for (auto& p : m.params()) {
    for (auto& g : p.grad) g = 2.0 * rng.next_double() - 1.0;
  }
}

}  // namespace

TEST_CASE("hand-evaluated first AdamW step on a scalar weight") {
  ModelConfig cfg;
  cfg.vocab_size = 2;
  cfg.d_model = 1;
  cfg.n_heads = 1;
  cfg.n_blocks = 1;
  cfg.mlp_ratio = 1;
  cfg.max_seq_len = 2;
  Model m(cfg, 1);
  const BlockPartition part = build_partition(m);

  const int wq = m.block_indices()[0].wq;  // a 1x1 weight inside block.0
  for (auto& p : m.params()) p.grad.assign(p.values.size(), 0.0);
  m.params()[wq].values = {1.0};
  m.params()[wq].grad = {1.0};

  AdamWConfig acfg;
  acfg.weight_decay = 0.0;
  SelectiveAdamW optim(m, part, acfg, 4);
  optim.ensure_residency(set_of({1}));
  optim.step(m, set_of({1}));

  // m = 0.1, v = 0.001, m_hat = 1, v_hat = 1 => w' = 1 - 1e-3 / (1 + 1e-8).
  const double expected = 1.0 - 1e-3 * (1.0 / (1.0 + 1e-8));
  CHECK(m.params()[wq].values[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(m.params()[wq].values[0] == doctest::Approx(0.999).epsilon(1e-6));
  CHECK(optim.update_count(wq) == 1);
}

TEST_CASE("selecting every block reproduces a reference full AdamW") {
  Model m(small_config(2), 3);
  const BlockPartition part = build_partition(m);
  AdamWConfig acfg;  // defaults, weight decay active
  SelectiveAdamW optim(m, part, acfg, 4);

  std::vector<blocksel::ParamTensor> mirror = m.params();
  refcheck::ReferenceAdamW ref(mirror, acfg);

  auto task = blocksel::make_copy_task(8, 2, blocksel::Rng(4));
  const BlockSet everything = all_blocks(part);
  for (int step = 0; step < 5; ++step) {
    m.backward(task->next_batch(2, 4));
    for (std::size_t i = 0; i < mirror.size(); ++i) {
      mirror[i].values = m.params()[i].values;  // pre-update values
      mirror[i].grad = m.params()[i].grad;
    }
    optim.ensure_residency(everything);
    optim.step(m, everything);
    ref.apply_all(mirror);
    for (std::size_t i = 0; i < mirror.size(); ++i) {
      for (std::size_t e = 0; e < mirror[i].values.size(); ++e) {
        const double a = m.params()[i].values[e];
        const double b = mirror[i].values[e];
        CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
      }
    }
  }
}

TEST_CASE("unselected blocks stay bit-identical, moments and counters too") {
  Model m(small_config(3), 9);
  const BlockPartition part = build_partition(m);
  SelectiveAdamW optim(m, part, {}, 4);

  blocksel::Rng rng(31);
  fill_grads(m, rng);
  optim.ensure_residency(set_of({1}));
  optim.step(m, set_of({1}));

  const auto before_values = [&] {
    std::vector<std::vector<double>> v;
    for (const auto& p : m.params()) v.push_back(p.values);
    return v;
  }();

  fill_grads(m, rng);
  optim.ensure_residency(set_of({2}));
  optim.step(m, set_of({2}));

  for (int o = 0; o < part.total_count(); ++o) {
    for (int pi : part.block_params[o]) {
      const bool frozen = o != 2;
      const bool changed =
          std::memcmp(before_values[pi].data(), m.params()[pi].values.data(),
                      before_values[pi].size() * sizeof(double)) != 0;
      CHECK(changed == !frozen);
      if (frozen && o != 1) {
        CHECK(optim.update_count(pi) == 0);
        for (double x : optim.first_moment(pi)) CHECK(x == 0.0);
        for (double x : optim.second_moment(pi)) CHECK(x == 0.0);
      }
    }
  }
}

TEST_CASE("per-parameter bias correction follows each parameter's own count") {
  Model m(small_config(2), 5);
  const BlockPartition part = build_partition(m);
  AdamWConfig acfg;
  SelectiveAdamW optim(m, part, acfg, 4);

  std::vector<blocksel::ParamTensor> mirror = m.params();
  refcheck::ReferenceAdamW ref(mirror, acfg);

  // block.0 updated at steps 0,1,2; block.1 only at step 1.
  const std::vector<std::vector<int>> plan{{1}, {1, 2}, {1}};
  blocksel::Rng rng(8);
  for (const auto& step_sel : plan) {
    fill_grads(m, rng);
    for (std::size_t i = 0; i < mirror.size(); ++i) {
      mirror[i].values = m.params()[i].values;
      mirror[i].grad = m.params()[i].grad;
    }
    optim.ensure_residency(set_of(step_sel));
    optim.step(m, set_of(step_sel));
    for (int o : step_sel) {
      for (int pi : part.block_params[o]) {
        ref.apply(mirror, pi);
      }
    }
  }
  for (std::size_t i = 0; i < mirror.size(); ++i) {
    CHECK(optim.update_count(static_cast<int>(i)) == ref.steps[i]);
    for (std::size_t e = 0; e < mirror[i].values.size(); ++e) {
      const double a = m.params()[i].values[e];
      const double b = mirror[i].values[e];
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
    }
  }
}

TEST_CASE("stepping a host-resident block is a residency violation") {
  Model m(small_config(2), 5);
  const BlockPartition part = build_partition(m);
  SelectiveAdamW optim(m, part, {}, 4);
  blocksel::Rng rng(3);
  fill_grads(m, rng);
  CHECK_THROWS_WITH_AS(optim.step(m, set_of({1})), doctest::Contains("host-resident"),
                       std::runtime_error);
  optim.ensure_residency(set_of({1}));
  CHECK_NOTHROW(optim.step(m, set_of({1})));
  // Evicted again -> violation again.
  optim.ensure_residency(set_of({2}));
  CHECK_THROWS_AS(optim.step(m, set_of({1})), std::runtime_error);
}

TEST_CASE("residency transitions: prefetch, evict, retain") {
  Model m(small_config(3), 5);
  const BlockPartition part = build_partition(m);
  SelectiveAdamW optim(m, part, {}, 4);

  // From empty, prefetch bytes = sum of 2 * P_block * bytes.
  const TransferLog log1 = optim.ensure_residency(set_of({1, 2}));
  CHECK(log1.prefetch_bytes() ==
        2 * (part.block_param_count(1) + part.block_param_count(2)) * 4);
  CHECK(log1.evict_bytes() == 0);

  // {b1,b2} -> {b2,b3}: prefetch b3, evict b1, retain b2.
  const TransferLog log2 = optim.ensure_residency(set_of({2, 3}));
  CHECK(log2.prefetch_bytes() == 2 * part.block_param_count(3) * 4);
  CHECK(log2.evict_bytes() == 2 * part.block_param_count(1) * 4);
  int retained = 0;
  for (const auto& e : log2.entries) {
    if (e.action == TransferLog::Action::Retain) {
      ++retained;
      CHECK(e.ordinal == 2);
      CHECK(e.bytes == 0);
    }
  }
  CHECK(retained == 1);
  CHECK(optim.residency(1) == Residency::Host);
  CHECK(optim.residency(2) == Residency::Device);
  CHECK(optim.residency(3) == Residency::Device);

  // Unchanged selection -> zero transfers.
  const TransferLog log3 = optim.ensure_residency(set_of({2, 3}));
  CHECK(log3.prefetch_bytes() == 0);
  CHECK(log3.evict_bytes() == 0);
}

TEST_CASE("evicted moments are preserved and restored verbatim") {
  Model m(small_config(2), 5);
  const BlockPartition part = build_partition(m);
  SelectiveAdamW optim(m, part, {}, 4);
  blocksel::Rng rng(12);
  fill_grads(m, rng);
  optim.ensure_residency(set_of({1}));
  optim.step(m, set_of({1}));
  const int pi = part.block_params[1][0];
  const auto m_before = optim.first_moment(pi);
  const auto v_before = optim.second_moment(pi);
  optim.ensure_residency(set_of({2}));  // evict block 1
  optim.ensure_residency(set_of({1}));  // prefetch it back
  CHECK(optim.first_moment(pi) == m_before);
  CHECK(optim.second_moment(pi) == v_before);
}

TEST_CASE("device-resident bytes track the accounting identity") {
  Model m(small_config(4), 5);
  const BlockPartition part = build_partition(m);
  SelectiveAdamW optim(m, part, {}, 2);
  blocksel::Rng rng(13);
  std::size_t prefetched = 0, evicted = 0;
  for (int step = 0; step < 50; ++step) {
    BlockSet sel;
    for (int o = 0; o < part.total_count(); ++o) {
      if (rng.next_below(2) == 0) sel.ordinals.push_back(o);
    }
    const TransferLog log = optim.ensure_residency(sel);
    prefetched += log.prefetch_bytes();
    evicted += log.evict_bytes();
    CHECK(optim.device_resident_bytes() == 2 * part.params_in(sel) * 2);
    // Prefetched minus evicted telescopes to the current resident total.
    CHECK(prefetched - evicted == optim.device_resident_bytes());
  }
}

TEST_CASE("memory report substitutes the accounting formulas exactly") {
  const MemoryReport r = blocksel::memory_report_from_counts(1000, 300, 4);
  CHECK(r.mem_full == 8000);
  CHECK(r.mem_selective == 2400);
  CHECK(r.mem_saved == 5600);
  CHECK(r.percent_reduction == 70.0);
}

TEST_CASE("memory report follows the accounting formulas") {
  Model m(small_config(2), 5);
  const BlockPartition part = build_partition(m);

  const MemoryReport all = memory_report(part, all_blocks(part), 4);
  CHECK(all.p_selected == all.p_total);
  CHECK(all.percent_reduction == 0.0);
  CHECK(all.mem_saved == 0);
  CHECK(all.mem_full == 2 * part.total_params * 4);

  const MemoryReport none = memory_report(part, {}, 4);
  CHECK(none.p_selected == 0);
  CHECK(none.mem_selective == 0);
  CHECK(none.percent_reduction == 100.0);
  CHECK(none.mem_saved == none.mem_full);

  const MemoryReport one = memory_report(part, set_of({1}), 8);
  CHECK(one.p_selected == part.block_param_count(1));
  CHECK(one.mem_selective == 2 * part.block_param_count(1) * 8);
  CHECK(one.percent_reduction ==
        doctest::Approx((1.0 - static_cast<double>(one.p_selected) / one.p_total) * 100.0)
            .epsilon(1e-12));
}

TEST_CASE("optimizer config validation") {
  Model m(small_config(1), 5);
  const BlockPartition part = build_partition(m);
  AdamWConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(SelectiveAdamW(m, part, bad, 4), std::invalid_argument);
  bad = {};
  bad.lr = 0.0;
  CHECK_THROWS_AS(SelectiveAdamW(m, part, bad, 4), std::invalid_argument);
}
