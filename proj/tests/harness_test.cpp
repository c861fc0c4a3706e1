// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <random>

#include "ftlab/error.hpp"
#include "ftlab/harness.hpp"
#include "ftlab/kvtext.hpp"
#include "ftlab/memory.hpp"
#include "ftlab/policy.hpp"
#include "support.hpp"

using namespace ftlab;
using testing_support::bytes_equal;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.arch.hidden = {16};
  c.pretrain_steps = 100;
  c.task.n_pretrain = 512;
  c.task.n_train = 96;
  c.task.n_val = 64;
  c.task.n_test = 64;
  c.task.n_ood = 64;
  c.epochs = 3;
  c.batch_size = 32;
  c.grid_sgd = std::vector<double>{0.003, 0.03, 0.3};
  c.grid_adamw = std::vector<double>{3e-4, 3e-3};
  c.record_wall_clock = false;
  return c;
}

const Workbench& bench() {
  static const Workbench b = prepare(small_config(), 3);
  return b;
}

TrialRecord fake(double lr, double val, bool ok = true) {
  TrialRecord r;
  r.lr = lr;
  r.best_val = val;
  r.status = ok ? TrialStatus::Ok : TrialStatus::Diverged;
  return r;
}

}  // namespace

TEST(Harness, ZeroEpochsEvaluatesTheReinitializedModel) {
  Workbench b = bench();
  b.config.epochs = 0;
  const auto r = run_trial(b, "sgd", 0.01);
  EXPECT_TRUE(r.curve.empty());
  EXPECT_EQ(r.early_stop_epoch, -1);
  const auto start = finetune_start(b);
  EXPECT_EQ(r.id_test, toy::accuracy(b.arch, start, b.task.test));
  EXPECT_EQ(r.ood_test, toy::accuracy(b.arch, start, b.task.ood));
  EXPECT_EQ(r.best_val, toy::accuracy(b.arch, start, b.task.val));
}

TEST(Harness, FreezeEmbedKeepsPretrainedEmbedBytes) {
  for (const char* method :
       {"sgd-freeze-embed", "sgd-freeze-embed-no-momentum", "adamw-freeze-embed"}) {
    ModelState final_model;
    Workbench b = bench();
    b.config.last_checkpoint = true;
    const double lr = std::string(method).rfind("adamw", 0) == 0 ? 3e-3 : 0.03;
    run_trial(b, method, lr, &final_model);
    EXPECT_TRUE(bytes_equal(final_model.groups[0].values, b.pretrained.groups[0].values))
        << method;
    EXPECT_FALSE(bytes_equal(final_model.groups[1].values, b.pretrained.groups[1].values));
  }
}

TEST(Harness, ReportedAccuraciesComeFromTheEarlyStopSnapshot) {
  ModelState chosen;
  const auto r = run_trial(bench(), "sgd", 0.03, &chosen);
  ASSERT_EQ(r.curve.size(), 3u);
  const auto best = std::max_element(r.curve.begin(), r.curve.end()) - r.curve.begin();
  EXPECT_EQ(r.early_stop_epoch, best);
  EXPECT_EQ(r.best_val, r.curve[best]);
  EXPECT_EQ(toy::accuracy(bench().arch, chosen, bench().task.val), r.best_val);
  EXPECT_EQ(toy::accuracy(bench().arch, chosen, bench().task.test), r.id_test);
  EXPECT_EQ(toy::accuracy(bench().arch, chosen, bench().task.ood), r.ood_test);
}

TEST(Harness, EarlyStopperPicksFirstArgmax) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> len(1, 12), level(0, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(rng);
    std::vector<double> curve(n);
    for (auto& v : curve) v = level(rng) / 4.0;
    EarlyStopper stop;
    ModelState m = testing_support::layered_model({1, 1, 1});
    for (int e = 0; e < n; ++e) {
      m.groups[0].values[0] = e;
      stop.offer(e, curve[e], m);
    }
    const int expected = int(std::max_element(curve.begin(), curve.end()) - curve.begin());
    ASSERT_EQ(stop.best_epoch(), expected);
    ASSERT_EQ(stop.snapshot().groups[0].values[0], double(expected));
  }
}

TEST(Harness, SelectBestProperty) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> size(1, 8), level(0, 5), coin(0, 4);
  const double grid[] = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1};
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size(rng);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<TrialRecord> records;
    for (int i = 0; i < n; ++i) records.push_back(fake(grid[order[i]], level(rng) / 5.0, coin(rng) != 0));
    std::optional<std::size_t> expected;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].status != TrialStatus::Ok) continue;
      if (!expected || records[i].best_val > records[*expected].best_val ||
          (records[i].best_val == records[*expected].best_val &&
           records[i].lr < records[*expected].lr)) {
        expected = i;
      }
    }
    ASSERT_EQ(select_best(records), expected);
  }
}

TEST(Harness, SelectBestTieGoesToSmallerRate) {
  const std::vector<TrialRecord> r = {fake(0.1, 0.8), fake(0.01, 0.8), fake(0.03, 0.7)};
  EXPECT_EQ(select_best(r), 1u);
  const std::vector<TrialRecord> diverged = {fake(0.1, 0.9, false)};
  EXPECT_FALSE(select_best(diverged).has_value());
}

TEST(Harness, SweepOfOneRate) {
  Workbench b = bench();
  b.config.grid_sgd = std::vector<double>{0.03};
  const auto s = sweep(b, "sgd");
  ASSERT_EQ(s.trials.size(), 1u);
  EXPECT_EQ(s.best, 0u);
  EXPECT_TRUE(s.trials[0].selected);
}

TEST(Harness, SweepIsDeterministicAndParallelSafe) {
  Workbench b = bench();
  const auto first = sweep(b, "sgd");
  const auto second = sweep(b, "sgd");
  b.config.threads = 3;
  const auto parallel = sweep(b, "sgd");
  EXPECT_EQ(first.trials, second.trials);
  EXPECT_EQ(first.trials, parallel.trials);
  EXPECT_EQ(first.best, parallel.best);
  int selected = 0;
  for (const auto& t : first.trials) selected += t.selected;
  EXPECT_EQ(selected, 1);
}

TEST(Harness, MemoryMatchesAccountant) {
  for (const char* method : {"sgd", "adamw", "sgd-freeze-embed-no-momentum", "linear-probe",
                             "lp-ft", "gradual-unfreeze", "lamb"}) {
    const auto plan = make_preset(method, bench().config.epochs, grid_provider(bench().config));
    const auto& last = plan.phases.back();
    const auto r = run_trial(bench(), method, last.lr_grid[1]);
    const auto expected =
        state_bytes(last.optimizer, bench().pretrained,
                    phase_freeze_mask(last, bench().pretrained, last.epochs - 1));
    EXPECT_EQ(r.memory, expected) << method;
  }
}

TEST(Harness, DivergedTrialsAreRecordedAndAllDivergedThrows) {
  Workbench b = bench();
  b.config.grid_sgd = std::vector<double>{0.03, 1e307};
  const auto s = sweep(b, "sgd");
  EXPECT_EQ(s.trials[1].status, TrialStatus::Diverged);
  EXPECT_FALSE(s.trials[1].error.empty());
  EXPECT_EQ(s.best, 0u);
  b.config.grid_sgd = std::vector<double>{1e307};
  EXPECT_THROW(sweep(b, "sgd"), Error);
  EXPECT_THROW(run_trial(bench(), "sgd", 1e307), DivergenceError);
  EXPECT_THROW(run_trial(bench(), "nope", 0.1), Error);
  EXPECT_THROW(run_trial(bench(), "sgd", 0.0), Error);
}

TEST(Harness, FineTuneGoldenAccuracyPair) {
  auto c = small_config();
  c.seeds = {5};
  const auto r = fine_tune(c, 0.03);
  EXPECT_TRUE(r.selected);
  const std::string path = std::string(FTLAB_GOLDEN_DIR) + "/finetune_pair.txt";
  if (std::getenv("FTLAB_REGENERATE_GOLDEN")) {
    kv::Document d;
    d.top.set("schema", "ftlab.golden/1");
    d.top.set("id_test", kv::format_hex(r.id_test));
    d.top.set("ood_test", kv::format_hex(r.ood_test));
    testing_support::write_golden(path, d);
  }
  const auto golden = kv::parse_file(path);
  EXPECT_EQ(r.id_test, kv::to_double(golden.top.require("id_test")));
  EXPECT_EQ(r.ood_test, kv::to_double(golden.top.require("ood_test")));
}

TEST(Harness, ExperimentCardinality) {
  auto c = small_config();
  c.seeds = {1};
  c.experiment_methods = {"sgd"};
  c.arch.input_length = 64;
  const auto m = controlled_experiment(c);
  EXPECT_EQ(m.cells.size(), 4u);
  for (const auto& [key, cell] : m.cells) {
    EXPECT_EQ(cell.seed_count, 1);
    EXPECT_TRUE(cell.errors.empty());
    ASSERT_EQ(cell.best.size(), 1u);
    EXPECT_EQ(cell.best[0].pretrain_optimizer, std::get<0>(key));
    EXPECT_EQ(cell.best[0].stem, std::get<1>(key));
  }
  EXPECT_EQ(m.ratios.size(), 4u);
  EXPECT_EQ(matrix_records(m).size(), 4u);
}

TEST(Harness, ExperimentRecordsFailuresPerCell) {
  auto c = small_config();
  c.seeds = {1};
  c.experiment_methods = {"sgd"};
  c.grid_sgd = std::vector<double>{1e307};
  c.pretrain_lr = 0.01;
  const auto m = controlled_experiment(c);
  for (const auto& [key, cell] : m.cells) {
    EXPECT_EQ(cell.seed_count, 0);
    EXPECT_EQ(cell.errors.size(), 1u);
  }
}
