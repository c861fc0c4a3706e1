// SPDX-License-Identifier: Apache-2.0
//
// Fine-tuning protocol: head re-initialization, per-minibatch optimizer
// steps under a method preset, per-epoch ID-validation with early stopping,
// learning-rate sweeps and the pretrain x stem x method experiment matrix.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ftlab/config.hpp"
#include "ftlab/gradprof.hpp"
#include "ftlab/policy.hpp"
#include "ftlab/records.hpp"
#include "ftlab/stats.hpp"
#include "ftlab/toylab.hpp"
#include "ftlab/toytask.hpp"

namespace ftlab {

/// Everything a trial needs that does not depend on the method or the rate.
struct Workbench {
  RunConfig config;  // effective config (stem and pretraining optimizer set)
  std::uint64_t seed = 0;
  toy::ToyArchitecture arch;
  toy::ToyTask task;
  ModelState pretrained;
};

/// Builds the task for `seed` and the pretrained model: loaded from
/// config.model_path for a file source, otherwise pretrained on the toy task.
Workbench prepare(const RunConfig& config, std::uint64_t seed);

/// reinit_head with the trial's head seed; the starting point of every trial.
ModelState finetune_start(const Workbench& bench);

/// Keeps the values of the best epoch seen so far. Ties keep the earlier one.
class EarlyStopper {
 public:
  /// Returns true when `value` becomes the new best.
  bool offer(int epoch, double value, const ModelState& model);
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }
  /// The snapshot; only valid after a successful offer.
  const ModelState& snapshot() const { return snapshot_; }

 private:
  int best_epoch_ = -1;
  double best_value_ = 0.0;
  ModelState snapshot_;
};

/// One trial at base rate `lr` (the rate of the last phase; earlier phases
/// keep their grid ratio to it). Throws DivergenceError on a non-finite loss.
/// `final_model`, if given, receives the evaluated snapshot.
TrialRecord run_trial(const Workbench& bench, const std::string& method,
                      double lr, ModelState* final_model = nullptr);

/// Same with an explicit plan; epochs and grids come from the plan itself.
TrialRecord run_trial(const Workbench& bench, const TrainPlan& plan, double lr,
                      ModelState* final_model = nullptr);

/// Convenience: prepare(config, config.seeds.front()) then run_trial with
/// config.method. The record is marked selected.
TrialRecord fine_tune(const RunConfig& config, double lr);

struct SweepResult {
  std::size_t best = 0;             // index into trials
  std::vector<TrialRecord> trials;  // grid order; diverged trials included
};

/// Index of the best ok trial: highest best_val, ties to the smaller lr.
/// nullopt when every trial diverged.
std::optional<std::size_t> select_best(std::span<const TrialRecord> trials);

/// Runs `method` at every rate of its grid (last phase), config.threads
/// trials at a time. Throws ftlab::Error when every trial diverged.
SweepResult sweep(const Workbench& bench, const std::string& method);

/// Gradient profile of finetune_start(bench) on the training split.
GradientProfile finetune_profile(const Workbench& bench);

struct MatrixCell {
  int seed_count = 0;  // seeds whose sweep produced a record
  Summary id_test;
  Summary ood_test;
  std::vector<TrialRecord> best;  // one selected record per seed
  std::vector<std::string> errors;
};

using CellKey = std::tuple<std::string, std::string, std::string>;  // pretrain, stem, method
using ModelKey = std::pair<std::string, std::string>;               // pretrain, stem

struct ExperimentMatrix {
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;
  std::map<CellKey, MatrixCell> cells;
  /// embed_outlier_ratio per pretrained model and seed; absent ratios skipped.
  std::map<ModelKey, std::map<std::uint64_t, double>> ratios;
  std::map<ModelKey, std::vector<std::string>> errors;

  std::optional<double> median_ratio(const ModelKey& key) const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// For every seed, pretraining optimizer and stem of the config: pretrain,
/// record the outlier ratio and sweep every method. Trial failures are kept
/// in the cells.
ExperimentMatrix controlled_experiment(const RunConfig& config,
                                       const ProgressFn& progress = {});

/// All selected records of the matrix, in key then seed order.
std::vector<TrialRecord> matrix_records(const ExperimentMatrix& matrix);

}  // namespace ftlab
