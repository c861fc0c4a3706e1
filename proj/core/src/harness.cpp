// SPDX-License-Identifier: Apache-2.0
#include "ftlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "ftlab/error.hpp"
#include "ftlab/memory.hpp"
#include "ftlab/model_io.hpp"
#include "ftlab/policy.hpp"
#include "ftlab/rng.hpp"

namespace ftlab {
namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
// by index is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto workers = std::min<std::size_t>(std::max(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (auto i = next++; i < n; i = next++) guarded(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool all_finite(const ModelState& model) {
  for (const auto& g : model.groups) {
    for (double v : g.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

// Mask in force at the end of the plan; depends only on the model's layout.
MemoryReport plan_memory(const TrainPlan& plan, const ModelState& model) {
  const Phase& last = plan.phases.back();
  const int epoch = std::max(last.epochs - 1, 0);
  return state_bytes(last.optimizer, model, phase_freeze_mask(last, model, epoch));
}

TrialRecord base_record(const Workbench& bench, const std::string& method, double lr) {
  TrialRecord r;
  r.digest = config_digest(bench.config, method, bench.seed);
  r.method = method;
  r.task = bench.config.task_name;
  r.seed = bench.seed;
  const auto it = bench.pretrained.metadata.find("pretrain_optimizer");
  r.pretrain_optimizer = it == bench.pretrained.metadata.end() ? "unknown" : it->second;
  r.stem = bench.arch.stem_name();
  r.lr = lr;
  return r;
}

}  // namespace

Workbench prepare(const RunConfig& config, std::uint64_t seed) {
  validate(config);
  Workbench b;
  b.config = config;
  b.seed = seed;
  if (config.model_source == RunConfig::ModelSource::File) {
    b.pretrained = load_model(config.model_path);
    require_valid(b.pretrained);
    b.arch = toy::arch_from_metadata(b.pretrained.metadata);
    b.config.arch = b.arch;
    const auto it = b.pretrained.metadata.find("pretrain_optimizer");
    if (it != b.pretrained.metadata.end()) b.config.pretrain_optimizer = it->second;
    b.task = toy::make_task(task_for_seed(b.config, seed));
    return b;
  }
  b.arch = config.arch;
  b.task = toy::make_task(task_for_seed(config, seed));
  const auto kind = pretrain_kind(config.pretrain_optimizer);
  toy::PretrainOptions opts;
  opts.steps = config.pretrain_steps;
  opts.batch_size = config.pretrain_batch_size;
  opts.lr = pretrain_lr(config, kind);
  b.pretrained = toy::pretrain(b.arch, kind, b.task, opts, seed);
  return b;
}

ModelState finetune_start(const Workbench& bench) {
  return toy::reinit_head(bench.pretrained, derive_seed(bench.seed, "head-reinit"));
}

bool EarlyStopper::offer(int epoch, double value, const ModelState& model) {
  if (best_epoch_ >= 0 && !(value > best_value_)) return false;
  best_epoch_ = epoch;
  best_value_ = value;
  snapshot_ = model;
  return true;
}

TrialRecord run_trial(const Workbench& bench, const std::string& method, double lr,
                      ModelState* final_model) {
  return run_trial(bench, make_preset(method, bench.config.epochs, grid_provider(bench.config)),
                   lr, final_model);
}

TrialRecord run_trial(const Workbench& bench, const TrainPlan& plan, double lr,
                      ModelState* final_model) {
  if (!(lr > 0.0)) throw Error("fine-tune: learning rate must be > 0");
  if (plan.phases.empty()) throw Error("fine-tune: plan has no phases");
  const auto start = std::chrono::steady_clock::now();
  const RunConfig& config = bench.config;
  const std::string& method = plan.method;
  const auto& arch = bench.arch;
  const auto& train = bench.task.train;

  ModelState model = finetune_start(bench);
  TrialRecord rec = base_record(bench, method, lr);
  rec.memory = plan_memory(plan, model);

  const std::size_t n = train.size();
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const std::int64_t steps_per_epoch = std::int64_t((n + bs - 1) / bs);
  Rng order_rng(derive_seed(bench.seed, "finetune-order"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> inputs;
  std::vector<int> labels;

  EarlyStopper stopper;
  const Phase& last = plan.phases.back();
  int global_epoch = 0;
  for (Phase phase : plan.phases) {
    phase.lr.base_lr = phase.lr_grid.empty() || last.lr_grid.empty()
                           ? lr
                           : lr * phase.lr_grid.front() / last.lr_grid.front();
    const std::int64_t total = std::int64_t(phase.epochs) * steps_per_epoch;
    OptimizerState state =
        init_state(phase.optimizer, model, phase_freeze_mask(phase, model, 0));
    std::int64_t t = 0;
    for (int e = 0; e < phase.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), order_rng);
      for (std::int64_t b = 0; b < steps_per_epoch; ++b) {
        const std::size_t lo = std::size_t(b) * bs;
        const std::span<const std::size_t> idx(order.data() + lo, std::min(bs, n - lo));
        train.gather(idx, inputs, labels);
        const auto resolved = resolve(phase, model, e, t, total);
        auto ev = toy::loss_and_gradient(arch, model, inputs, labels);
        if (!std::isfinite(ev.loss)) {
          throw DivergenceError(method + " at lr " + kv::format_double(lr) +
                                " diverged in epoch " + std::to_string(global_epoch));
        }
        try {
          step(state, model, ev.grad, resolved.group_lr, resolved.frozen);
        } catch (const NonFiniteGradient& err) {
          throw DivergenceError(method + " at lr " + kv::format_double(lr) + ": " +
                                err.what());
        }
        ++t;
      }
      if (!all_finite(model)) {
        throw DivergenceError(method + " at lr " + kv::format_double(lr) +
                              " produced non-finite weights in epoch " +
                              std::to_string(global_epoch));
      }
      const double val = toy::accuracy(arch, model, bench.task.val);
      rec.curve.push_back(val);
      stopper.offer(global_epoch, val, model);
      ++global_epoch;
    }
  }

  const bool use_final = config.last_checkpoint || rec.curve.empty();
  const ModelState& chosen = use_final ? model : stopper.snapshot();
  rec.early_stop_epoch = stopper.best_epoch();
  rec.best_val = rec.curve.empty() ? toy::accuracy(arch, model, bench.task.val)
                                   : stopper.best_value();
  rec.id_test = toy::accuracy(arch, chosen, bench.task.test);
  rec.ood_test = toy::accuracy(arch, chosen, bench.task.ood);
  if (config.record_wall_clock) {
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                           .count();
  }
  if (final_model) *final_model = chosen;
  return rec;
}

TrialRecord fine_tune(const RunConfig& config, double lr) {
  const auto bench = prepare(config, config.seeds.front());
  auto rec = run_trial(bench, config.method, lr);
  rec.selected = true;
  return rec;
}

std::optional<std::size_t> select_best(std::span<const TrialRecord> trials) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    if (t.status != TrialStatus::Ok) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = trials[*best];
    if (t.best_val > b.best_val || (t.best_val == b.best_val && t.lr < b.lr)) best = i;
  }
  return best;
}

SweepResult sweep(const Workbench& bench, const std::string& method) {
  const TrainPlan plan = make_preset(method, bench.config.epochs, grid_provider(bench.config));
  const auto& grid = plan.phases.back().lr_grid;
  SweepResult out;
  out.trials.resize(grid.size());
  parallel_for(grid.size(), bench.config.threads, [&](std::size_t i) {
    try {
      out.trials[i] = run_trial(bench, method, grid[i]);
    } catch (const DivergenceError& e) {
      TrialRecord r = base_record(bench, method, grid[i]);
      r.memory = plan_memory(plan, bench.pretrained);
      r.status = TrialStatus::Diverged;
      r.error = e.what();
      out.trials[i] = std::move(r);
    }
  });
  const auto best = select_best(out.trials);
  if (!best) throw Error("sweep: every trial of " + method + " diverged");
  out.best = *best;
  out.trials[out.best].selected = true;
  return out;
}

GradientProfile finetune_profile(const Workbench& bench) {
  const auto& train = bench.task.train;
  ProfileOptions opts;
  opts.batch_size = bench.config.batch_size;
  opts.num_batches = bench.config.profile_batches > 0
                         ? bench.config.profile_batches
                         : int(train.size() / std::size_t(opts.batch_size));
  opts.seed = derive_seed(bench.seed, "profile");
  opts.threads = 1;
  return profile(finetune_start(bench), train.size(), toy::make_objective(bench.arch, train),
                 opts);
}

std::optional<double> ExperimentMatrix::median_ratio(const ModelKey& key) const {
  const auto it = ratios.find(key);
  if (it == ratios.end() || it->second.empty()) return std::nullopt;
  std::vector<double> values;
  for (const auto& [seed, r] : it->second) values.push_back(r);
  return median(values);
}

ExperimentMatrix controlled_experiment(const RunConfig& config, const ProgressFn& progress) {
  validate(config);
  if (config.model_source != RunConfig::ModelSource::Toy) {
    throw Error("experiment: needs the toy model source");
  }
  ExperimentMatrix m;
  m.seeds = config.seeds;
  m.methods = config.experiment_methods;

  struct Unit {
    std::uint64_t seed;
    std::string pretrain;
    std::string stem;
    std::optional<double> ratio;
    std::vector<std::string> model_errors;
    std::vector<std::optional<TrialRecord>> best;  // per method
    std::vector<std::string> method_errors;        // per method, empty when ok
  };
  std::vector<Unit> units;
  for (auto seed : config.seeds) {
    for (const auto& p : config.experiment_pretrain) {
      for (const auto& s : config.experiment_stems) {
        Unit u{seed, p, s, std::nullopt, {}, {}, {}};
        u.best.resize(m.methods.size());
        u.method_errors.resize(m.methods.size());
        units.push_back(std::move(u));
      }
    }
  }

  std::mutex progress_mutex;
  auto report = [&](const std::string& line) {
    if (!progress) return;
    std::lock_guard lock(progress_mutex);
    progress(line);
  };

  parallel_for(units.size(), config.threads, [&](std::size_t i) {
    Unit& u = units[i];
    RunConfig c = config;
    c.pretrain_optimizer = u.pretrain;
    c.arch = arch_with_stem(config, u.stem);
    c.threads = 1;
    const std::string tag = "seed " + std::to_string(u.seed) + " " + u.pretrain + "/" + u.stem;
    Workbench bench;
    try {
      bench = prepare(c, u.seed);
    } catch (const Error& e) {
      u.model_errors.push_back(tag + ": " + e.what());
      for (auto& err : u.method_errors) err = tag + ": pretraining failed";
      report(tag + ": " + e.what());
      return;
    }
    try {
      u.ratio = embed_outlier_ratio(finetune_profile(bench), c.profile_normalization);
    } catch (const Error& e) {
      u.model_errors.push_back(tag + ": " + e.what());
    }
    for (std::size_t k = 0; k < m.methods.size(); ++k) {
      try {
        auto res = sweep(bench, m.methods[k]);
        u.best[k] = res.trials[res.best];
      } catch (const Error& e) {
        u.method_errors[k] = tag + ": " + e.what();
      }
    }
    report(tag + " done");
  });

  for (const auto& u : units) {
    const ModelKey mk{u.pretrain, u.stem};
    auto& ratio_col = m.ratios[mk];
    auto& errs = m.errors[mk];
    if (u.ratio) ratio_col[u.seed] = *u.ratio;
    errs.insert(errs.end(), u.model_errors.begin(), u.model_errors.end());
    for (std::size_t k = 0; k < m.methods.size(); ++k) {
      auto& cell = m.cells[CellKey{u.pretrain, u.stem, m.methods[k]}];
      if (u.best[k]) cell.best.push_back(*u.best[k]);
      if (!u.method_errors[k].empty()) cell.errors.push_back(u.method_errors[k]);
    }
  }
  for (auto& [key, cell] : m.cells) {
    std::vector<double> id, ood;
    for (const auto& r : cell.best) {
      id.push_back(r.id_test);
      ood.push_back(r.ood_test);
    }
    cell.seed_count = int(cell.best.size());
    cell.id_test = summarize(id);
    cell.ood_test = summarize(ood);
  }
  return m;
}

std::vector<TrialRecord> matrix_records(const ExperimentMatrix& matrix) {
  std::vector<TrialRecord> out;
  for (const auto& [key, cell] : matrix.cells) {
    out.insert(out.end(), cell.best.begin(), cell.best.end());
  }
  return out;
}

}  // namespace ftlab
