// SPDX-License-Identifier: Apache-2.0
//
// Declarative fine-tuning policies: which groups are frozen, what learning
// rate each group sees, and how the rate evolves over steps and epochs.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ftlab/optim.hpp"
#include "ftlab/param.hpp"

namespace ftlab {

struct FreezePolicy {
  enum class Selector { None, Embed, DepthAtMost, AllButHead };

  Selector selector = Selector::None;
  int max_depth = 0;  // DepthAtMost only

  static FreezePolicy none() { return {}; }
  static FreezePolicy embed() { return {Selector::Embed, 0}; }
  static FreezePolicy depth_at_most(int k) { return {Selector::DepthAtMost, k}; }
  static FreezePolicy all_but_head() { return {Selector::AllButHead, 0}; }
};

FreezeMask resolve_freeze(const FreezePolicy& policy, const ModelState& model);

/// Per-step cosine decay to zero. total_steps == 0 means "the phase's steps".
struct CosineSchedule {
  std::int64_t total_steps = 0;
};

/// Per-epoch exp(c*(1 - t/(T-1))) boost plus head-first unfreezing.
/// total_epochs == 0 means "the phase's epochs".
struct GradualUnfreezeSchedule {
  int total_epochs = 0;
  double c = 3.73;
};

struct ConstantSchedule {};

using Schedule = std::variant<CosineSchedule, GradualUnfreezeSchedule, ConstantSchedule>;

struct LRPolicy {
  double base_lr = 1e-3;
  std::map<LayerRole, double> role_multiplier;
  std::map<GroupId, double> id_multiplier;  // takes precedence over role
  Schedule schedule = CosineSchedule{};
};

struct Phase {
  std::string name;
  OptimizerKind optimizer = SgdConfig{};
  FreezePolicy freeze;
  LRPolicy lr;
  int epochs = 1;
  /// Candidate base rates; a sweep runs index i of every phase together.
  std::vector<double> lr_grid;
};

struct TrainPlan {
  std::string method;
  std::vector<Phase> phases;
};

/// eta0 * (1 + cos(pi*t/T)) / 2. Requires T >= 1 and 0 <= t <= T.
double cosine_lr(double eta0, std::int64_t t, std::int64_t total_steps);

/// exp(c * (1 - t/(T-1))). Requires T >= 2 and 0 <= t <= T-1.
double unfreeze_multiplier(int epoch, int total_epochs, double c = 3.73);

/// Groups still frozen at `epoch` under head-first gradual unfreezing. With
/// L groups, the deepest min(L, 1 + floor(epoch*L/(T-1))) are trainable, so
/// only the head trains at epoch 0 and everything trains from epoch
/// ceil((T-1)(L-1)/L). T == 1 trains everything.
FreezeMask unfreeze_schedule(int epoch, int total_epochs, const ModelState& model);

/// The six-point base-rate grid of the optimizer's family; divided by 10 for
/// the second (full fine-tuning) phase of LP-FT.
std::array<double, 6> lr_grid(const OptimizerKind& kind, bool lpft_phase2 = false);

struct ResolvedStep {
  std::vector<double> group_lr;  // aligned with model.groups, 0 when frozen
  FreezeMask frozen;
  double schedule_factor = 1.0;
};

/// Effective per-group rates and freeze mask for one optimizer step.
/// Throws ftlab::Error when a frozen group is also given a multiplier.
ResolvedStep resolve(const Phase& phase, const ModelState& model, int epoch,
                     std::int64_t step, std::int64_t total_steps);

/// Just the freeze mask `resolve` would produce at `epoch`.
FreezeMask phase_freeze_mask(const Phase& phase, const ModelState& model, int epoch);

/// Supplies the grid for an optimizer family; defaults to lr_grid().
using GridProvider = std::function<std::vector<double>(const OptimizerKind&)>;
std::vector<double> default_grid(const OptimizerKind& kind);

/// Method presets: sgd, sgd-no-momentum, sgd-weight-decay, adamw,
/// sgd-freeze-embed, sgd-freeze-embed-no-momentum, adamw-freeze-embed, lars,
/// lamb, sgd-5x-lower-embed, linear-probe, lp-ft, gradual-unfreeze, and
/// sgd-freeze-depth-<k> for an arbitrary freeze boundary.
TrainPlan make_preset(std::string_view name, int epochs,
                      const GridProvider& grid = default_grid);
const std::vector<std::string>& preset_names();
bool is_preset(std::string_view name);

}  // namespace ftlab
