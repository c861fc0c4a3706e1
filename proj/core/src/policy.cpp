// SPDX-License-Identifier: Apache-2.0
#include "ftlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ftlab/error.hpp"

namespace ftlab {

FreezeMask resolve_freeze(const FreezePolicy& policy, const ModelState& model) {
  FreezeMask mask;
  for (const auto& g : model.groups) {
    bool frozen = false;
    switch (policy.selector) {
      case FreezePolicy::Selector::None:
        break;
      case FreezePolicy::Selector::Embed:
        frozen = g.role == LayerRole::Embed;
        break;
      case FreezePolicy::Selector::DepthAtMost:
        frozen = g.depth_index <= policy.max_depth;
        break;
      case FreezePolicy::Selector::AllButHead:
        frozen = g.role != LayerRole::Head;
        break;
    }
    if (frozen) mask.insert(g.id);
  }
  return mask;
}

double cosine_lr(double eta0, std::int64_t t, std::int64_t total_steps) {
  if (total_steps < 1) throw Error("cosine_lr: total steps must be >= 1");
  if (t < 0 || t > total_steps) {
    throw Error("cosine_lr: step " + std::to_string(t) + " outside [0, " +
                std::to_string(total_steps) + "]");
  }
  if (t == total_steps) return 0.0;
  const double phase = std::numbers::pi * double(t) / double(total_steps);
  return eta0 * 0.5 * (1.0 + std::cos(phase));
}

double unfreeze_multiplier(int epoch, int total_epochs, double c) {
  if (total_epochs < 2) throw Error("unfreeze_multiplier: T must be >= 2");
  if (epoch < 0 || epoch > total_epochs - 1) {
    throw Error("unfreeze_multiplier: epoch out of range");
  }
  return std::exp(c * (1.0 - double(epoch) / double(total_epochs - 1)));
}

FreezeMask unfreeze_schedule(int epoch, int total_epochs, const ModelState& model) {
  if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs) {
    throw Error("unfreeze_schedule: epoch out of range");
  }
  const auto L = static_cast<std::int64_t>(model.groups.size());
  std::int64_t trainable = L;
  if (total_epochs > 1) {
    trainable = std::min<std::int64_t>(L, 1 + std::int64_t(epoch) * L /
                                                  (total_epochs - 1));
  }
  FreezeMask mask;
  for (std::int64_t i = 0; i < L - trainable; ++i) mask.insert(model.groups[i].id);
  return mask;
}

std::array<double, 6> lr_grid(const OptimizerKind& kind, bool lpft_phase2) {
  std::array<double, 6> grid =
      family(kind) == OptimizerFamily::Sgd
          ? std::array<double, 6>{3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2}
          : std::array<double, 6>{3e-7, 1e-6, 3e-6, 1e-5, 3e-5, 1e-4};
  if (lpft_phase2) {
    for (auto& v : grid) v /= 10.0;
  }
  return grid;
}

std::vector<double> default_grid(const OptimizerKind& kind) {
  auto g = lr_grid(kind, false);
  return {g.begin(), g.end()};
}

namespace {

double schedule_factor(const Schedule& schedule, const Phase& phase, int epoch,
                       std::int64_t step, std::int64_t total_steps) {
  if (const auto* cos = std::get_if<CosineSchedule>(&schedule)) {
    const std::int64_t T = cos->total_steps > 0 ? cos->total_steps : total_steps;
    return cosine_lr(1.0, step, T);
  }
  if (const auto* gu = std::get_if<GradualUnfreezeSchedule>(&schedule)) {
    const int T = gu->total_epochs > 0 ? gu->total_epochs : phase.epochs;
    if (T == 1) return 1.0;
    return unfreeze_multiplier(epoch, T, gu->c);
  }
  return 1.0;
}

}  // namespace

FreezeMask phase_freeze_mask(const Phase& phase, const ModelState& model, int epoch) {
  FreezeMask mask = resolve_freeze(phase.freeze, model);
  if (const auto* gu = std::get_if<GradualUnfreezeSchedule>(&phase.lr.schedule)) {
    const int T = gu->total_epochs > 0 ? gu->total_epochs : phase.epochs;
    if (T > 0) {
      auto extra = unfreeze_schedule(epoch, T, model);
      mask.insert(extra.begin(), extra.end());
    }
  }
  return mask;
}

ResolvedStep resolve(const Phase& phase, const ModelState& model, int epoch,
                     std::int64_t step, std::int64_t total_steps) {
  if (!(phase.lr.base_lr > 0.0)) throw Error("resolve: base_lr must be > 0");
  ResolvedStep out;
  out.frozen = phase_freeze_mask(phase, model, epoch);
  out.schedule_factor = schedule_factor(phase.lr.schedule, phase, epoch, step,
                                        total_steps);

  for (const auto& [id, mult] : phase.lr.id_multiplier) {
    if (!model.index_of(id)) {
      throw Error("resolve: multiplier for unknown group " + std::to_string(id));
    }
    if (!(mult > 0.0)) throw Error("resolve: multipliers must be > 0");
  }
  for (const auto& [role, mult] : phase.lr.role_multiplier) {
    if (!(mult > 0.0)) throw Error("resolve: multipliers must be > 0");
  }

  out.group_lr.reserve(model.groups.size());
  for (const auto& g : model.groups) {
    const auto by_id = phase.lr.id_multiplier.find(g.id);
    const auto by_role = phase.lr.role_multiplier.find(g.role);
    const bool has_mult = by_id != phase.lr.id_multiplier.end() ||
                          by_role != phase.lr.role_multiplier.end();
    if (out.frozen.count(g.id)) {
      if (has_mult) {
        throw Error("resolve: group " + std::to_string(g.id) + " (" + g.name +
                    ") is frozen and also given a learning-rate multiplier");
      }
      out.group_lr.push_back(0.0);
      continue;
    }
    double mult = 1.0;
    if (by_id != phase.lr.id_multiplier.end()) {
      mult = by_id->second;
    } else if (by_role != phase.lr.role_multiplier.end()) {
      mult = by_role->second;
    }
    out.group_lr.push_back(phase.lr.base_lr * out.schedule_factor * mult);
  }
  return out;
}

namespace {

Phase single_phase(std::string name, OptimizerKind kind, FreezePolicy freeze,
                   int epochs, const GridProvider& grid) {
  Phase p;
  p.name = std::move(name);
  p.optimizer = kind;
  p.freeze = freeze;
  p.epochs = epochs;
  p.lr_grid = grid(kind);
  if (p.lr_grid.empty()) throw Error("empty learning-rate grid");
  p.lr.base_lr = p.lr_grid.front();
  return p;
}

const SgdConfig kSgd{0.9, 0.0};
const SgdConfig kSgdNoMomentum{0.0, 0.0};

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "sgd",
      "sgd-no-momentum",
      "sgd-weight-decay",
      "adamw",
      "sgd-freeze-embed",
      "sgd-freeze-embed-no-momentum",
      "adamw-freeze-embed",
      "lars",
      "lamb",
      "sgd-5x-lower-embed",
      "linear-probe",
      "lp-ft",
      "gradual-unfreeze",
  };
  return names;
}

bool is_preset(std::string_view name) {
  if (name.rfind("sgd-freeze-depth-", 0) == 0) return true;
  const auto& names = preset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

TrainPlan make_preset(std::string_view name, int epochs, const GridProvider& grid) {
  if (epochs < 0) throw Error("epochs must be >= 0");
  const std::string method(name);
  TrainPlan plan{method, {}};
  auto one = [&](OptimizerKind kind, FreezePolicy freeze) {
    plan.phases.push_back(single_phase(method, kind, freeze, epochs, grid));
  };

  if (name == "sgd") {
    one(kSgd, FreezePolicy::none());
  } else if (name == "sgd-no-momentum") {
    one(kSgdNoMomentum, FreezePolicy::none());
  } else if (name == "sgd-weight-decay") {
    one(SgdConfig{0.9, 0.01}, FreezePolicy::none());
  } else if (name == "adamw") {
    one(AdamWConfig{}, FreezePolicy::none());
  } else if (name == "sgd-freeze-embed") {
    one(kSgd, FreezePolicy::embed());
  } else if (name == "sgd-freeze-embed-no-momentum") {
    one(kSgdNoMomentum, FreezePolicy::embed());
  } else if (name == "adamw-freeze-embed") {
    one(AdamWConfig{}, FreezePolicy::embed());
  } else if (name == "lars") {
    one(LarsConfig{}, FreezePolicy::none());
  } else if (name == "lamb") {
    one(LambConfig{}, FreezePolicy::none());
  } else if (name == "sgd-5x-lower-embed") {
    one(kSgd, FreezePolicy::none());
    plan.phases.back().lr.role_multiplier[LayerRole::Embed] = 0.2;
  } else if (name == "linear-probe") {
    one(kSgd, FreezePolicy::all_but_head());
  } else if (name == "lp-ft") {
    auto probe = single_phase("linear-probe", kSgd, FreezePolicy::all_but_head(),
                              epochs, grid);
    auto full = single_phase("fine-tune", kSgd, FreezePolicy::none(), epochs, grid);
    for (auto& v : full.lr_grid) v /= 10.0;
    full.lr.base_lr = full.lr_grid.front();
    plan.phases.push_back(std::move(probe));
    plan.phases.push_back(std::move(full));
  } else if (name == "gradual-unfreeze") {
    one(kSgd, FreezePolicy::none());
    plan.phases.back().lr.schedule = GradualUnfreezeSchedule{};
  } else if (name.rfind("sgd-freeze-depth-", 0) == 0) {
    const auto digits = name.substr(std::string_view("sgd-freeze-depth-").size());
    int k = 0;
    if (digits.empty()) throw Error("sgd-freeze-depth-<k> needs a depth");
    for (char c : digits) {
      if (c < '0' || c > '9') throw Error("bad freeze depth in '" + method + "'");
      k = k * 10 + (c - '0');
    }
    one(kSgd, FreezePolicy::depth_at_most(k));
  } else {
    throw Error("unknown method preset '" + method + "'");
  }
  return plan;
}

}  // namespace ftlab
