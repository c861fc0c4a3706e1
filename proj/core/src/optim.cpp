// SPDX-License-Identifier: Apache-2.0
#include "ftlab/optim.hpp"

#include <cmath>
#include <type_traits>

#include "ftlab/error.hpp"

namespace ftlab {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double l2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

bool needs_first_moment(const OptimizerKind& kind) {
  return moment_count(kind) >= 1;
}

bool needs_second_moment(const OptimizerKind& kind) {
  return moment_count(kind) == 2;
}

// Brings buffers in line with the mask: released for frozen groups, zero
// initialized for unfrozen groups seen for the first time.
void sync_buffers(OptimizerState& state, const ModelState& model,
                  const FreezeMask& mask) {
  const bool want_m = needs_first_moment(state.kind);
  const bool want_v = needs_second_moment(state.kind);
  std::vector<MomentBuffers> next;
  for (const auto& g : model.groups) {
    if (mask.count(g.id) || (!want_m && !want_v)) continue;
    MomentBuffers buf;
    buf.id = g.id;
    for (auto& old : state.buffers) {
      if (old.id == g.id) {
        buf = std::move(old);
        break;
      }
    }
    if (want_m && buf.m.size() != g.numel()) buf.m.assign(g.numel(), 0.0);
    if (want_v && buf.v.size() != g.numel()) buf.v.assign(g.numel(), 0.0);
    next.push_back(std::move(buf));
  }
  state.buffers = std::move(next);
}

MomentBuffers& buffers_for(OptimizerState& state, GroupId id) {
  for (auto& b : state.buffers) {
    if (b.id == id) return b;
  }
  throw Error("no moment buffers for group " + std::to_string(id));
}

// Everything that can reject a step is checked here, before any write.
void precheck(const ModelState& model, const GradientVector& grads,
              std::span<const double> group_lr, const FreezeMask& mask) {
  check_aligned(model, grads);
  check_mask(model, mask);
  if (group_lr.size() != model.groups.size()) {
    throw Error("expected one learning rate per group");
  }
  for (std::size_t i = 0; i < model.groups.size(); ++i) {
    const auto id = model.groups[i].id;
    if (mask.count(id)) continue;
    if (!(group_lr[i] > 0.0) || !std::isfinite(group_lr[i])) {
      throw Error("learning rate for group " + std::to_string(id) +
                  " must be finite and > 0");
    }
    for (double g : grads.groups[i].values) {
      if (!std::isfinite(g)) throw NonFiniteGradient(id);
    }
  }
}

void apply_sgd(const SgdConfig& cfg, OptimizerState& state, ModelState& model,
               const GradientVector& grads, std::span<const double> lrs,
               const FreezeMask& mask) {
  for (std::size_t i = 0; i < model.groups.size(); ++i) {
    auto& grp = model.groups[i];
    if (mask.count(grp.id)) continue;
    auto& theta = grp.values;
    const auto& g = grads.groups[i].values;
    const double lr = lrs[i];
    if (cfg.momentum == 0.0) {
      for (std::size_t k = 0; k < theta.size(); ++k) {
        const double d = g[k] + cfg.weight_decay * theta[k];
        theta[k] -= lr * d;
      }
      continue;
    }
    auto& m = buffers_for(state, grp.id).m;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double d = g[k] + cfg.weight_decay * theta[k];
      m[k] = cfg.momentum * m[k] + d;
      theta[k] -= lr * m[k];
    }
  }
}

struct AdamTerms {
  double bc1;
  double bc2;
};

AdamTerms bias_corrections(double beta1, double beta2, std::int64_t t) {
  return {1.0 - std::pow(beta1, double(t)), 1.0 - std::pow(beta2, double(t))};
}

void apply_adamw(const AdamWConfig& cfg, OptimizerState& state,
                 ModelState& model, const GradientVector& grads,
                 std::span<const double> lrs, const FreezeMask& mask) {
  const auto bc = bias_corrections(cfg.beta1, cfg.beta2, state.step);
  for (std::size_t i = 0; i < model.groups.size(); ++i) {
    auto& grp = model.groups[i];
    if (mask.count(grp.id)) continue;
    auto& buf = buffers_for(state, grp.id);
    auto& theta = grp.values;
    const auto& g = grads.groups[i].values;
    const double lr = lrs[i];
    const double decay = 1.0 - lr * cfg.weight_decay;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      buf.m[k] = cfg.beta1 * buf.m[k] + (1.0 - cfg.beta1) * g[k];
      buf.v[k] = cfg.beta2 * buf.v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = buf.m[k] / bc.bc1;
      const double vhat = buf.v[k] / bc.bc2;
      theta[k] = decay * theta[k] - lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void apply_lars(const LarsConfig& cfg, OptimizerState& state,
                ModelState& model, const GradientVector& grads,
                std::span<const double> lrs, const FreezeMask& mask) {
  std::vector<double> d;
  for (std::size_t i = 0; i < model.groups.size(); ++i) {
    auto& grp = model.groups[i];
    if (mask.count(grp.id)) continue;
    auto& theta = grp.values;
    const auto& g = grads.groups[i].values;
    d.resize(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
      d[k] = g[k] + cfg.weight_decay * theta[k];
    }
    const double theta_norm = l2(theta);
    const double d_norm = l2(d);
    const double trust = (theta_norm > 0.0 && d_norm > 0.0)
                             ? theta_norm / (d_norm + cfg.trust_eps)
                             : 1.0;
    auto& m = buffers_for(state, grp.id).m;
    const double scale = lrs[i] * trust;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = cfg.momentum * m[k] + d[k];
      theta[k] -= scale * m[k];
    }
  }
}

void apply_lamb(const LambConfig& cfg, OptimizerState& state,
                ModelState& model, const GradientVector& grads,
                std::span<const double> lrs, const FreezeMask& mask) {
  const auto bc = bias_corrections(cfg.beta1, cfg.beta2, state.step);
  std::vector<double> dir;
  for (std::size_t i = 0; i < model.groups.size(); ++i) {
    auto& grp = model.groups[i];
    if (mask.count(grp.id)) continue;
    auto& buf = buffers_for(state, grp.id);
    auto& theta = grp.values;
    const auto& g = grads.groups[i].values;
    dir.resize(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
      buf.m[k] = cfg.beta1 * buf.m[k] + (1.0 - cfg.beta1) * g[k];
      buf.v[k] = cfg.beta2 * buf.v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = buf.m[k] / bc.bc1;
      const double vhat = buf.v[k] / bc.bc2;
      dir[k] = mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * theta[k];
    }
    const double theta_norm = l2(theta);
    const double dir_norm = l2(dir);
    const double trust =
        (theta_norm > 0.0 && dir_norm > 0.0) ? theta_norm / dir_norm : 1.0;
    const double scale = lrs[i] * trust;
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= scale * dir[k];
  }
}

template <class Config>
void require_kind(const OptimizerState& state, const char* op) {
  if (!std::holds_alternative<Config>(state.kind)) {
    throw Error(std::string(op) + " called on a " + kind_name(state.kind) +
                " state");
  }
}

}  // namespace

OptimizerFamily family(const OptimizerKind& kind) {
  return std::visit(
      overloaded{[](const SgdConfig&) { return OptimizerFamily::Sgd; },
                 [](const LarsConfig&) { return OptimizerFamily::Sgd; },
                 [](const AdamWConfig&) { return OptimizerFamily::AdamW; },
                 [](const LambConfig&) { return OptimizerFamily::AdamW; }},
      kind);
}

std::string kind_name(const OptimizerKind& kind) {
  return std::visit(overloaded{[](const SgdConfig&) { return "sgd"; },
                               [](const AdamWConfig&) { return "adamw"; },
                               [](const LarsConfig&) { return "lars"; },
                               [](const LambConfig&) { return "lamb"; }},
                    kind);
}

void validate(const OptimizerKind& kind) {
  auto unit = [](double x) { return x >= 0.0 && x < 1.0; };
  auto nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  auto fail = [&](const char* what) {
    throw Error(kind_name(kind) + ": " + what);
  };
  std::visit(
      overloaded{
          [&](const SgdConfig& c) {
            if (!unit(c.momentum)) fail("momentum must be in [0, 1)");
            if (!nonneg(c.weight_decay)) fail("weight_decay must be >= 0");
          },
          [&](const AdamWConfig& c) {
            if (!unit(c.beta1) || !unit(c.beta2)) fail("betas must be in [0, 1)");
            if (!(c.eps > 0.0)) fail("eps must be > 0");
            if (!nonneg(c.weight_decay)) fail("weight_decay must be >= 0");
          },
          [&](const LarsConfig& c) {
            if (!unit(c.momentum)) fail("momentum must be in [0, 1)");
            if (!nonneg(c.weight_decay)) fail("weight_decay must be >= 0");
            if (!nonneg(c.trust_eps)) fail("trust_eps must be >= 0");
          },
          [&](const LambConfig& c) {
            if (!unit(c.beta1) || !unit(c.beta2)) fail("betas must be in [0, 1)");
            if (!(c.eps > 0.0)) fail("eps must be > 0");
            if (!nonneg(c.weight_decay)) fail("weight_decay must be >= 0");
          }},
      kind);
}

int moment_count(const OptimizerKind& kind) {
  return std::visit(
      overloaded{[](const SgdConfig& c) { return c.momentum > 0.0 ? 1 : 0; },
                 [](const LarsConfig&) { return 1; },
                 [](const AdamWConfig&) { return 2; },
                 [](const LambConfig&) { return 2; }},
      kind);
}

const MomentBuffers* OptimizerState::find(GroupId id) const {
  for (const auto& b : buffers) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

OptimizerState init_state(const OptimizerKind& kind, const ModelState& model,
                          const FreezeMask& freeze_mask) {
  validate(kind);
  check_mask(model, freeze_mask);
  OptimizerState state{kind, 0, {}};
  sync_buffers(state, model, freeze_mask);
  return state;
}

void step(OptimizerState& state, ModelState& model, const GradientVector& grads,
          std::span<const double> group_lr, const FreezeMask& freeze_mask) {
  precheck(model, grads, group_lr, freeze_mask);
  sync_buffers(state, model, freeze_mask);
  state.step += 1;
  std::visit(
      [&](const auto& cfg) {
        using T = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<T, SgdConfig>) {
          apply_sgd(cfg, state, model, grads, group_lr, freeze_mask);
        } else if constexpr (std::is_same_v<T, AdamWConfig>) {
          apply_adamw(cfg, state, model, grads, group_lr, freeze_mask);
        } else if constexpr (std::is_same_v<T, LarsConfig>) {
          apply_lars(cfg, state, model, grads, group_lr, freeze_mask);
        } else {
          apply_lamb(cfg, state, model, grads, group_lr, freeze_mask);
        }
      },
      state.kind);
}

void step(OptimizerState& state, ModelState& model, const GradientVector& grads,
          double lr, const FreezeMask& freeze_mask) {
  std::vector<double> lrs(model.groups.size(), lr);
  step(state, model, grads, lrs, freeze_mask);
}

void sgd_step(OptimizerState& state, ModelState& model,
              const GradientVector& grads, double lr,
              const FreezeMask& freeze_mask) {
  require_kind<SgdConfig>(state, "sgd_step");
  step(state, model, grads, lr, freeze_mask);
}

void adamw_step(OptimizerState& state, ModelState& model,
                const GradientVector& grads, double lr,
                const FreezeMask& freeze_mask) {
  require_kind<AdamWConfig>(state, "adamw_step");
  step(state, model, grads, lr, freeze_mask);
}

void lars_step(OptimizerState& state, ModelState& model,
               const GradientVector& grads, double lr,
               const FreezeMask& freeze_mask) {
  require_kind<LarsConfig>(state, "lars_step");
  step(state, model, grads, lr, freeze_mask);
}

void lamb_step(OptimizerState& state, ModelState& model,
               const GradientVector& grads, double lr,
               const FreezeMask& freeze_mask) {
  require_kind<LambConfig>(state, "lamb_step");
  step(state, model, grads, lr, freeze_mask);
}

}  // namespace ftlab
