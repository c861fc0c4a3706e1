// SPDX-License-Identifier: Apache-2.0
//
// SGD, AdamW, LARS and LAMB over per-group flat parameter vectors.
//
// Update rules, per unfrozen group, with per-group learning rate eta:
//
//   SGD    g <- g + wd*theta;  m <- mu*m + g;  theta <- theta - eta*m
//   AdamW  m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
//          mh = m/(1-b1^t);  vh = v/(1-b2^t)
//          theta <- (1-eta*wd)*theta - eta*mh/(sqrt(vh)+eps)
//   LARS   d = g + wd*theta;  r = |theta|/(|d|+eps)  (1 if either norm is 0)
//          m <- mu*m + d;  theta <- theta - eta*r*m
//   LAMB   moments as AdamW;  u = mh/(sqrt(vh)+eps) + wd*theta
//          r = |theta|/|u|  (1 if either norm is 0);  theta <- theta - eta*r*u
//
// t is the step count after increment, so the first step uses t = 1. Norms
// in LARS/LAMB are per group. Frozen groups are never read or written and
// own no moment buffers. A step whose unfrozen gradients contain NaN/Inf is
// rejected before anything is modified.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ftlab/param.hpp"

namespace ftlab {

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 0.0;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// LARS/LAMB defaults mirror SGD/AdamW.
struct LarsConfig {
  double momentum = 0.9;
  double weight_decay = 0.0;
  double trust_eps = 1e-8;
};

struct LambConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

using OptimizerKind = std::variant<SgdConfig, AdamWConfig, LarsConfig, LambConfig>;

/// Learning-rate family: SGD and LARS share one grid, AdamW and LAMB another.
enum class OptimizerFamily { Sgd, AdamW };

OptimizerFamily family(const OptimizerKind& kind);
std::string kind_name(const OptimizerKind& kind);  // "sgd", "adamw", ...
/// Throws ftlab::Error on out-of-range hyperparameters.
void validate(const OptimizerKind& kind);
/// Moment vectors per trainable scalar: 0, 1 or 2.
int moment_count(const OptimizerKind& kind);

struct MomentBuffers {
  GroupId id = 0;
  std::vector<double> m;  // empty when the kind keeps no first moment
  std::vector<double> v;  // empty when the kind keeps no second moment
};

struct OptimizerState {
  OptimizerKind kind;
  std::int64_t step = 0;
  std::vector<MomentBuffers> buffers;  // model order, unfrozen groups only

  const MomentBuffers* find(GroupId id) const;
};

OptimizerState init_state(const OptimizerKind& kind, const ModelState& model,
                          const FreezeMask& freeze_mask);

void sgd_step(OptimizerState& state, ModelState& model,
              const GradientVector& grads, double lr,
              const FreezeMask& freeze_mask);
void adamw_step(OptimizerState& state, ModelState& model,
                const GradientVector& grads, double lr,
                const FreezeMask& freeze_mask);
void lars_step(OptimizerState& state, ModelState& model,
               const GradientVector& grads, double lr,
               const FreezeMask& freeze_mask);
void lamb_step(OptimizerState& state, ModelState& model,
               const GradientVector& grads, double lr,
               const FreezeMask& freeze_mask);

/// Dispatches on state.kind. `group_lr[i]` is the rate for model.groups[i];
/// entries of frozen groups are ignored. Moment buffers of groups that became
/// unfrozen since the last step start at zero; buffers of groups that became
/// frozen are released.
void step(OptimizerState& state, ModelState& model, const GradientVector& grads,
          std::span<const double> group_lr, const FreezeMask& freeze_mask);

/// Same as above with one rate for every group.
void step(OptimizerState& state, ModelState& model, const GradientVector& grads,
          double lr, const FreezeMask& freeze_mask);

}  // namespace ftlab
