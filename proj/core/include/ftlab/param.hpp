// SPDX-License-Identifier: Apache-2.0
//
// Parameter-group data model shared by optimizers, policies, the gradient
// profiler and the toy models. A model is an ordered list of flat real
// vectors, each tagged with a role (embedding, middle, head) and a depth.
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ftlab {

enum class LayerRole { Embed, Middle, Head };

std::string_view to_string(LayerRole role);
/// Accepts "embed", "middle", "head". Throws ftlab::Error otherwise.
LayerRole parse_role(std::string_view text);

using GroupId = int;
using FreezeMask = std::set<GroupId>;

struct ParameterGroup {
  GroupId id = 0;
  std::string name;
  LayerRole role = LayerRole::Middle;
  int depth_index = 0;
  std::vector<double> values;

  std::size_t numel() const noexcept { return values.size(); }
};

struct ModelState {
  std::vector<ParameterGroup> groups;
  std::map<std::string, std::string> metadata;

  /// Position of `id` in `groups`, or nullopt.
  std::optional<std::size_t> index_of(GroupId id) const;
  const ParameterGroup& group(GroupId id) const;
  ParameterGroup& group(GroupId id);
};

/// Per-group gradient vectors, aligned one-to-one with a ModelState.
struct GroupGradient {
  GroupId id = 0;
  std::vector<double> values;
};

struct GradientVector {
  std::vector<GroupGradient> groups;

  /// Zero gradient with the ids and lengths of `model`.
  static GradientVector zeros_like(const ModelState& model);
};

struct Violation {
  std::optional<GroupId> group;  // absent for model-level rules
  std::string rule;
};

/// Empty result means the model is valid. Never throws.
std::vector<Violation> validate_model(const ModelState& model);

/// Throws ftlab::Error describing the first violation, if any.
void require_valid(const ModelState& model);

double group_param_norm(const ParameterGroup& group);

/// Sum of numel, excluding groups in `freeze_mask` when `only_trainable`.
/// Throws ftlab::Error when the mask names an id the model does not have.
std::int64_t total_params(const ModelState& model, bool only_trainable,
                          const FreezeMask& freeze_mask);

/// Throws ftlab::Error unless every id in `mask` belongs to `model`.
void check_mask(const ModelState& model, const FreezeMask& mask);

/// Throws ftlab::Error unless `grads` has the ids and lengths of `model`.
void check_aligned(const ModelState& model, const GradientVector& grads);

}  // namespace ftlab
