// SPDX-License-Identifier: Apache-2.0
#include "ftlab/param.hpp"

#include <cmath>
#include <unordered_set>

#include "ftlab/error.hpp"

namespace ftlab {

std::string_view to_string(LayerRole role) {
  switch (role) {
    case LayerRole::Embed:
      return "embed";
    case LayerRole::Middle:
      return "middle";
    case LayerRole::Head:
      return "head";
  }
  return "middle";
}

LayerRole parse_role(std::string_view text) {
  if (text == "embed") return LayerRole::Embed;
  if (text == "middle") return LayerRole::Middle;
  if (text == "head") return LayerRole::Head;
  throw Error("unknown layer role '" + std::string(text) + "'");
}

std::optional<std::size_t> ModelState::index_of(GroupId id) const {
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].id == id) return i;
  }
  return std::nullopt;
}

const ParameterGroup& ModelState::group(GroupId id) const {
  auto idx = index_of(id);
  if (!idx) throw Error("no group with id " + std::to_string(id));
  return groups[*idx];
}

ParameterGroup& ModelState::group(GroupId id) {
  auto idx = index_of(id);
  if (!idx) throw Error("no group with id " + std::to_string(id));
  return groups[*idx];
}

GradientVector GradientVector::zeros_like(const ModelState& model) {
  GradientVector g;
  g.groups.reserve(model.groups.size());
  for (const auto& grp : model.groups) {
    g.groups.push_back({grp.id, std::vector<double>(grp.numel(), 0.0)});
  }
  return g;
}

std::vector<Violation> validate_model(const ModelState& model) {
  std::vector<Violation> out;
  std::unordered_set<GroupId> seen;
  int embed_count = 0;
  int head_count = 0;

  for (std::size_t i = 0; i < model.groups.size(); ++i) {
    const auto& g = model.groups[i];
    if (!seen.insert(g.id).second) {
      out.push_back({g.id, "duplicate id " + std::to_string(g.id)});
    }
    if (g.values.empty()) out.push_back({g.id, "numel must be >= 1"});
    for (double v : g.values) {
      if (!std::isfinite(v)) {
        out.push_back({g.id, "non-finite value"});
        break;
      }
    }
    if (g.depth_index < 0) out.push_back({g.id, "negative depth_index"});
    if (i > 0 && g.depth_index <= model.groups[i - 1].depth_index) {
      out.push_back({g.id, "depth_index not strictly increasing"});
    }
    if (g.role == LayerRole::Embed) ++embed_count;
    if (g.role == LayerRole::Head) ++head_count;
  }

  if (embed_count == 0) out.push_back({std::nullopt, "missing embed"});
  if (head_count == 0) out.push_back({std::nullopt, "missing head"});
  if (head_count > 1) out.push_back({std::nullopt, "more than one head"});

  // Embed groups must precede everything else; the head must come last.
  bool past_embed = false;
  for (const auto& g : model.groups) {
    if (g.role != LayerRole::Embed) {
      past_embed = true;
    } else if (past_embed) {
      out.push_back({g.id, "embed group deeper than a non-embed group"});
    }
  }
  if (head_count == 1 && model.groups.back().role != LayerRole::Head) {
    for (const auto& g : model.groups) {
      if (g.role == LayerRole::Head) {
        out.push_back({g.id, "head is not the deepest group"});
      }
    }
  }
  return out;
}

void require_valid(const ModelState& model) {
  auto violations = validate_model(model);
  if (violations.empty()) return;
  const auto& v = violations.front();
  std::string msg = "invalid model: " + v.rule;
  if (v.group) msg += " (group " + std::to_string(*v.group) + ")";
  throw Error(msg);
}

double group_param_norm(const ParameterGroup& group) {
  double sum = 0.0;
  for (double v : group.values) sum += v * v;
  return std::sqrt(sum);
}

void check_mask(const ModelState& model, const FreezeMask& mask) {
  for (GroupId id : mask) {
    if (!model.index_of(id)) {
      throw Error("freeze mask names unknown group id " + std::to_string(id));
    }
  }
}

std::int64_t total_params(const ModelState& model, bool only_trainable,
                          const FreezeMask& freeze_mask) {
  check_mask(model, freeze_mask);
  std::int64_t total = 0;
  for (const auto& g : model.groups) {
    if (only_trainable && freeze_mask.count(g.id)) continue;
    total += static_cast<std::int64_t>(g.numel());
  }
  return total;
}

void check_aligned(const ModelState& model, const GradientVector& grads) {
  if (grads.groups.size() != model.groups.size()) {
    throw Error("gradient has " + std::to_string(grads.groups.size()) +
                " groups, model has " + std::to_string(model.groups.size()));
  }
  for (std::size_t i = 0; i < model.groups.size(); ++i) {
    const auto& mg = model.groups[i];
    const auto& gg = grads.groups[i];
    if (mg.id != gg.id || mg.numel() != gg.values.size()) {
      throw Error("gradient not aligned with model at group " +
                  std::to_string(mg.id));
    }
  }
}

}  // namespace ftlab
