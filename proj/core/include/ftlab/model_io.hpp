// SPDX-License-Identifier: Apache-2.0
//
// Two text containers for models, both in the kvtext syntax.
//
// Model description (schema "ftlab.model-desc/1") lists the groups without
// values; `instantiate` draws them from each group's init seed:
//
//   schema = ftlab.model-desc/1
//   meta.arch = mlp-demo
//   [group]
//   id = 0
//   name = stem
//   role = embed
//   depth_index = 0
//   numel = 72
//   init_seed = 11
//   init_bound = 0.25
//
// role is embed, middle or head; init_bound is optional and defaults to
// 1/sqrt(numel). Values are Uniform(-init_bound, init_bound) drawn from
// mt19937_64(init_seed).
//
// Serialized model (schema "ftlab.model/1") has the same header and group
// keys minus the init fields, plus `values`: a comma-separated list of C99
// hex floats, so a save/load round trip is bit-exact.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ftlab/kvtext.hpp"
#include "ftlab/param.hpp"

namespace ftlab {

struct GroupDescription {
  GroupId id = 0;
  std::string name;
  LayerRole role = LayerRole::Middle;
  int depth_index = 0;
  std::int64_t numel = 1;
  std::uint64_t init_seed = 0;
  std::optional<double> init_bound;

  bool operator==(const GroupDescription&) const = default;
};

struct ModelDescription {
  std::vector<GroupDescription> groups;
  std::map<std::string, std::string> metadata;

  bool operator==(const ModelDescription&) const = default;
};

ModelDescription parse_model_description(const kv::Document& doc);
kv::Document to_document(const ModelDescription& desc);
ModelDescription load_model_description(const std::string& path);
void save_model_description(const ModelDescription& desc,
                            const std::string& path);

/// Draws every group's values; validates the result.
ModelState instantiate(const ModelDescription& desc);

kv::Document model_to_document(const ModelState& model);
ModelState model_from_document(const kv::Document& doc);
void save_model(const ModelState& model, const std::string& path);
ModelState load_model(const std::string& path);

}  // namespace ftlab
