// SPDX-License-Identifier: Apache-2.0
//
// Run configuration. Stored as kvtext with `schema = ftlab.run-config/1`;
// every key is optional and unknown keys are rejected. See configs/ for a
// fully commented example.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ftlab/gradprof.hpp"
#include "ftlab/kvtext.hpp"
#include "ftlab/policy.hpp"
#include "ftlab/toylab.hpp"
#include "ftlab/toytask.hpp"

namespace ftlab {

inline constexpr const char* kRunConfigSchema = "ftlab.run-config/1";

struct RunConfig {
  enum class ModelSource { Toy, File };

  ModelSource model_source = ModelSource::Toy;
  std::string model_path;  // File source: a serialized pretrained model

  toy::ToyArchitecture arch;
  std::string pretrain_optimizer = "adamw";  // sgd | adamw | lars | lamb
  int pretrain_steps = 1500;
  int pretrain_batch_size = 32;
  std::optional<double> pretrain_lr;  // default: middle entry of the family grid

  std::string task_name = "toy-shift";
  toy::ToyTaskConfig task;  // seed and input length are set per run

  std::string method = "sgd";
  int epochs = 10;
  int batch_size = 32;
  std::vector<std::uint64_t> seeds = {0};
  std::optional<std::vector<double>> grid_sgd;    // SGD/LARS family override
  std::optional<std::vector<double>> grid_adamw;  // AdamW/LAMB family override

  bool last_checkpoint = false;
  bool record_wall_clock = true;
  int threads = 1;

  int profile_batches = 0;  // 0: every full minibatch of the training split
  Normalization profile_normalization = Normalization::Raw;

  std::vector<std::string> experiment_methods = {"sgd", "adamw", "sgd-freeze-embed"};
  std::vector<std::string> experiment_pretrain = {"sgd", "adamw"};
  std::vector<std::string> experiment_stems = {"patchify", "overlap"};
  toy::OverlapStem overlap_geometry;  // stem used for the "overlap" variant
  int patch_size = 8;                 // stem used for the "patchify" variant
};

RunConfig parse_run_config(const kv::Document& doc);
RunConfig load_run_config(const std::string& path);
kv::Document to_document(const RunConfig& config);

/// Throws ftlab::Error on inconsistent settings.
void validate(const RunConfig& config);

/// Grid provider honouring the config's overrides.
GridProvider grid_provider(const RunConfig& config);

/// Optimizer used for pretraining ("sgd" means momentum 0.9).
OptimizerKind pretrain_kind(const std::string& name);

/// Constant pretraining rate: the override, else the middle entry
/// (index size/2) of the family grid.
double pretrain_lr(const RunConfig& config, const OptimizerKind& kind);

/// Architecture with the stem replaced by the named variant.
toy::ToyArchitecture arch_with_stem(const RunConfig& config, const std::string& stem);

/// Task configuration for one seed.
toy::ToyTaskConfig task_for_seed(const RunConfig& config, std::uint64_t seed);

/// Hex FNV-1a digest of the canonical config text plus (method, seed).
std::string config_digest(const RunConfig& config, const std::string& method,
                          std::uint64_t seed);

}  // namespace ftlab
