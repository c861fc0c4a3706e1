// SPDX-License-Identifier: Apache-2.0
//
// Layer-wise gradient norms at a fixed (pretrained) point.
//
// For each group l and minibatches B_1..B_m,
//
//   G_l = (1/m) * sum_t || g_l(B_t) ||_2
//
// where g_l(B) is the mean-reduced minibatch gradient. Two normalized
// variants are reported alongside: G_l / ||theta_l|| and G_l / sqrt(numel_l).
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftlab/param.hpp"

namespace ftlab {

struct BatchEval {
  double loss = 0.0;
  GradientVector grad;
};

/// Loss and mean-reduced gradient of `model` on the examples at `indices`.
/// Must not modify shared state; it is called concurrently when threads > 1.
using BatchObjective =
    std::function<BatchEval(const ModelState&, std::span<const std::size_t>)>;

struct GroupProfile {
  GroupId id = 0;
  std::string name;
  LayerRole role = LayerRole::Middle;
  int depth_index = 0;
  std::int64_t numel = 0;
  double g_raw = 0.0;
  std::optional<double> g_over_param_norm;  // absent when ||theta|| == 0
  double g_over_sqrt_n = 0.0;
};

struct GradientProfile {
  std::vector<GroupProfile> groups;  // ordered by depth_index
  int num_batches = 0;
  int batch_size = 0;
  std::uint64_t partition_seed = 0;

  const GroupProfile* find(GroupId id) const;
};

struct ProfileOptions {
  int batch_size = 32;
  int num_batches = 1;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// `m` disjoint minibatches of `batch_size` drawn from a seeded permutation
/// of [0, n). Throws ftlab::Error when n < m * batch_size.
std::vector<std::vector<std::size_t>> minibatch_partition(std::size_t n,
                                                          int batch_size, int m,
                                                          std::uint64_t seed);

/// Throws ftlab::Error when the dataset is too small or a loss is non-finite.
GradientProfile profile(const ModelState& model, std::size_t dataset_size,
                        const BatchObjective& objective,
                        const ProfileOptions& options);

/// Profile from precomputed per-batch gradients (batches in order).
GradientProfile profile_from_gradients(const ModelState& model,
                                       std::span<const GradientVector> batches,
                                       int batch_size);

enum class Normalization { Raw, OverParamNorm, OverSqrtN };

Normalization parse_normalization(std::string_view text);

/// max over Embed groups of G divided by the median over Middle groups of G.
/// Head groups are ignored. Absent when the median is 0 (or every value
/// needed is undefined). Throws when there is no Embed or no Middle group.
std::optional<double> embed_outlier_ratio(const GradientProfile& profile,
                                          Normalization normalization =
                                              Normalization::Raw);

/// CSV with header
///   name,role,depth_index,numel,g_raw,g_over_param_norm,g_over_sqrt_n
/// one row per group in depth order; an absent value is an empty field.
std::string profile_to_csv(const GradientProfile& profile);
void export_profile(const GradientProfile& profile, const std::string& path);

}  // namespace ftlab
