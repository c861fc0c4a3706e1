// SPDX-License-Identifier: Apache-2.0
//
// Synthetic distribution-shift tasks over 1-D signals split into patches.
//
// Each patch carries a latent vector z ~ N(0, I_k). With U, W two orthonormal
// k-frames of patch space (mutually orthogonal, drawn from the seed):
//
//   ID patch        x = U z + noise
//   OOD patch       A x + c, where A rotates span(U) onto span(W) by
//                   `ood_angle_deg` (plane by plane) and c is a fixed offset
//   pretrain patch  (cos a U + sin a W) z + noise, a ~ Uniform[0, ood angle]
//                   drawn per patch
//
// Labels are argmax_c sum_p <R_c,p, z_p> for a random linear rule R; the
// pretraining and fine-tuning rules differ, ID and OOD share one rule.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ftlab::toy {

struct Dataset {
  int input_length = 0;
  int num_classes = 0;
  std::vector<double> x;  // size() x input_length, row-major
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const;
  /// Copies the selected rows into (inputs, labels).
  void gather(std::span<const std::size_t> indices, std::vector<double>& inputs,
              std::vector<int>& labels) const;
};

/// Fixed invertible affine map applied to every patch: x -> A x + c.
struct PatchAffine {
  int dim = 0;
  std::vector<double> matrix;  // dim x dim, row-major
  std::vector<double> offset;

  void apply(std::span<const double> in, std::span<double> out) const;
};

struct ToyTaskConfig {
  std::uint64_t seed = 0;
  int input_length = 64;
  int patch = 8;
  int latent_dim = 3;
  int num_classes = 4;
  double noise = 0.1;
  double ood_angle_deg = 90.0;
  double ood_offset_scale = 0.0;
  int n_pretrain = 4096;
  int n_train = 512;
  int n_val = 512;
  int n_test = 1024;
  int n_ood = 1024;
};

struct ToyTask {
  ToyTaskConfig config;
  PatchAffine ood_map;
  std::vector<std::vector<double>> frame_u;  // latent_dim unit vectors of patch space
  std::vector<std::vector<double>> frame_w;
  std::vector<double> rule_pretrain;  // num_classes x (patches * latent_dim)
  std::vector<double> rule_finetune;  // shared by train, val, test and ood
  Dataset pretrain;
  Dataset train;
  Dataset val;
  Dataset test;
  Dataset ood;
};

/// Throws ftlab::Error on an inconsistent configuration.
ToyTask make_task(const ToyTaskConfig& config);

}  // namespace ftlab::toy
