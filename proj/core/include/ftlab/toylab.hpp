// SPDX-License-Identifier: Apache-2.0
//
// Tiny manually differentiated classifiers over 1-D signals.
//
//   stem    one linear map shared across input windows (the "embedding"),
//           followed by the activation; outputs are concatenated
//   hidden  dense + activation, one group per layer
//   head    dense to class logits
//
// A Patchify stem reads non-overlapping windows of `patch` samples; an
// Overlap stem reads windows of `window` samples every `stride` samples.
// Every group stores its weight matrix row-major [out][in] followed by the
// bias vector.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ftlab/gradprof.hpp"
#include "ftlab/optim.hpp"
#include "ftlab/param.hpp"
#include "ftlab/toytask.hpp"

namespace ftlab::toy {

struct PatchifyStem {
  int patch = 8;
};

struct OverlapStem {
  int window = 16;
  int stride = 8;
};

using Stem = std::variant<PatchifyStem, OverlapStem>;

enum class Activation { Relu, Gelu };

std::string to_string(Activation a);
Activation parse_activation(std::string_view text);

struct ToyArchitecture {
  Stem stem = PatchifyStem{};
  int input_length = 64;
  int embed_dim = 8;
  std::vector<int> hidden = {32, 32, 32};
  Activation activation = Activation::Relu;
  int num_classes = 4;

  int window() const;
  int stride() const;
  int num_tokens() const;
  int feature_dim() const { return num_tokens() * embed_dim; }
  std::string stem_name() const;  // "patchify" | "overlap"
};

/// Throws ftlab::Error on an inconsistent architecture.
void validate(const ToyArchitecture& arch);

std::map<std::string, std::string> arch_to_metadata(const ToyArchitecture& arch);
ToyArchitecture arch_from_metadata(const std::map<std::string, std::string>& meta);

/// Fresh model; every weight and bias is Uniform(+-1/sqrt(fan_in)).
ModelState init_model(const ToyArchitecture& arch, std::uint64_t seed);

struct ForwardCache {
  int batch = 0;
  std::vector<std::vector<double>> pre;   // per layer (stem, hidden...), B x width
  std::vector<std::vector<double>> post;  // activations of the same layers
  std::vector<double> logits;             // B x num_classes
};

/// `inputs` is row-major B x input_length.
ForwardCache forward(const ToyArchitecture& arch, const ModelState& model,
                     std::span<const double> inputs);

/// Mean softmax cross-entropy of the cached logits.
double cross_entropy(const ForwardCache& cache, std::span<const int> labels,
                     int num_classes);

/// Exact gradient of loss_scale * mean cross-entropy.
GradientVector backward(const ToyArchitecture& arch, const ModelState& model,
                        std::span<const double> inputs,
                        std::span<const int> labels, const ForwardCache& cache,
                        double loss_scale = 1.0);

BatchEval loss_and_gradient(const ToyArchitecture& arch, const ModelState& model,
                            std::span<const double> inputs,
                            std::span<const int> labels, double loss_scale = 1.0);

/// Objective over `data` suitable for ftlab::profile.
BatchObjective make_objective(const ToyArchitecture& arch, const Dataset& data,
                              double loss_scale = 1.0);

std::vector<int> predict(const ToyArchitecture& arch, const ModelState& model,
                         std::span<const double> inputs);
double accuracy(const ToyArchitecture& arch, const ModelState& model,
                const Dataset& data);

/// Redraws the head from Uniform(+-1/sqrt(fan_in)) using `seed`; all other
/// groups are copied bit for bit. The architecture comes from the metadata.
ModelState reinit_head(const ModelState& model, std::uint64_t seed);

struct PretrainOptions {
  int steps = 1500;
  int batch_size = 32;
  double lr = 1e-3;  // constant
};

/// Trains init_model(arch, seed) on task.pretrain with `kind`. Throws
/// DivergenceError on a non-finite loss. Metadata records the optimizer.
ModelState pretrain(const ToyArchitecture& arch, const OptimizerKind& kind,
                    const ToyTask& task, const PretrainOptions& options,
                    std::uint64_t seed);

}  // namespace ftlab::toy
