// SPDX-License-Identifier: Apache-2.0
//
// Analytic optimizer-state memory model. Counts parameters (all of them),
// gradients and moment vectors (trainable parameters only), each stored at
// `bytes_per_scalar` bytes. Activations and allocator overhead are not
// modeled.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ftlab/optim.hpp"
#include "ftlab/param.hpp"

namespace ftlab {

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;  // > 0, gcd(num, den) == 1

  static Rational make(std::int64_t num, std::int64_t den);
  double value() const { return double(num) / double(den); }
  bool operator==(const Rational&) const = default;
};

struct MemoryReport {
  std::int64_t bytes_params = 0;
  std::int64_t bytes_grads = 0;
  std::int64_t bytes_moment1 = 0;
  std::int64_t bytes_moment2 = 0;
  std::int64_t bytes_total = 0;
  Rational bytes_per_param;  // bytes_total / parameter count

  bool operator==(const MemoryReport&) const = default;
};

MemoryReport state_bytes(const OptimizerKind& kind, const ModelState& model,
                         const FreezeMask& freeze_mask,
                         int bytes_per_scalar = 4);

/// Same model from counts alone, for sizes too large to materialize.
MemoryReport state_bytes(const OptimizerKind& kind, std::int64_t total_params,
                         std::int64_t frozen_params, int bytes_per_scalar = 4);

/// Flat record: "bytes_params=4000 bytes_grads=3960 ... bytes_per_param=149/50".
std::string to_record(const MemoryReport& report);
MemoryReport parse_memory_record(std::string_view record);

}  // namespace ftlab
