// SPDX-License-Identifier: Apache-2.0
#include "ftlab/memory.hpp"

#include <numeric>
#include <sstream>

#include "ftlab/error.hpp"
#include "ftlab/kvtext.hpp"

namespace ftlab {

Rational Rational::make(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return {num, den};
}

MemoryReport state_bytes(const OptimizerKind& kind, std::int64_t total_params,
                         std::int64_t frozen_params, int bytes_per_scalar) {
  if (total_params < 0 || frozen_params < 0 || frozen_params > total_params) {
    throw Error("state_bytes: need 0 <= frozen <= total");
  }
  if (bytes_per_scalar < 1) throw Error("state_bytes: bytes_per_scalar < 1");
  const std::int64_t trainable = total_params - frozen_params;
  const int moments = moment_count(kind);
  MemoryReport r;
  r.bytes_params = total_params * bytes_per_scalar;
  r.bytes_grads = trainable * bytes_per_scalar;
  r.bytes_moment1 = moments >= 1 ? trainable * bytes_per_scalar : 0;
  r.bytes_moment2 = moments >= 2 ? trainable * bytes_per_scalar : 0;
  r.bytes_total = r.bytes_params + r.bytes_grads + r.bytes_moment1 + r.bytes_moment2;
  r.bytes_per_param =
      total_params > 0 ? Rational::make(r.bytes_total, total_params) : Rational{};
  return r;
}

MemoryReport state_bytes(const OptimizerKind& kind, const ModelState& model,
                         const FreezeMask& freeze_mask, int bytes_per_scalar) {
  const auto total = total_params(model, false, freeze_mask);
  const auto trainable = total_params(model, true, freeze_mask);
  return state_bytes(kind, total, total - trainable, bytes_per_scalar);
}

std::string to_record(const MemoryReport& r) {
  std::ostringstream out;
  out << "bytes_params=" << r.bytes_params << " bytes_grads=" << r.bytes_grads
      << " bytes_moment1=" << r.bytes_moment1
      << " bytes_moment2=" << r.bytes_moment2
      << " bytes_total=" << r.bytes_total
      << " bytes_per_param=" << r.bytes_per_param.num << '/'
      << r.bytes_per_param.den;
  return out.str();
}

MemoryReport parse_memory_record(std::string_view record) {
  MemoryReport r;
  int seen = 0;
  std::istringstream in{std::string(record)};
  std::string field;
  while (in >> field) {
    auto eq = field.find('=');
    if (eq == std::string::npos) throw ParseError(0, "bad memory field '" + field + "'");
    auto key = field.substr(0, eq);
    auto val = std::string_view(field).substr(eq + 1);
    if (key == "bytes_per_param") {
      auto slash = val.find('/');
      if (slash == std::string_view::npos) throw ParseError(0, "bad rational");
      r.bytes_per_param = Rational::make(kv::to_int(val.substr(0, slash)),
                                         kv::to_int(val.substr(slash + 1)));
    } else if (key == "bytes_params") {
      r.bytes_params = kv::to_int(val);
    } else if (key == "bytes_grads") {
      r.bytes_grads = kv::to_int(val);
    } else if (key == "bytes_moment1") {
      r.bytes_moment1 = kv::to_int(val);
    } else if (key == "bytes_moment2") {
      r.bytes_moment2 = kv::to_int(val);
    } else if (key == "bytes_total") {
      r.bytes_total = kv::to_int(val);
    } else {
      throw ParseError(0, "unknown memory field '" + key + "'");
    }
    ++seen;
  }
  if (seen != 6) throw ParseError(0, "memory record needs 6 fields");
  return r;
}

}  // namespace ftlab
