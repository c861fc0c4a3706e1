// SPDX-License-Identifier: Apache-2.0
#include "ftlab/gradprof.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "ftlab/error.hpp"
#include "ftlab/kvtext.hpp"
#include "ftlab/rng.hpp"
#include "ftlab/stats.hpp"

namespace ftlab {

const GroupProfile* GradientProfile::find(GroupId id) const {
  for (const auto& g : groups) {
    if (g.id == id) return &g;
  }
  return nullptr;
}

std::vector<std::vector<std::size_t>> minibatch_partition(std::size_t n,
                                                          int batch_size, int m,
                                                          std::uint64_t seed) {
  if (batch_size < 1 || m < 1) throw Error("profile: need batch_size >= 1 and m >= 1");
  if (n < std::size_t(batch_size) * std::size_t(m)) {
    throw Error("profile: dataset of " + std::to_string(n) +
                " examples cannot supply " + std::to_string(m) +
                " minibatches of " + std::to_string(batch_size));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> out(m);
  for (int b = 0; b < m; ++b) {
    auto first = perm.begin() + std::ptrdiff_t(b) * batch_size;
    out[b].assign(first, first + batch_size);
  }
  return out;
}

namespace {

std::vector<double> group_norms(const GradientVector& g) {
  std::vector<double> out;
  out.reserve(g.groups.size());
  for (const auto& grp : g.groups) {
    double s = 0.0;
    for (double v : grp.values) s += v * v;
    out.push_back(std::sqrt(s));
  }
  return out;
}

GradientProfile assemble(const ModelState& model,
                         const std::vector<std::vector<double>>& norms,
                         int batch_size) {
  GradientProfile p;
  p.num_batches = static_cast<int>(norms.size());
  p.batch_size = batch_size;
  for (std::size_t i = 0; i < model.groups.size(); ++i) {
    const auto& g = model.groups[i];
    // Fixed summation order: batch 0, 1, ..., m-1.
    double sum = 0.0;
    for (const auto& per_batch : norms) sum += per_batch[i];
    GroupProfile gp;
    gp.id = g.id;
    gp.name = g.name;
    gp.role = g.role;
    gp.depth_index = g.depth_index;
    gp.numel = static_cast<std::int64_t>(g.numel());
    gp.g_raw = sum / double(norms.size());
    const double pn = group_param_norm(g);
    if (pn > 0.0) gp.g_over_param_norm = gp.g_raw / pn;
    gp.g_over_sqrt_n = gp.g_raw / std::sqrt(double(g.numel()));
    p.groups.push_back(std::move(gp));
  }
  std::stable_sort(p.groups.begin(), p.groups.end(),
                   [](const GroupProfile& a, const GroupProfile& b) {
                     return a.depth_index < b.depth_index;
                   });
  return p;
}

}  // namespace

GradientProfile profile(const ModelState& model, std::size_t dataset_size,
                        const BatchObjective& objective,
                        const ProfileOptions& options) {
  const auto batches = minibatch_partition(dataset_size, options.batch_size,
                                           options.num_batches, options.seed);
  const std::size_t m = batches.size();
  std::vector<std::vector<double>> norms(m);
  std::vector<double> losses(m, 0.0);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      BatchEval ev = objective(model, batches[b]);
      check_aligned(model, ev.grad);
      losses[b] = ev.loss;
      norms[b] = group_norms(ev.grad);
    }
  };

  const std::size_t threads =
      std::clamp<std::size_t>(std::size_t(std::max(1, options.threads)), 1, m);
  if (threads == 1) {
    work(0, m);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (m + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(m, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t b = 0; b < m; ++b) {
    if (!std::isfinite(losses[b])) {
      throw Error("profile: non-finite loss on minibatch " + std::to_string(b));
    }
  }
  auto p = assemble(model, norms, options.batch_size);
  p.partition_seed = options.seed;
  return p;
}

GradientProfile profile_from_gradients(const ModelState& model,
                                       std::span<const GradientVector> batches,
                                       int batch_size) {
  if (batches.empty()) throw Error("profile: need at least one minibatch");
  std::vector<std::vector<double>> norms;
  for (const auto& g : batches) {
    check_aligned(model, g);
    norms.push_back(group_norms(g));
  }
  return assemble(model, norms, batch_size);
}

Normalization parse_normalization(std::string_view text) {
  if (text == "raw") return Normalization::Raw;
  if (text == "param-norm") return Normalization::OverParamNorm;
  if (text == "sqrt-numel") return Normalization::OverSqrtN;
  throw Error("unknown normalization '" + std::string(text) +
              "' (raw | param-norm | sqrt-numel)");
}

std::optional<double> embed_outlier_ratio(const GradientProfile& profile,
                                          Normalization normalization) {
  auto value = [&](const GroupProfile& g) -> std::optional<double> {
    switch (normalization) {
      case Normalization::Raw:
        return g.g_raw;
      case Normalization::OverParamNorm:
        return g.g_over_param_norm;
      case Normalization::OverSqrtN:
        return g.g_over_sqrt_n;
    }
    return std::nullopt;
  };

  bool any_embed = false;
  bool any_middle = false;
  std::optional<double> embed_max;
  std::vector<double> middle;
  for (const auto& g : profile.groups) {
    if (g.role == LayerRole::Embed) {
      any_embed = true;
      if (auto v = value(g)) embed_max = std::max(embed_max.value_or(*v), *v);
    } else if (g.role == LayerRole::Middle) {
      any_middle = true;
      if (auto v = value(g)) middle.push_back(*v);
    }
  }
  if (!any_embed || !any_middle) {
    throw Error("embed_outlier_ratio: profile needs an embed and a middle group");
  }
  if (!embed_max || middle.empty()) return std::nullopt;
  const double med = median(middle);
  if (!(med > 0.0)) return std::nullopt;
  return *embed_max / med;
}

std::string profile_to_csv(const GradientProfile& profile) {
  std::ostringstream out;
  out << "name,role,depth_index,numel,g_raw,g_over_param_norm,g_over_sqrt_n\n";
  for (const auto& g : profile.groups) {
    out << g.name << ',' << to_string(g.role) << ',' << g.depth_index << ','
        << g.numel << ',' << kv::format_double(g.g_raw) << ',';
    if (g.g_over_param_norm) out << kv::format_double(*g.g_over_param_norm);
    out << ',' << kv::format_double(g.g_over_sqrt_n) << '\n';
  }
  return out.str();
}

void export_profile(const GradientProfile& profile, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << profile_to_csv(profile);
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace ftlab
