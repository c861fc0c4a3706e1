// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ftlab/error.hpp"
#include "ftlab/kvtext.hpp"
#include "ftlab/param.hpp"

namespace testing_support {

// embed(numel[0]), middles..., head(numel.back()) with seeded N(0,1) values.
inline ftlab::ModelState layered_model(const std::vector<int>& numel, unsigned seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ftlab::ModelState m;
  for (std::size_t i = 0; i < numel.size(); ++i) {
    ftlab::ParameterGroup g;
    g.id = int(i);
    g.depth_index = int(i);
    g.role = i == 0 ? ftlab::LayerRole::Embed
             : i + 1 == numel.size() ? ftlab::LayerRole::Head
                                     : ftlab::LayerRole::Middle;
    g.name = i == 0 ? "embed" : i + 1 == numel.size() ? "head" : "mid" + std::to_string(i);
    g.values.resize(std::size_t(numel[i]));
    for (auto& v : g.values) v = normal(rng);
    m.groups.push_back(std::move(g));
  }
  return m;
}

inline ftlab::GradientVector random_grad(const ftlab::ModelState& m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto g = ftlab::GradientVector::zeros_like(m);
  for (auto& gg : g.groups) {
    for (auto& v : gg.values) v = normal(rng);
  }
  return g;
}

inline bool bytes_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

inline void write_golden(const std::string& path, const ftlab::kv::Document& doc) {
  std::ofstream out(path, std::ios::binary);
  out << "# SPDX-License-Identifier: Apache-2.0\n" << ftlab::kv::to_string(doc);
  if (!out) throw ftlab::Error("cannot write '" + path + "'");
}

}  // namespace testing_support
