// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ftlab/error.hpp"
#include "ftlab/gradprof.hpp"
#include "ftlab/toylab.hpp"
#include "ftlab/toytask.hpp"
#include "support.hpp"

using namespace ftlab;
using testing_support::layered_model;

namespace {

GradientVector single_coordinate(const ModelState& m, std::size_t group, double value) {
  auto g = GradientVector::zeros_like(m);
  g.groups[group].values[0] = value;
  return g;
}

}  // namespace

TEST(GradProf, MeanOfNormsHandCase) {
  const auto m = layered_model({2, 2, 2});
  std::vector<GradientVector> batches(2, GradientVector::zeros_like(m));
  batches[0].groups[0].values = {3.0, 0.0};
  batches[1].groups[0].values = {3.0, 4.0};
  const auto p = profile_from_gradients(m, batches, 8);
  EXPECT_EQ(p.find(0)->g_raw, 4.0);
  EXPECT_EQ(p.find(1)->g_raw, 0.0);
  EXPECT_EQ(p.num_batches, 2);
  EXPECT_EQ(p.find(0)->g_over_sqrt_n, 4.0 / std::sqrt(2.0));
  EXPECT_EQ(*p.find(0)->g_over_param_norm, 4.0 / group_param_norm(m.groups[0]));
}

TEST(GradProf, ParamNormVariantAbsentForZeroParams) {
  auto m = layered_model({2, 2, 2});
  m.groups[1].values = {0.0, 0.0};
  const std::vector<GradientVector> batches = {single_coordinate(m, 1, 1.0)};
  const auto p = profile_from_gradients(m, batches, 1);
  EXPECT_FALSE(p.find(1)->g_over_param_norm.has_value());
  EXPECT_TRUE(p.find(0)->g_over_param_norm.has_value());
}

TEST(GradProf, PartitionIsDisjointAndSeeded) {
  const auto parts = minibatch_partition(100, 8, 12, 7);
  ASSERT_EQ(parts.size(), 12u);
  std::set<std::size_t> seen;
  for (const auto& b : parts) {
    EXPECT_EQ(b.size(), 8u);
    for (auto i : b) {
      EXPECT_LT(i, 100u);
      EXPECT_TRUE(seen.insert(i).second);
    }
  }
  EXPECT_EQ(minibatch_partition(100, 8, 12, 7), parts);
  EXPECT_NE(minibatch_partition(100, 8, 12, 8), parts);
  EXPECT_THROW(minibatch_partition(10, 8, 2, 0), Error);
}

TEST(GradProf, OutlierRatio) {
  const auto m = layered_model({1, 1, 1, 1, 1});
  std::vector<GradientVector> batches = {GradientVector::zeros_like(m)};
  const double g[] = {10.0, 1.0, 2.0, 3.0, 100.0};
  for (int i = 0; i < 5; ++i) batches[0].groups[i].values[0] = g[i];
  const auto p = profile_from_gradients(m, batches, 1);
  EXPECT_EQ(*embed_outlier_ratio(p), 5.0);
  EXPECT_EQ(*embed_outlier_ratio(p, Normalization::OverSqrtN), 5.0);

  for (int i = 1; i < 4; ++i) batches[0].groups[i].values[0] = 0.0;
  EXPECT_FALSE(embed_outlier_ratio(profile_from_gradients(m, batches, 1)).has_value());

  const auto no_middle = layered_model({1, 1});
  const std::vector<GradientVector> b2 = {single_coordinate(no_middle, 0, 1.0)};
  EXPECT_THROW(embed_outlier_ratio(profile_from_gradients(no_middle, b2, 1)), Error);
  EXPECT_EQ(parse_normalization("param-norm"), Normalization::OverParamNorm);
  EXPECT_THROW(parse_normalization("l1"), Error);
}

TEST(GradProf, ParallelMatchesSequentialAndScalesLinearly) {
  toy::ToyTaskConfig tc;
  tc.n_train = 256;
  const auto task = toy::make_task(tc);
  toy::ToyArchitecture arch;
  const auto model = toy::init_model(arch, 3);
  ProfileOptions opts{32, 8, 5, 1};
  const auto seq = profile(model, task.train.size(), toy::make_objective(arch, task.train), opts);
  opts.threads = 4;
  const auto par = profile(model, task.train.size(), toy::make_objective(arch, task.train), opts);
  const auto scaled =
      profile(model, task.train.size(), toy::make_objective(arch, task.train, 2.5), opts);
  for (std::size_t i = 0; i < seq.groups.size(); ++i) {
    EXPECT_LE(std::abs(seq.groups[i].g_raw - par.groups[i].g_raw), 1e-12 * seq.groups[i].g_raw);
    EXPECT_LE(std::abs(scaled.groups[i].g_raw - 2.5 * seq.groups[i].g_raw),
              1e-12 * 2.5 * seq.groups[i].g_raw);
  }
}

TEST(GradProf, NonFiniteLossIsAnError) {
  const auto m = layered_model({1, 1, 1});
  BatchObjective bad = [&](const ModelState& mm, std::span<const std::size_t>) {
    return BatchEval{std::nan(""), GradientVector::zeros_like(mm)};
  };
  EXPECT_THROW(profile(m, 10, bad, ProfileOptions{2, 2, 0, 1}), Error);
}

TEST(GradProf, CsvExport) {
  auto m = layered_model({1, 1, 1});
  m.groups[1].values = {0.0};
  const std::vector<GradientVector> b = {single_coordinate(m, 0, 2.0)};
  const auto csv = profile_to_csv(profile_from_gradients(m, b, 1));
  const auto first = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(first, "name,role,depth_index,numel,g_raw,g_over_param_norm,g_over_sqrt_n");
  EXPECT_NE(csv.find("mid1,middle,1,1,0,,0"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}
