// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ftlab/error.hpp"
#include "ftlab/optim.hpp"
#include "oracles/scalar_reference.hpp"
#include "support.hpp"

using namespace ftlab;
using testing_support::bytes_equal;
using testing_support::layered_model;
using testing_support::random_grad;

namespace {

// Runs `steps` library steps and an oracle per group side by side.
template <class Oracle>
double max_diff_vs_oracle(const OptimizerKind& kind, Oracle proto, int steps, double lr) {
  auto model = layered_model({3, 5, 2}, 11);
  std::vector<Oracle> ref(model.groups.size(), proto);
  std::vector<std::vector<double>> w;
  for (const auto& g : model.groups) w.push_back(g.values);
  auto state = init_state(kind, model, {});
  std::mt19937_64 rng(99);
  for (int s = 0; s < steps; ++s) {
    const auto g = random_grad(model, rng);
    step(state, model, g, lr, {});
    for (std::size_t i = 0; i < w.size(); ++i) ref[i].step(w[i], g.groups[i].values, lr);
  }
  double diff = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w[i].size(); ++j) {
      diff = std::max(diff, std::abs(w[i][j] - model.groups[i].values[j]));
    }
  }
  return diff;
}

}  // namespace

TEST(Optim, SgdMatchesOracle) {
  for (double mu : {0.0, 0.9}) {
    for (double wd : {0.0, 0.01}) {
      EXPECT_LE(max_diff_vs_oracle(SgdConfig{mu, wd}, oracle::Sgd{mu, wd, {}}, 300, 1e-2), 1e-10)
          << "mu " << mu << " wd " << wd;
    }
  }
}

TEST(Optim, AdamWMatchesOracle) {
  EXPECT_LE(max_diff_vs_oracle(AdamWConfig{}, oracle::AdamW{0.9, 0.999, 1e-8, 0.01, {}, {}, 0},
                               300, 1e-3),
            1e-10);
}

TEST(Optim, LarsMatchesOracle) {
  EXPECT_LE(max_diff_vs_oracle(LarsConfig{0.9, 0.01, 1e-8}, oracle::Lars{0.9, 0.01, 1e-8, {}},
                               300, 1e-2),
            1e-10);
}

TEST(Optim, LambMatchesOracle) {
  EXPECT_LE(max_diff_vs_oracle(LambConfig{}, oracle::Lamb{0.9, 0.999, 1e-8, 0.01, {}, {}, 0},
                               300, 1e-3),
            1e-10);
}

TEST(Optim, SgdMomentumHandSequence) {
  ModelState m = layered_model({1, 1, 1});
  for (auto& g : m.groups) g.values = {0.0};
  auto state = init_state(SgdConfig{0.9, 0.0}, m, {});
  GradientVector g = GradientVector::zeros_like(m);
  for (auto& gg : g.groups) gg.values = {1.0};
  const double expected[] = {-1.0, -2.9, -5.61};
  for (double e : expected) {
    sgd_step(state, m, g, 1.0, {});
    EXPECT_NEAR(m.groups[0].values[0], e, 1e-15);
  }
}

TEST(Optim, FirstAdamWStepIsSignLike) {
  ModelState m = layered_model({1, 1, 1});
  for (auto& g : m.groups) g.values = {1.0};
  auto state = init_state(AdamWConfig{}, m, {});
  GradientVector g = GradientVector::zeros_like(m);
  for (auto& gg : g.groups) gg.values = {0.5};
  adamw_step(state, m, g, 0.1, {});
  // (1 - 0.1*0.01) * 1 - 0.1 * 0.5/(0.5 + 1e-8)
  EXPECT_NEAR(m.groups[0].values[0], 0.899, 1e-8);
  EXPECT_EQ(state.step, 1);
}

TEST(Optim, FrozenGroupsUntouchedAndUnbuffered) {
  for (const OptimizerKind& kind : {OptimizerKind{SgdConfig{}}, OptimizerKind{AdamWConfig{}},
                                    OptimizerKind{LarsConfig{}}, OptimizerKind{LambConfig{}}}) {
    auto m = layered_model({4, 6, 3});
    const auto before = m.groups[0].values;
    auto state = init_state(kind, m, {0});
    EXPECT_EQ(state.find(0), nullptr);
    EXPECT_NE(state.find(1), nullptr);
    std::mt19937_64 rng(1);
    for (int s = 0; s < 20; ++s) step(state, m, random_grad(m, rng), 0.05, {0});
    EXPECT_TRUE(bytes_equal(before, m.groups[0].values)) << kind_name(kind);
  }
}

TEST(Optim, NonFiniteGradientRejectedAtomically) {
  auto m = layered_model({4, 6, 3});
  auto state = init_state(AdamWConfig{}, m, {});
  std::mt19937_64 rng(2);
  step(state, m, random_grad(m, rng), 0.01, {});
  const auto snapshot = m;
  const auto buffers = state.buffers;
  auto g = random_grad(m, rng);
  g.groups[2].values[1] = std::numeric_limits<double>::infinity();
  try {
    step(state, m, g, 0.01, {});
    FAIL();
  } catch (const NonFiniteGradient& e) {
    EXPECT_EQ(e.group_id(), 2);
  }
  EXPECT_EQ(state.step, 1);
  for (std::size_t i = 0; i < m.groups.size(); ++i) {
    EXPECT_TRUE(bytes_equal(snapshot.groups[i].values, m.groups[i].values));
    EXPECT_TRUE(bytes_equal(buffers[i].m, state.buffers[i].m));
  }
  g.groups[2].values[1] = 0.0;
  g.groups[0].values[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_NO_THROW(step(state, m, g, 0.01, {0}));
}

TEST(Optim, TrustRatioFallsBackToOneOnZeroNorm) {
  auto m = layered_model({2, 2, 2});
  for (auto& v : m.groups[1].values) v = 0.0;
  auto state = init_state(LarsConfig{0.0, 0.0, 1e-8}, m, {});
  GradientVector g = GradientVector::zeros_like(m);
  g.groups[1].values = {1.0, -2.0};
  lars_step(state, m, g, 0.5, {});
  EXPECT_EQ(m.groups[1].values[0], -0.5);
  EXPECT_EQ(m.groups[1].values[1], 1.0);
}

TEST(Optim, UnfrozenGroupStartsWithZeroMoments) {
  auto m = layered_model({3, 3, 3});
  auto state = init_state(SgdConfig{0.9, 0.0}, m, {0});
  std::mt19937_64 rng(3);
  step(state, m, random_grad(m, rng), 0.1, {0});
  ASSERT_EQ(state.find(0), nullptr);
  auto before = m.groups[0].values;
  auto g = random_grad(m, rng);
  step(state, m, g, 0.1, {});
  ASSERT_NE(state.find(0), nullptr);
  for (std::size_t j = 0; j < before.size(); ++j) {
    EXPECT_EQ(state.find(0)->m[j], g.groups[0].values[j]);
    EXPECT_EQ(m.groups[0].values[j], before[j] - 0.1 * g.groups[0].values[j]);
  }
  step(state, m, g, 0.1, {1});
  EXPECT_EQ(state.find(1), nullptr);
}

TEST(Optim, PerGroupRates) {
  auto m = layered_model({2, 2, 2});
  auto before = m;
  auto state = init_state(SgdConfig{0.0, 0.0}, m, {});
  GradientVector g = GradientVector::zeros_like(m);
  for (auto& gg : g.groups) gg.values = {1.0, 1.0};
  const std::vector<double> rates = {0.1, 0.2, 0.4};
  step(state, m, g, rates, {});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(m.groups[i].values[0], before.groups[i].values[0] - rates[i]);
  }
  EXPECT_THROW(step(state, m, g, std::vector<double>{0.1, 0.2}, {}), Error);
  EXPECT_THROW(step(state, m, g, std::vector<double>{0.1, -0.2, 0.1}, {}), Error);
}

TEST(Optim, RejectsMismatchedKindAndBadHyperparameters) {
  auto m = layered_model({2, 2, 2});
  auto state = init_state(AdamWConfig{}, m, {});
  EXPECT_THROW(sgd_step(state, m, GradientVector::zeros_like(m), 0.1, {}), Error);
  EXPECT_THROW(validate(SgdConfig{1.0, 0.0}), Error);
  EXPECT_THROW(validate(AdamWConfig{0.9, 1.0, 1e-8, 0.0}), Error);
  EXPECT_THROW(validate(LambConfig{0.9, 0.999, 0.0, 0.0}), Error);
  EXPECT_EQ(moment_count(SgdConfig{0.0, 0.0}), 0);
  EXPECT_EQ(moment_count(SgdConfig{}), 1);
  EXPECT_EQ(moment_count(AdamWConfig{}), 2);
  EXPECT_EQ(family(LarsConfig{}), OptimizerFamily::Sgd);
  EXPECT_EQ(family(LambConfig{}), OptimizerFamily::AdamW);
}
