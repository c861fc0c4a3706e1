// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ftlab/error.hpp"
#include "ftlab/param.hpp"
#include "support.hpp"

using namespace ftlab;
using testing_support::layered_model;

namespace {

bool has_rule(const std::vector<Violation>& v, const std::string& rule) {
  for (const auto& x : v) {
    if (x.rule == rule) return true;
  }
  return false;
}

}  // namespace

TEST(Param, WellFormedModelHasNoViolations) {
  auto m = layered_model({4, 6, 3});
  EXPECT_TRUE(validate_model(m).empty());
  EXPECT_NO_THROW(require_valid(m));
}

TEST(Param, RoleRoundTrip) {
  for (auto r : {LayerRole::Embed, LayerRole::Middle, LayerRole::Head}) {
    EXPECT_EQ(parse_role(to_string(r)), r);
  }
  EXPECT_THROW(parse_role("stem"), Error);
}

TEST(Param, DetectsStructuralViolations) {
  auto m = layered_model({4, 6, 3});
  m.groups[1].id = 0;
  EXPECT_TRUE(has_rule(validate_model(m), "duplicate id 0"));

  m = layered_model({4, 6, 3});
  m.groups[1].values.clear();
  EXPECT_TRUE(has_rule(validate_model(m), "numel must be >= 1"));

  m = layered_model({4, 6, 3});
  m.groups[2].values[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_TRUE(has_rule(validate_model(m), "non-finite value"));

  m = layered_model({4, 6, 3});
  m.groups[2].depth_index = 1;
  EXPECT_TRUE(has_rule(validate_model(m), "depth_index not strictly increasing"));

  m = layered_model({4, 6, 3});
  m.groups[0].role = LayerRole::Middle;
  EXPECT_TRUE(has_rule(validate_model(m), "missing embed"));

  m = layered_model({4, 6, 3});
  m.groups[2].role = LayerRole::Middle;
  EXPECT_TRUE(has_rule(validate_model(m), "missing head"));

  m = layered_model({4, 6, 3});
  m.groups[1].role = LayerRole::Head;
  EXPECT_TRUE(has_rule(validate_model(m), "more than one head"));
  EXPECT_THROW(require_valid(m), Error);
}

TEST(Param, TotalParamsRespectsMask) {
  auto m = layered_model({4, 6, 3});
  EXPECT_EQ(total_params(m, false, {}), 13);
  EXPECT_EQ(total_params(m, true, {0}), 9);
  EXPECT_EQ(total_params(m, false, {0}), 13);
  EXPECT_THROW(total_params(m, true, {7}), Error);
}

TEST(Param, ParamNorm) {
  ParameterGroup g;
  g.values = {3.0, 4.0};
  EXPECT_EQ(group_param_norm(g), 5.0);
}

TEST(Param, AlignmentCheck) {
  auto m = layered_model({4, 6, 3});
  auto g = GradientVector::zeros_like(m);
  EXPECT_NO_THROW(check_aligned(m, g));
  g.groups[1].values.pop_back();
  EXPECT_THROW(check_aligned(m, g), Error);
}
