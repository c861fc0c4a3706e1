// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "ftlab/error.hpp"
#include "ftlab/memory.hpp"
#include "support.hpp"

using namespace ftlab;

TEST(Memory, BytesPerParameter) {
  const std::int64_t n = 1'000'000'000;
  EXPECT_EQ(state_bytes(AdamWConfig{}, n, 0).bytes_per_param, Rational::make(16, 1));
  EXPECT_EQ(state_bytes(SgdConfig{0.9, 0.0}, n, 0).bytes_per_param, Rational::make(12, 1));
  EXPECT_EQ(state_bytes(SgdConfig{0.0, 0.0}, n, 0).bytes_per_param, Rational::make(8, 1));
}

TEST(Memory, BillionParameterGaps) {
  const std::int64_t n = 1'000'000'000;
  const auto adamw = state_bytes(AdamWConfig{}, n, 0).bytes_total;
  EXPECT_EQ(adamw - state_bytes(SgdConfig{0.9, 0.0}, n, 0).bytes_total, 4'000'000'000);
  EXPECT_EQ(adamw - state_bytes(SgdConfig{0.0, 0.0}, n, 0).bytes_total, 8'000'000'000);
}

TEST(Memory, FreezingDropsGradientsAndMoments) {
  auto m = testing_support::layered_model({10, 80, 10});
  const auto r = state_bytes(AdamWConfig{}, m, {0});
  EXPECT_EQ(r.bytes_params, 400);
  EXPECT_EQ(r.bytes_grads, 360);
  EXPECT_EQ(r.bytes_moment1, 360);
  EXPECT_EQ(r.bytes_moment2, 360);
  EXPECT_EQ(r.bytes_total, 1480);
  EXPECT_EQ(r.bytes_per_param, Rational::make(148, 10));
  EXPECT_EQ(state_bytes(AdamWConfig{}, 100, 10), r);
  EXPECT_EQ(state_bytes(LarsConfig{}, m, {}).bytes_moment1, 400);
  EXPECT_EQ(state_bytes(LambConfig{}, m, {}).bytes_moment2, 400);
  EXPECT_THROW(state_bytes(AdamWConfig{}, m, {9}), Error);
}

TEST(Memory, RecordRoundTrip) {
  auto m = testing_support::layered_model({3, 4, 5});
  const auto r = state_bytes(SgdConfig{}, m, {0});
  EXPECT_EQ(parse_memory_record(to_record(r)), r);
  EXPECT_THROW(parse_memory_record("bytes_params=x"), Error);
}
