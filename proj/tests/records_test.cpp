// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ftlab/error.hpp"
#include "ftlab/records.hpp"

using namespace ftlab;

namespace {

TrialRecord sample(int i) {
  TrialRecord r;
  r.digest = "00ff" + std::to_string(i);
  r.method = i % 2 ? "adamw" : "sgd";
  r.task = "toy-shift";
  r.seed = std::uint64_t(i);
  r.pretrain_optimizer = "adamw";
  r.stem = "patchify";
  r.lr = 0.1 / 3.0 * (i + 1);
  r.selected = i == 0;
  r.curve = {0.25, 1.0 / 3.0 + i, 0.7};
  r.early_stop_epoch = 2;
  r.best_val = 0.7;
  r.id_test = 0.123456789012345678;
  r.ood_test = 2.0 / 7.0;
  r.wall_seconds = 1e-9 * (i + 1);
  r.memory.bytes_params = 40;
  r.memory.bytes_total = 160;
  r.memory.bytes_per_param = Rational::make(16, 1);
  if (i == 2) {
    r.status = TrialStatus::Diverged;
    r.error = "nan \"loss\"\tat step 3";
  }
  return r;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ftlab_" + name)).string();
}

}  // namespace

TEST(Records, EmptyListIsHeaderOnly) {
  EXPECT_EQ(to_jsonl({}), "{\"schema\":\"ftlab.trials/1\"}\n");
  std::istringstream in(to_jsonl({}));
  EXPECT_TRUE(parse_jsonl(in).empty());
}

TEST(Records, RoundTripThreeRecords) {
  const std::vector<TrialRecord> records = {sample(0), sample(1), sample(2)};
  const auto path = temp_path("records.jsonl");
  persist(records, path);
  EXPECT_EQ(load_records(path), records);
  std::filesystem::remove(path);
}

TEST(Records, TruncatedLineNamesTheLine) {
  auto text = to_jsonl({sample(0), sample(1)});
  text = text.substr(0, text.size() - 20) + "\n";
  std::istringstream in(text);
  try {
    parse_jsonl(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Records, MissingHeaderOrFieldIsAnError) {
  std::istringstream no_header("{\"digest\":\"x\"}\n");
  EXPECT_THROW(parse_jsonl(no_header), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(parse_jsonl(empty), ParseError);
  std::istringstream missing(to_jsonl({}) + "{\"digest\":\"x\"}\n");
  try {
    parse_jsonl(missing);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}
