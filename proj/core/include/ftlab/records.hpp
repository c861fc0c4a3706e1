// SPDX-License-Identifier: Apache-2.0
//
// Trial records and their JSON-lines container. The first line of a file is
// {"schema":"ftlab.trials/1"}; every following line is one record object.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ftlab/memory.hpp"

namespace ftlab {

inline constexpr const char* kTrialsSchema = "ftlab.trials/1";

enum class TrialStatus { Ok, Diverged };

struct TrialRecord {
  std::string digest;  // config_digest of the effective config
  std::string method;
  std::string task;
  std::uint64_t seed = 0;
  std::string pretrain_optimizer;
  std::string stem;
  double lr = 0.0;
  TrialStatus status = TrialStatus::Ok;
  std::string error;            // set when diverged
  bool selected = false;        // chosen by its sweep (or a single fine-tune)
  std::vector<double> curve;    // ID-validation accuracy after each epoch
  int early_stop_epoch = -1;    // 0-based; -1 for an empty curve
  double best_val = 0.0;        // curve[early_stop_epoch], or the initial value
  double id_test = 0.0;
  double ood_test = 0.0;
  double wall_seconds = 0.0;
  MemoryReport memory;

  bool operator==(const TrialRecord&) const = default;
};

std::string to_string(TrialStatus status);

std::string to_jsonl(const std::vector<TrialRecord>& records);
/// Throws ParseError naming the 1-based line of the first bad record.
std::vector<TrialRecord> parse_jsonl(std::istream& in);

void persist(const std::vector<TrialRecord>& records, const std::string& path);
std::vector<TrialRecord> load_records(const std::string& path);

}  // namespace ftlab
