// SPDX-License-Identifier: Apache-2.0
//
// Accuracy tables: one row per method, one column per task, values in
// percent with the delta to a baseline method as "(+x.y)". A delta whose
// displayed magnitude is at least 0.5 points is "strong", otherwise "light".
#pragma once

#include <span>
#include <string>

#include "ftlab/harness.hpp"
#include "ftlab/records.hpp"

namespace ftlab {

enum class Metric { IdTest, OodTest };
enum class Format { Text, Machine };

std::string to_string(Metric metric);
Format parse_format(std::string_view text);  // "text" | "machine"

inline constexpr double kStrongDelta = 0.5;

/// Uses ok records marked selected, averaged per (method, task). Text output
/// is fixed width with a trailing '*' on strong deltas; machine output is
/// TSV with columns metric, method, task, value, delta, emphasis. Throws
/// ftlab::Error when the baseline is missing for some task.
std::string render_table(std::span<const TrialRecord> records, Metric metric,
                         const std::string& baseline = "sgd",
                         Format format = Format::Text);

/// Per-epoch ID-validation curves as TSV (method, task, seed, lr, epoch,
/// val_acc) for plotting.
std::string render_curves(std::span<const TrialRecord> records);

/// Median [q1, q3] per cell and the median outlier ratio per pretrained model.
std::string render_matrix(const ExperimentMatrix& matrix, Format format = Format::Text);

}  // namespace ftlab
