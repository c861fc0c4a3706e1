// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace ftlab {

/// Median; mean of the two middle values for even sizes. Throws when empty.
double median(std::vector<double> values);

/// Linear-interpolated quantile (numpy's default), q in [0, 1].
double quantile(std::vector<double> values, double q);

struct Summary {
  int count = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr() const { return q3 - q1; }
};

Summary summarize(const std::vector<double>& values);

}  // namespace ftlab
