// SPDX-License-Identifier: Apache-2.0
//
// Straight-line scalar optimizers for a single flat vector, written from the
// textbook update rules with no shared code. Used as the comparison oracle.
#pragma once

#include <cmath>
#include <vector>

namespace oracle {

struct Sgd {
  double mu, wd;
  std::vector<double> buf;

  void step(std::vector<double>& w, const std::vector<double>& g, double lr) {
    if (buf.empty()) buf.assign(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      double d = g[i] + wd * w[i];
      buf[i] = mu * buf[i] + d;
      w[i] = w[i] - lr * buf[i];
    }
  }
};

struct AdamW {
  double b1, b2, eps, wd;
  std::vector<double> m, v;
  long t = 0;

  void step(std::vector<double>& w, const std::vector<double>& g, double lr) {
    if (m.empty()) {
      m.assign(w.size(), 0.0);
      v.assign(w.size(), 0.0);
    }
    t += 1;
    double c1 = 1.0 - std::pow(b1, double(t));
    double c2 = 1.0 - std::pow(b2, double(t));
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      double mh = m[i] / c1;
      double vh = v[i] / c2;
      w[i] = (1.0 - lr * wd) * w[i] - lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

inline double l2(const std::vector<double>& x) {
  double s = 0.0;
  for (double e : x) s += e * e;
  return std::sqrt(s);
}

struct Lars {
  double mu, wd, eps;
  std::vector<double> buf;

  void step(std::vector<double>& w, const std::vector<double>& g, double lr) {
    if (buf.empty()) buf.assign(w.size(), 0.0);
    std::vector<double> d(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) d[i] = g[i] + wd * w[i];
    double wn = l2(w), dn = l2(d);
    double trust = (wn > 0.0 && dn > 0.0) ? wn / (dn + eps) : 1.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      buf[i] = mu * buf[i] + d[i];
      w[i] -= lr * trust * buf[i];
    }
  }
};

struct Lamb {
  double b1, b2, eps, wd;
  std::vector<double> m, v;
  long t = 0;

  void step(std::vector<double>& w, const std::vector<double>& g, double lr) {
    if (m.empty()) {
      m.assign(w.size(), 0.0);
      v.assign(w.size(), 0.0);
    }
    t += 1;
    std::vector<double> u(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      double mh = m[i] / (1.0 - std::pow(b1, double(t)));
      double vh = v[i] / (1.0 - std::pow(b2, double(t)));
      u[i] = mh / (std::sqrt(vh) + eps) + wd * w[i];
    }
    double wn = l2(w), un = l2(u);
    double trust = (wn > 0.0 && un > 0.0) ? wn / un : 1.0;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * trust * u[i];
  }
};

}  // namespace oracle
