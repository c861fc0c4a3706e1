// SPDX-License-Identifier: Apache-2.0
#include "ftlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <vector>

#include "ftlab/error.hpp"
#include "ftlab/kvtext.hpp"

namespace ftlab {
namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

// Delta rounded to one decimal; -0.0 prints as +0.0.
std::string signed_delta(double tenths) {
  const long t = std::lround(tenths);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%c%ld.%ld", t < 0 ? '-' : '+', std::labs(t) / 10,
                std::labs(t) % 10);
  return buf;
}

std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string format_g(double v) { return kv::format_double(v); }

}  // namespace

std::string to_string(Metric metric) {
  return metric == Metric::IdTest ? "id_test" : "ood_test";
}

Format parse_format(std::string_view text) {
  if (text == "text") return Format::Text;
  if (text == "machine") return Format::Machine;
  throw Error("unknown format '" + std::string(text) + "' (text | machine)");
}

std::string render_table(std::span<const TrialRecord> records, Metric metric,
                         const std::string& baseline, Format format) {
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> sums;
  std::vector<std::string> methods;
  std::set<std::string> tasks;
  for (const auto& r : records) {
    if (!r.selected || r.status != TrialStatus::Ok) continue;
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    tasks.insert(r.task);
    auto& s = sums[{r.method, r.task}];
    s.first += metric == Metric::IdTest ? r.id_test : r.ood_test;
    s.second += 1;
  }
  if (tasks.empty()) throw Error("report: no selected records");
  std::sort(methods.begin(), methods.end(), [&](const auto& a, const auto& b) {
    if ((a == baseline) != (b == baseline)) return a == baseline;
    return a < b;
  });
  const std::vector<std::string> cols(tasks.begin(), tasks.end());
  auto mean = [&](const std::string& m, const std::string& t) -> std::optional<double> {
    auto it = sums.find({m, t});
    if (it == sums.end()) return std::nullopt;
    return 100.0 * it->second.first / it->second.second;
  };
  for (const auto& t : cols) {
    if (!mean(baseline, t)) {
      throw Error("report: baseline '" + baseline + "' has no record for task '" + t + "'");
    }
  }
  const bool with_avg = cols.size() > 1;

  struct Cell {
    std::optional<double> value;
    std::string delta;  // empty for the baseline row
    std::string emphasis;
  };
  auto make_cell = [&](const std::string& m, std::optional<double> v,
                       std::optional<double> base) {
    Cell c{v, "", ""};
    if (!v || m == baseline) return c;
    const double tenths = (*v - *base) * 10.0;
    c.delta = signed_delta(tenths);
    c.emphasis = std::labs(std::lround(tenths)) >= std::lround(kStrongDelta * 10.0) ? "strong"
                                                                                    : "light";
    return c;
  };

  std::vector<std::vector<Cell>> rows;
  for (const auto& m : methods) {
    std::vector<Cell> row;
    double total = 0.0, base_total = 0.0;
    bool complete = true;
    for (const auto& t : cols) {
      const auto v = mean(m, t);
      row.push_back(make_cell(m, v, mean(baseline, t)));
      if (v) {
        total += *v;
        base_total += *mean(baseline, t);
      } else {
        complete = false;
      }
    }
    if (with_avg) {
      const double n = double(cols.size());
      row.push_back(complete ? make_cell(m, total / n, base_total / n)
                             : Cell{std::nullopt, "", ""});
    }
    rows.push_back(std::move(row));
  }
  auto headers = cols;
  if (with_avg) headers.push_back("Avg");

  std::string out;
  if (format == Format::Machine) {
    out = "metric\tmethod\ttask\tvalue\tdelta\temphasis\n";
    for (std::size_t i = 0; i < methods.size(); ++i) {
      for (std::size_t j = 0; j < headers.size(); ++j) {
        const auto& c = rows[i][j];
        if (!c.value) continue;
        out += to_string(metric) + "\t" + methods[i] + "\t" + headers[j] + "\t" + fixed(*c.value, 1) + "\t" +
               c.delta + "\t" + c.emphasis + "\n";
      }
    }
    return out;
  }

  std::size_t mw = std::string("method").size();
  for (const auto& m : methods) mw = std::max(mw, m.size());
  std::vector<std::string> texts(methods.size() * headers.size());
  std::vector<std::size_t> widths(headers.size());
  for (std::size_t j = 0; j < headers.size(); ++j) widths[j] = headers[j].size();
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = 0; j < headers.size(); ++j) {
      const auto& c = rows[i][j];
      std::string s = "-";
      if (c.value) {
        s = fixed(*c.value, 1);
        if (!c.delta.empty()) s += " (" + c.delta + ")" + (c.emphasis == "strong" ? "*" : " ");
      }
      texts[i * headers.size() + j] = s;
      widths[j] = std::max(widths[j], s.size());
    }
  }
  out += pad_right("method", mw);
  for (std::size_t j = 0; j < headers.size(); ++j) out += "  " + pad_right(headers[j], widths[j]);
  out.erase(out.find_last_not_of(' ') + 1);
  out += "\n";
  for (std::size_t i = 0; i < methods.size(); ++i) {
    out += pad_right(methods[i], mw);
    for (std::size_t j = 0; j < headers.size(); ++j) {
      out += "  " + pad_right(texts[i * headers.size() + j], widths[j]);
    }
    out.erase(out.find_last_not_of(' ') + 1);
    out += "\n";
  }
  out += to_string(metric) + " accuracy (%), deltas vs " + baseline +
         "; * marks |delta| >= 0.5\n";
  return out;
}

std::string render_curves(std::span<const TrialRecord> records) {
  std::string out = "method\ttask\tseed\tlr\tepoch\tval_acc\n";
  for (const auto& r : records) {
    for (std::size_t e = 0; e < r.curve.size(); ++e) {
      out += r.method + "\t" + r.task + "\t" + std::to_string(r.seed) + "\t" + format_g(r.lr) +
             "\t" + std::to_string(e) + "\t" + format_g(r.curve[e]) + "\n";
    }
  }
  return out;
}

std::string render_matrix(const ExperimentMatrix& matrix, Format format) {
  std::string out;
  if (format == Format::Machine) {
    out = "pretrain\tstem\tmethod\tseeds\tid_median\tid_q1\tid_q3\tood_median\tood_q1\tood_q3\t"
          "errors\n";
    for (const auto& [key, c] : matrix.cells) {
      const auto& [p, s, m] = key;
      out += p + "\t" + s + "\t" + m + "\t" + std::to_string(c.seed_count) + "\t" +
             format_g(c.id_test.median) + "\t" + format_g(c.id_test.q1) + "\t" +
             format_g(c.id_test.q3) + "\t" + format_g(c.ood_test.median) + "\t" +
             format_g(c.ood_test.q1) + "\t" + format_g(c.ood_test.q3) + "\t" +
             std::to_string(c.errors.size()) + "\n";
    }
    out += "\npretrain\tstem\tratio_seeds\tratio_median\n";
    for (const auto& [key, col] : matrix.ratios) {
      const auto med = matrix.median_ratio(key);
      out += key.first + "\t" + key.second + "\t" + std::to_string(col.size()) + "\t" +
             (med ? format_g(*med) : "") + "\n";
    }
    return out;
  }

  auto pct = [](const Summary& s) {
    if (s.count == 0) return std::string("-");
    return fixed(100.0 * s.median, 1) + " [" + fixed(100.0 * s.q1, 1) + ", " +
           fixed(100.0 * s.q3, 1) + "]";
  };
  std::vector<std::vector<std::string>> table = {
      {"pretrain", "stem", "method", "seeds", "ID median [IQR]", "OOD median [IQR]"}};
  for (const auto& [key, c] : matrix.cells) {
    const auto& [p, s, m] = key;
    table.push_back({p, s, m, std::to_string(c.seed_count), pct(c.id_test), pct(c.ood_test)});
  }
  std::vector<std::size_t> w(table.front().size(), 0);
  for (const auto& row : table) {
    for (std::size_t j = 0; j < row.size(); ++j) w[j] = std::max(w[j], row[j].size());
  }
  for (const auto& row : table) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      out += (j ? "  " : "") + (j < 3 ? pad_right(row[j], w[j]) : pad_left(row[j], w[j]));
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += "\n";
  }
  out += "\nembed outlier ratio (median over seeds)\n";
  for (const auto& [key, col] : matrix.ratios) {
    const auto med = matrix.median_ratio(key);
    out += "  " + key.first + "/" + key.second + ": " + (med ? fixed(*med, 3) : "n/a") + " (" +
           std::to_string(col.size()) + " seeds)\n";
  }
  std::size_t errors = 0;
  for (const auto& [key, c] : matrix.cells) errors += c.errors.size();
  for (const auto& [key, e] : matrix.errors) errors += e.size();
  if (errors) out += std::to_string(errors) + " error(s) recorded\n";
  return out;
}

}  // namespace ftlab
