// SPDX-License-Identifier: Apache-2.0
//
// Line-oriented key-value text used by every ftlab file format:
//
//   # comment
//   key = value
//   [section]
//   key = value
//
// Keys are [A-Za-z0-9_.-]+, values run to end of line with surrounding
// blanks stripped. A `[name]` line opens a new section; sections may repeat
// and keep their order. Top-level entries must precede the first section.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ftlab::kv {

struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

struct Section {
  std::string name;
  std::vector<Entry> entries;
  std::size_t line = 0;

  const Entry* find(std::string_view key) const;
  /// Throws ParseError naming the section line when the key is missing.
  const std::string& require(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  void set(std::string key, std::string value);
};

struct Document {
  Section top;  // name is empty
  std::vector<Section> sections;
};

Document parse(std::istream& in);
Document parse_string(std::string_view text);
Document parse_file(const std::string& path);

void write(std::ostream& out, const Document& doc);
std::string to_string(const Document& doc);
void write_file(const std::string& path, const Document& doc);

// Typed helpers. All throw ParseError carrying `line` on malformed input.
double to_double(std::string_view text, std::size_t line = 0);
long long to_int(std::string_view text, std::size_t line = 0);
bool to_bool(std::string_view text, std::size_t line = 0);
std::vector<double> to_double_list(std::string_view text, std::size_t line = 0);
std::vector<long long> to_int_list(std::string_view text, std::size_t line = 0);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// C99 hexadecimal float; bit-exact round trip through to_double.
std::string format_hex(double v);

}  // namespace ftlab::kv
