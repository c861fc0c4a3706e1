// SPDX-License-Identifier: Apache-2.0
#include "ftlab/kvtext.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ftlab/error.hpp"

namespace ftlab::kv {
namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
              (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

std::vector<std::string_view> split_commas(std::string_view text) {
  std::vector<std::string_view> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(',', start);
    out.push_back(trim(text.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

const Entry* Section::find(std::string_view key) const {
  for (const auto& e : entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

const std::string& Section::require(std::string_view key) const {
  if (const Entry* e = find(key)) return e->value;
  std::string where = name.empty() ? "top level" : "section [" + name + "]";
  throw ParseError(line, "missing key '" + std::string(key) + "' in " + where);
}

std::optional<std::string> Section::get(std::string_view key) const {
  if (const Entry* e = find(key)) return e->value;
  return std::nullopt;
}

void Section::set(std::string key, std::string value) {
  for (auto& e : entries) {
    if (e.key == key) {
      e.value = std::move(value);
      return;
    }
  }
  entries.push_back({std::move(key), std::move(value), 0});
}

Document parse(std::istream& in) {
  Document doc;
  Section* current = &doc.top;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ParseError(lineno, "malformed section header");
      }
      std::string_view name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) throw ParseError(lineno, "bad section name");
      doc.sections.push_back({std::string(name), {}, lineno});
      current = &doc.sections.back();
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(lineno, "expected 'key = value'");
    }
    std::string_view key = trim(line.substr(0, eq));
    if (!valid_key(key)) {
      throw ParseError(lineno, "bad key '" + std::string(key) + "'");
    }
    if (current->find(key)) {
      throw ParseError(lineno, "duplicate key '" + std::string(key) + "'");
    }
    current->entries.push_back(
        {std::string(key), std::string(trim(line.substr(eq + 1))), lineno});
  }
  return doc;
}

Document parse_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

Document parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return parse(in);
}

void write(std::ostream& out, const Document& doc) {
  for (const auto& e : doc.top.entries) out << e.key << " = " << e.value << '\n';
  for (const auto& s : doc.sections) {
    out << '[' << s.name << "]\n";
    for (const auto& e : s.entries) out << e.key << " = " << e.value << '\n';
  }
}

std::string to_string(const Document& doc) {
  std::ostringstream out;
  write(out, doc);
  return out.str();
}

void write_file(const std::string& path, const Document& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write(out, doc);
  if (!out) throw Error("write failed for '" + path + "'");
}

double to_double(std::string_view text, std::size_t line) {
  std::string s(trim(text));
  if (s.empty()) throw ParseError(line, "expected a number");
  // strtod accepts hex floats, inf and nan; from_chars in libstdc++ 11 does
  // not take the 0x prefix.
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw ParseError(line, "not a number: '" + s + "'");
  }
  return v;
}

long long to_int(std::string_view text, std::size_t line) {
  auto s = trim(text);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(line, "not an integer: '" + std::string(s) + "'");
  }
  return v;
}

bool to_bool(std::string_view text, std::size_t line) {
  auto s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParseError(line, "not a boolean: '" + std::string(s) + "'");
}

std::vector<double> to_double_list(std::string_view text, std::size_t line) {
  std::vector<double> out;
  for (auto part : split_commas(text)) out.push_back(to_double(part, line));
  return out;
}

std::vector<long long> to_int_list(std::string_view text, std::size_t line) {
  std::vector<long long> out;
  for (auto part : split_commas(text)) out.push_back(to_int(part, line));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::string format_hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

}  // namespace ftlab::kv
