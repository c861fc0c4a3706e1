// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ftlab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A gradient entry was NaN or Inf; the step was rejected before any write.
class NonFiniteGradient : public Error {
 public:
  explicit NonFiniteGradient(int group_id)
      : Error("non-finite gradient in group " + std::to_string(group_id)),
        group_id_(group_id) {}
  int group_id() const noexcept { return group_id_; }

 private:
  int group_id_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A text file could not be parsed. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ftlab
