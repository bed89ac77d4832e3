#pragma once

#include <stdexcept>
#include <string>

namespace vo2 {

// Bad input data: out-of-range fields, broken invariants, infeasible configs.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed on-disk artifacts (CSV rows, JSON schemas). Carries a line number
// when one is known; line <= 0 means "not line-addressable".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line = 0)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace vo2
