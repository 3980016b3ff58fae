#pragma once

#include <stdexcept>
#include <string>

namespace probstl {

// Invalid inputs detected before any estimation starts: malformed formula
// text, dimension mismatches, out-of-range intervals, bad scenario files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Failures during estimation itself: degenerate sample sets, invariant
// violations inside the samplers, measurement callbacks blowing up.
class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

// Formula text rejected by the parser; carries 1-based position info.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, int line, int column)
      : ConfigError(what + " (line " + std::to_string(line) + ", column " +
                    std::to_string(column) + ")"),
        line(line),
        column(column) {}

  int line;
  int column;
};

}  // namespace probstl
