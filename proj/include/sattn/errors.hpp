#pragma once

#include <stdexcept>
#include <string>

namespace sattn {

/// Raised when operand shapes are incompatible or empty.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for invalid hyperparameters or option values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a dataset cannot satisfy a request (too short, empty split, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed input files. Carries a row/column when known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for structural problems in input files (empty file, ragged rows).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a finite-input contract is violated.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace sattn
