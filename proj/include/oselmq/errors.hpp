#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oselmq {

/// Operand dimensions are incompatible.  The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A matrix is numerically singular.  Carries the pivot column that failed.
class SingularError : public std::runtime_error {
 public:
  SingularError(const std::string& what, std::size_t column)
      : std::runtime_error(what), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// An operation was invoked on an object in the wrong lifecycle state
/// (e.g. sequential training before initial training).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A numeric degeneracy that the algorithms treat as fatal
/// (e.g. a near-zero innovation denominator, division by zero).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value or combination.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File or stream I/O failure, including malformed checkpoint data.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace oselmq
