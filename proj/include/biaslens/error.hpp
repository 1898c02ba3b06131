#pragma once

#include <stdexcept>
#include <string>

namespace biaslens {

/// Base of every error thrown by the library. The CLI maps subclasses onto
/// process exit codes via exit_code().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, bad arguments, or a missing required key (exit 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or insufficient input data (exit 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A quantity that is mathematically undefined for the given input:
/// cosine of a zero vector, correlation of a constant list, a degenerate
/// bias axis, a min-max range of zero width.
class DomainError : public DataError {
 public:
  using DataError::DataError;
};

/// An operation applied to the wrong kind of object (e.g. eGloVe rows from an
/// SGNS model).
class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A trainer produced a non-finite parameter (exit 4).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

inline int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const DivergenceError*>(&e) != nullptr) return 4;
  return 1;
}

inline std::string at_line(const std::string& what, std::size_t line) {
  return what + " (line " + std::to_string(line) + ")";
}

}  // namespace biaslens
