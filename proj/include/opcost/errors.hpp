/**
 * @file errors.hpp
 * @brief Exception hierarchy shared by every opcost module.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace opcost {

/// Root of all library failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An instance that asks for something its data cannot support
/// (cash constraint without a cash class, unknown constraint id, ...).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Ratio metric evaluated where its denominator vanishes.
class SingularMetricError : public Error {
 public:
  using Error::Error;
};

/// Model data that breaks a mathematical precondition (non-PSD correlation).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incomplete input document. `key` names the offending field.
class ParseError : public Error {
 public:
  ParseError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace opcost
