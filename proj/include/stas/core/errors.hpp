#pragma once

#include <stdexcept>
#include <string>

namespace stas {

// Root of every error the library raises. Callers that only need to know
// "something in stas failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand extents do not agree (matmul inner dimension, elementwise shapes).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input data violates a documented domain (non-binary mask, bad action index).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API precondition (non-scalar loss, empty batch, i in C).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Configuration is malformed or inconsistent. Carries the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  explicit ConfigError(const std::string& message) : Error(message) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Object used outside its lifecycle (step after done, consumed tape).
class LifecycleError : public Error {
 public:
  using Error::Error;
};

// A forward computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Every position of a softmax row was excluded.
class DegenerateRowError : public Error {
 public:
  using Error::Error;
};

// Optimizer refused to apply a non-finite gradient.
class PoisonedUpdateError : public Error {
 public:
  using Error::Error;
};

// Corrupt, truncated, or mismatched file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace stas
