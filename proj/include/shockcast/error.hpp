#pragma once

#include <stdexcept>
#include <string>

namespace shockcast {

// Input did not satisfy a documented contract. The CLI maps these to exit 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DegenerateSeriesError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InsufficientDataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class KindError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class AlignmentError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Shape or dimension mismatch between collaborating components.
class ContractError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PreconditionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RankError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UndefinedMetricError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Runtime failures. The CLI maps these to exit 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class BackendError : public RuntimeFailure {
 public:
  BackendError(const std::string& what, bool retryable)
      : RuntimeFailure(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class InvalidDraftError : public BackendError {
 public:
  explicit InvalidDraftError(const std::string& what) : BackendError(what, true) {}
};

class StoreError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class IntegrityError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class MigrationError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace shockcast
