#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace medeff {

// Validation errors map to CLI exit code 1, numerical failures to exit code 2.
enum class ErrorCategory { validation, numerical };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorCategory::validation, what) {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorCategory::numerical, what) {}
};

// Argument outside the support of a density or transform (e.g. log of y <= 0).
class DomainError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class InvalidWeightsError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class SingularDesignError : public NumericalError {
public:
  SingularDesignError(const std::string& what, std::vector<std::string> columns)
      : NumericalError(what), columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
  std::vector<std::string> columns_;
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double max_step = 0.0;
};

class ConvergenceError : public NumericalError {
public:
  ConvergenceError(const std::string& what, std::vector<IterationRecord> trace)
      : NumericalError(what), trace_(std::move(trace)) {}

  const std::vector<IterationRecord>& trace() const noexcept { return trace_; }

private:
  std::vector<IterationRecord> trace_;
};

class PositivityError : public NumericalError {
public:
  PositivityError(const std::string& what, std::size_t record)
      : NumericalError(what), record_(record) {}

  std::size_t record() const noexcept { return record_; }

private:
  std::size_t record_;
};

// An estimator could not be evaluated on the given data (e.g. an empty arm).
class EstimationError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class InsufficientGridError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class BootstrapInstabilityError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class CalibrationError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class UndefinedMetricError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

}  // namespace medeff
