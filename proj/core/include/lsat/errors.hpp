#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsat {

// Base of every error raised by the library. Callers that only care about
// success/failure can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of operands do not conform.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// A non-finite value was handed to an operation that requires finite data.
class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

// Numerical failures: the problem violates a rank or regularity assumption,
// or an iterative method did not converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Cholesky of the Gram matrix hit a pivot at or below the tolerance, i.e. the
// coefficient matrix does not have (numerically) independent columns.
class RankDeficient : public NumericalError {
 public:
  RankDeficient(std::size_t pivot_index, double pivot, double threshold);

  std::size_t pivot_index() const noexcept { return pivot_index_; }
  double pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_index_;
  double pivot_;
};

// The KKT matrix of an equality-constrained problem is (numerically) singular.
class SingularKkt : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// An iterative solve exceeded its iteration budget on some columns.
class NoConvergence : public NumericalError {
 public:
  explicit NoConvergence(std::vector<std::size_t> columns);

  const std::vector<std::size_t>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::size_t> columns_;
};

// A linear operator's apply and apply_transpose are not adjoint.
class AdjointInconsistent : public NumericalError {
 public:
  AdjointInconsistent(double lhs, double rhs);
};

// The tuner saw non-finite objective values until the step size underflowed.
class NonFiniteObjective : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Problems with input files (bad magic numbers, truncation, count mismatch,
// not enough rows for a requested split).
class DataError : public Error {
 public:
  using Error::Error;
};

class BadMagic : public DataError {
 public:
  BadMagic(const std::string& path, unsigned expected, unsigned found);
};

class TruncatedFile : public DataError {
 public:
  using DataError::DataError;
};

class CountMismatch : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientData : public DataError {
 public:
  using DataError::DataError;
};

// Invalid user configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lsat
