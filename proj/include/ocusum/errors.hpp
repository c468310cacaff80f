#pragma once

#include <stdexcept>
#include <string>

namespace ocusum {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (graphs, vertex sets, coefficients, configs).
struct ValidationError : Error {
  using Error::Error;
};

/// Numerical failures (non-PD covariance, singular marginals).
struct NumericError : Error {
  using Error::Error;
};

struct NotDecomposableError : ValidationError {
  using ValidationError::ValidationError;
};

struct VertexCountMismatchError : ValidationError {
  using ValidationError::ValidationError;
};

struct VertexOutOfRangeError : ValidationError {
  using ValidationError::ValidationError;
};

struct EmptyVertexSetError : ValidationError {
  using ValidationError::ValidationError;
};

struct XiOutOfRangeError : ValidationError {
  using ValidationError::ValidationError;
};

struct SingularCovarianceError : NumericError {
  using NumericError::NumericError;
};

struct NotPositiveDefiniteError : NumericError {
  using NumericError::NumericError;
};

struct CalibrationFailedError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

}  // namespace ocusum
