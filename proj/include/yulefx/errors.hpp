#pragma once

#include <stdexcept>
#include <string>

namespace yulefx {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model or process parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A function argument violates the operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent data-generating configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The design does not identify the requested parameters.
class UnderidentifiedError : public Error {
 public:
  using Error::Error;
};

/// Cross-validation folds could not be formed.
class ResamplingError : public Error {
 public:
  using Error::Error;
};

class LinearAlgebraError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed; the covariance is not positive definite.
class FactorizationError : public LinearAlgebraError {
 public:
  using LinearAlgebraError::LinearAlgebraError;
};

class UnsupportedMethodError : public Error {
 public:
  using Error::Error;
};

class DegenerateRegressorError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace yulefx
