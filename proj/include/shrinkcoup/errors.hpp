#pragma once

#include <stdexcept>
#include <string>

namespace shrinkcoup {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative method (root finder, quadrature, rejection loop) did not converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A result is not representable in double precision.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Cholesky pivot failure or eigen-solver breakdown.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset, inconsistent dimensions, or unreadable file.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Every meeting time in a fleet was censored, so no summary exists.
class AllCensoredError : public Error {
 public:
  using Error::Error;
};

}  // namespace shrinkcoup
