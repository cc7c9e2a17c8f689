#pragma once

#include <stdexcept>
#include <string>

namespace asymreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain where a transform is defined
/// (e.g. a Stieltjes argument inside the support).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Target value that no argument in the domain attains.
class RangeError : public Error {
 public:
  RangeError(const std::string& what, double lo, double hi)
      : Error(what), lo_(lo), hi_(hi) {}

  /// Attainable open interval (lo, hi).
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A domain object violates its construction invariants.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Integrand produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Fixed-point recursion hit a singular update.
class IterationError : public Error {
 public:
  using Error::Error;
};

/// A requested computation is not supported for the given inputs.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Raised by cross-checks whose preconditions (e.g. convergence) failed.
class DiagnosticError : public Error {
 public:
  using Error::Error;
};

}  // namespace asymreg
