#pragma once

#include <stdexcept>
#include <string>

namespace cacherec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (e.g. a K x K matrix against a length-K' vector).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a type invariant at construction time.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A constraint set is empty.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// An iterative method ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Malformed or empty input data (files, tables, configs).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace cacherec
