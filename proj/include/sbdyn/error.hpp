#pragma once

#include <stdexcept>
#include <string>

namespace sbdyn {

// Every failure raised by the library derives from Error so that the C layer
// can map it onto a status code without catching std::exception blindly.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
  public:
    using Error::Error;
};

// Quadrature, root finding or fixed-point iteration did not reach tolerance.
class NumericError : public Error {
  public:
    NumericError(const std::string& what, double estimate)
        : Error(what), estimate_(estimate) {}
    explicit NumericError(const std::string& what) : Error(what), estimate_(0.0) {}

    // Last residual or error estimate reported by the failing routine.
    double estimate() const noexcept { return estimate_; }

  private:
    double estimate_;
};

// Inconsistent or unknown configuration (scenario files, grids, tables).
class ConfigError : public Error {
  public:
    using Error::Error;
};

// Malformed system model (non-hermitian Hamiltonian, dimension mismatch).
class ModelError : public Error {
  public:
    using Error::Error;
};

// Truncated qubit-oscillator subspace lost too much of the initial state.
class TruncationError : public ModelError {
  public:
    TruncationError(const std::string& what, double retained_norm)
        : ModelError(what), retained_norm_(retained_norm) {}

    double retained_norm() const noexcept { return retained_norm_; }

  private:
    double retained_norm_;
};

// Requested tensor would exceed the configured entry cap.
class ResourceError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

}  // namespace sbdyn
