#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cgscore {

// Bad user input: malformed files, invalid shapes, out-of-range arguments.
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure while processing otherwise well-formed input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cholesky factorization hit a pivot at or below the working tolerance.
// Carries the failing pivot index and value so callers can name the
// offending row/column (typically a duplicate or degenerate instance).
class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(std::size_t pivot_index, double pivot, const std::string& context = "")
      : NumericalError(compose(pivot_index, pivot, context)),
        pivot_index_(pivot_index),
        pivot_(pivot) {}

  std::size_t pivot_index() const { return pivot_index_; }
  double pivot() const { return pivot_; }

 private:
  static std::string compose(std::size_t idx, double pivot, const std::string& context) {
    std::string msg = "matrix not positive definite: pivot " + std::to_string(pivot) +
                      " at index " + std::to_string(idx);
    if (!context.empty()) msg += " (" + context + ")";
    return msg;
  }

  std::size_t pivot_index_;
  double pivot_;
};

// Violated internal contract. Indicates a bug, not bad input.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cgscore
