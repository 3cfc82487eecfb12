#pragma once

#include <stdexcept>
#include <string>

namespace rareloom {

/// Base class for all library-specific failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A configuration value is out of its documented range.
struct InvalidConfigurationError : Error {
  using Error::Error;
};

/// The operation requires a step (piecewise-constant) density.
struct UnsupportedDensityError : Error {
  using Error::Error;
};

/// The input carries no usable signal (e.g. all mass on zero counts).
struct DegenerateInputError : Error {
  using Error::Error;
};

/// A computation produced a non-finite intermediate value.
struct NumericFailureError : Error {
  using Error::Error;
};

/// A combinatorial search would exceed its configured budget.
struct BudgetExceededError : Error {
  using Error::Error;
};

/// A sample record does not belong to the given source.
struct MismatchedSourceError : Error {
  using Error::Error;
};

/// Integrating an unbounded integrand without a finite taper.
struct UnboundedFunctionError : Error {
  using Error::Error;
};

}  // namespace rareloom
