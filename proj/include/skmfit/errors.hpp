#pragma once

#include <stdexcept>
#include <string>

namespace skmfit {

/// Malformed or out-of-range user input (files, flags, parameter values).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown: integrator divergence, broken covariance, etc.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace skmfit
