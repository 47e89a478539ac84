#pragma once

#include <stdexcept>
#include <string>

namespace polariton {

// Invalid arguments are reported with std::invalid_argument. The types below
// cover failures that are not a caller's argument mistake.

/// Input object is in a state the operation cannot work with
/// (unnormalized marginal, budget with no click source).
class InvalidState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares design matrix is rank deficient for the free coefficients.
class DegenerateDesign : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or strict-parse-rejected configuration input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace polariton
