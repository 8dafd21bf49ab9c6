#pragma once

#include <stdexcept>
#include <string>

namespace gne {

// Malformed inputs: dimension mismatches, bad instance files, invalid
// parameter ranges. Maps to CLI exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A solver was invoked outside its hypotheses: missing strong monotonicity,
// rejected step sizes, indefinite preconditioner. Maps to CLI exit code 2.
struct PrerequisiteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values appeared in an iterate. Maps to CLI exit code 3.
// Solvers throw a derived type that carries the last finite iterate.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& msg, long iter)
      : std::runtime_error(msg), iteration(iter) {}
  long iteration;
};

// An iterative estimator hit its cap; carries the last Rayleigh estimate.
struct NonConvergenceError : std::runtime_error {
  NonConvergenceError(const std::string& msg, double est)
      : std::runtime_error(msg), estimate(est) {}
  double estimate;
};

}  // namespace gne
