#pragma once

#include <stdexcept>
#include <string>

namespace drex {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument values (probabilities out of range, x >= 100, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Structural violations: bad shapes, row sums, out-of-range indices,
// malformed files. Messages name the offending element.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

// Iterative solver failed to reach tolerance; carries the final residual.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& msg, double residual)
      : Error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Demonstrator could not be placed strictly between the uniform-random and
// optimal policies.
class DegenerateDemonstratorError : public Error {
 public:
  using Error::Error;
};

// Ranked dataset construction needs at least two distinct noise levels.
class InsufficientLevelsError : public Error {
 public:
  using Error::Error;
};

// Reward training produced a non-finite loss.
class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

// Theorem 1 is stated for linear reward models only.
class TheoremInapplicableError : public Error {
 public:
  using Error::Error;
};

}  // namespace drex
