#pragma once

#include <stdexcept>
#include <string>

namespace ogmd {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Graph construction: each names the violated adjacency assumption.
class NotSymmetricError : public Error {
 public:
  using Error::Error;
};
class NotStochasticError : public Error {
 public:
  using Error::Error;
};
class ZeroDiagonalError : public Error {
 public:
  using Error::Error;
};
class DisconnectedError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

// Mirror maps / feasible sets.
class DomainViolationError : public Error {
 public:
  using Error::Error;
};
class NoClosedFormError : public Error {
 public:
  using Error::Error;
};

// Step schedules.
class ScheduleError : public Error {
 public:
  using Error::Error;
};
class ScheduleExhaustedError : public Error {
 public:
  using Error::Error;
};

// Bandit query transform.
class RadiusViolationError : public Error {
 public:
  using Error::Error;
};

// Iterative solvers.
class NoConvergenceError : public Error {
 public:
  using Error::Error;
};

// Metrics.
class MissingGneError : public Error {
 public:
  using Error::Error;
};
class NonPositiveValuesError : public Error {
 public:
  using Error::Error;
};

/// Thrown when an online runtime check fails; `invariant()` names the
/// violated bound so callers can report it.
class InvariantViolationError : public Error {
 public:
  InvariantViolationError(std::string invariant, const std::string& detail)
      : Error(invariant + ": " + detail), invariant_(std::move(invariant)) {}
  const std::string& invariant() const { return invariant_; }

 private:
  std::string invariant_;
};

// Experiment configs and persisted runs.
class ConfigError : public Error {
 public:
  using Error::Error;
};
class LogIntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace ogmd
