#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace aasde {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (negative step, bad seed range, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// An analytic hypothesis of the model does not hold (eta >= 1, nonpositive
/// stability margin, unbounded forcing where boundedness is required).
class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

/// A simulated state became NaN or infinite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t node, double time)
      : Error("non-finite state at node " + std::to_string(node) + " (t=" + std::to_string(time) +
              ")"),
        node_(node),
        time_(time) {}

  std::size_t node() const noexcept { return node_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t node_;
  double time_;
};

/// Picard iteration exhausted its sweep budget.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}

  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// Scenario file is malformed, has unknown keys, or misses required values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A declared constant failed its audit (dissipation envelope, Lipschitz bound).
class AuditFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace aasde
