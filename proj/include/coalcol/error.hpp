#pragma once

#include <stdexcept>
#include <string>

namespace coalcol {

// Base of every exception thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

// Quadrature or inversion failed to reach its tolerance.
struct NumericalError : Error {
  NumericalError(const std::string& what, double achieved)
      : Error(what + " (achieved error " + std::to_string(achieved) + ")"),
        achieved_tolerance(achieved) {}
  double achieved_tolerance;
};

// Two independent computational routes disagreed.
struct ConsistencyError : Error {
  using Error::Error;
};

// The measure lacks the structure an operation needs (e.g. no power law at 0).
struct UnsupportedMeasure : Error {
  using Error::Error;
};

// A configured size cap was exceeded.
struct ResourceLimit : Error {
  using Error::Error;
};

struct InfeasibleParams : Error {
  InfeasibleParams(const std::string& constraint_name, const std::string& detail)
      : Error("infeasible parameters: " + constraint_name + ": " + detail),
        constraint(constraint_name) {}
  std::string constraint;
};

// A bounding law has a negative entry: n is not yet large enough.
struct NotYetValid : Error {
  NotYetValid(const std::string& what, long j, double value)
      : Error(what + " (j=" + std::to_string(j) + ", value=" + std::to_string(value) + ")"),
        offending_j(j),
        offending_value(value) {}
  long offending_j;
  double offending_value;
};

struct DominanceNotVerified : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace coalcol
