#pragma once

#include <stdexcept>
#include <string>

namespace besqlab {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A quadrature (or nested quadrature) exhausted its refinement budget.
class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Denominator of a conditional density is too small to trust the quotient.
class UnreliableRatioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejection sampler could not reach its target within the attempt budget.
class BudgetExhaustedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or incomplete run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace besqlab
