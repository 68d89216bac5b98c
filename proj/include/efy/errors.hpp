#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace efy {

/// Caller broke a documented precondition (shape mismatch, asymmetric input,
/// label outside the output set, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A scalar field returned NaN/Inf where a finite value was required.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky hit a non-positive pivot.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(std::size_t pivot, double value)
      : std::runtime_error("matrix is not positive definite: pivot " + std::to_string(pivot) +
                           " = " + std::to_string(value)),
        pivot_(pivot) {}

  std::size_t pivot() const { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Gradient requested where the regularizer is not differentiable (entropy at 0 or 1).
class DomainBoundaryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The regularized maximization has no finite solution for this input
/// (e.g. gamma*I - A not positive definite).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterates escaped to infinity; the conjugate is +inf.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace efy
