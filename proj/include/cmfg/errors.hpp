#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cmfg {

// Input outside the mathematical domain of an operation (negative rates,
// t <= 0 for the heat kernel, violated prudence bound, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A numerical kernel failed (singular tridiagonal system, root finder stuck).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fixed-point iteration ran out of iterations. Carries the per-iteration
// sup-norm change so callers can decide to retry with more damping.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> residuals)
      : std::runtime_error(what), residuals_(std::move(residuals)) {}

  const std::vector<double>& residual_history() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

}  // namespace cmfg
