#pragma once

#include <span>
#include <vector>

namespace cmfg {

// Thomas algorithm for a tridiagonal system. lower[0] and upper[n-1] are
// ignored. Throws NumericError on a zero pivot.
void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs_inout);

// LU factors of a fixed tridiagonal matrix, reused across time steps.
class TridiagonalFactor {
 public:
  TridiagonalFactor() = default;
  TridiagonalFactor(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper);

  // Solves in place.
  void solve(std::span<double> rhs_inout) const;
  int size() const { return static_cast<int>(pivot_.size()); }

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> pivot_;  // modified diagonal
};

}  // namespace cmfg
