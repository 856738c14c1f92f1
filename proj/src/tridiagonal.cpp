#include "cmfg/tridiagonal.hpp"

#include <cmath>

#include <fmt/format.h>

#include "cmfg/errors.hpp"

namespace cmfg {

void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> d) {
  const std::size_t n = diag.size();
  if (lower.size() != n || upper.size() != n || d.size() != n)
    throw NumericError("tridiagonal: size mismatch");
  std::vector<double> c(n);
  double piv = diag[0];
  if (piv == 0.0 || !std::isfinite(piv)) throw NumericError("tridiagonal: zero pivot at row 0");
  c[0] = upper[0] / piv;
  d[0] /= piv;
  for (std::size_t i = 1; i < n; ++i) {
    piv = diag[i] - lower[i] * c[i - 1];
    if (piv == 0.0 || !std::isfinite(piv)) throw NumericError(fmt::format("tridiagonal: zero pivot at row {}", i));
    c[i] = upper[i] / piv;
    d[i] = (d[i] - lower[i] * d[i - 1]) / piv;
  }
  for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
}

TridiagonalFactor::TridiagonalFactor(std::vector<double> lower, std::vector<double> diag,
                                     std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)), pivot_(std::move(diag)) {
  const std::size_t n = pivot_.size();
  if (lower_.size() != n || upper_.size() != n) throw NumericError("tridiagonal: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) pivot_[i] -= lower_[i] * upper_[i - 1] / pivot_[i - 1];
    if (pivot_[i] == 0.0 || !std::isfinite(pivot_[i]))
      throw NumericError(fmt::format("tridiagonal: zero pivot at row {}", i));
  }
}

void TridiagonalFactor::solve(std::span<double> d) const {
  const std::size_t n = pivot_.size();
  if (d.size() != n) throw NumericError("tridiagonal: size mismatch");
  for (std::size_t i = 1; i < n; ++i) d[i] -= lower_[i] / pivot_[i - 1] * d[i - 1];
  d[n - 1] /= pivot_[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - upper_[i] * d[i + 1]) / pivot_[i];
}

}  // namespace cmfg
