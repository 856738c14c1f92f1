#include "cmfg/grid.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cmfg/errors.hpp"

namespace cmfg {

int Grid::nearest_node(double y) const {
  const int i = static_cast<int>(std::lround(y / dx()));
  return std::clamp(i, 1, nx);
}

void Grid::validate() const {
  if (!(L > 0.0) || !std::isfinite(L)) throw DomainError(fmt::format("grid: L must be positive, got {}", L));
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError(fmt::format("grid: T must be positive, got {}", T));
  if (nx < 3) throw DomainError(fmt::format("grid: nx must be at least 3, got {}", nx));
  if (nt < 1) throw DomainError(fmt::format("grid: nt must be at least 1, got {}", nt));
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError(fmt::format("grid: sigma must be positive, got {}", sigma));
}

bool Grid::same_mesh(const Grid& o) const {
  return nx == o.nx && nt == o.nt && L == o.L && T == o.T && sigma == o.sigma;
}

double Field::sup_abs() const {
  double s = 0.0;
  for (double v : data_) s = std::max(s, std::abs(v));
  return s;
}

double sup_distance(const Field& a, const Field& b) {
  if (a.levels() != b.levels() || a.nodes() != b.nodes())
    throw DomainError("sup_distance: field shapes differ");
  double s = 0.0;
  const auto& ra = a.raw();
  const auto& rb = b.raw();
  for (std::size_t i = 0; i < ra.size(); ++i) s = std::max(s, std::abs(ra[i] - rb[i]));
  return s;
}

}  // namespace cmfg
