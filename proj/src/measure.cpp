#include "cmfg/measure.hpp"

#include <cmath>

#include <fmt/format.h>

#include "cmfg/errors.hpp"

namespace cmfg {

double MeasureVector::total() const {
  double s = 0.0;
  for (double v : mass_) s += v;
  return s;
}

double MeasureVector::total_variation() const {
  double s = 0.0;
  for (double v : mass_) s += std::abs(v);
  return s;
}

double MeasureVector::clamp_negative() {
  if (signed_) return 0.0;
  double defect = 0.0;
  for (double& v : mass_) {
    if (v < 0.0) {
      defect += -v;
      v = 0.0;
    }
  }
  return defect;
}

static void check_shape(const MeasureVector& a, const MeasureVector& b) {
  if (a.nodes() != b.nodes()) throw DomainError("measure: mesh mismatch");
}

MeasureVector& MeasureVector::operator+=(const MeasureVector& o) {
  check_shape(*this, o);
  for (int i = 0; i < nodes(); ++i) mass_[i] += o.mass_[i];
  signed_ = signed_ || o.signed_;
  return *this;
}

MeasureVector& MeasureVector::operator-=(const MeasureVector& o) {
  check_shape(*this, o);
  for (int i = 0; i < nodes(); ++i) mass_[i] -= o.mass_[i];
  signed_ = true;
  return *this;
}

MeasureVector& MeasureVector::operator*=(double s) {
  for (double& v : mass_) v *= s;
  if (s < 0.0) signed_ = true;
  return *this;
}

MeasureVector operator+(MeasureVector a, const MeasureVector& b) { return a += b; }
MeasureVector operator-(MeasureVector a, const MeasureVector& b) { return a -= b; }
MeasureVector operator*(double s, MeasureVector a) { return a *= s; }

MeasureVector dirac(const Grid& g, double y, double mass) {
  if (!(y > 0.0 && y < g.L)) throw DomainError(fmt::format("dirac: location {} outside (0, L)", y));
  MeasureVector m(g);
  m[g.nearest_node(y)] = mass;
  return m;
}

namespace {

MeasureVector normalised(const Grid& g, const std::vector<double>& w, double mass, const char* what) {
  double s = 0.0;
  for (double v : w) s += v;
  if (!(s > 0.0)) throw DomainError(fmt::format("{}: no mass on the interior mesh", what));
  MeasureVector m(g);
  for (int i = 1; i <= g.nx; ++i) m[i] = mass * w[i] / s;
  return m;
}

}  // namespace

MeasureVector mollified_dirac(const Grid& g, double y, double width, double mass) {
  if (!(width > 0.0)) throw DomainError("mollified_dirac: width must be positive");
  std::vector<double> w(g.nodes(), 0.0);
  for (int i = 1; i <= g.nx; ++i) {
    const double z = (g.x(i) - y) / width;
    w[i] = std::exp(-0.5 * z * z);
  }
  return normalised(g, w, mass, "mollified_dirac");
}

MeasureVector uniform(const Grid& g, double a, double b, double mass) {
  if (!(a < b) || a < 0.0 || b > g.L) throw DomainError(fmt::format("uniform: bad interval [{}, {}]", a, b));
  // exact overlap of each node cell with [a, b]
  std::vector<double> w(g.nodes(), 0.0);
  const double h = g.dx();
  for (int i = 1; i <= g.nx; ++i) {
    const double lo = std::max(a, g.x(i) - 0.5 * h);
    const double hi = std::min(b, g.x(i) + 0.5 * h);
    if (hi > lo) w[i] = hi - lo;
  }
  return normalised(g, w, mass, "uniform");
}

MeasureVector truncated_lognormal(const Grid& g, double mu, double s, double mass) {
  if (!(s > 0.0)) throw DomainError("truncated_lognormal: s must be positive");
  std::vector<double> w(g.nodes(), 0.0);
  for (int i = 1; i <= g.nx; ++i) {
    const double x = g.x(i);
    const double z = (std::log(x) - mu) / s;
    w[i] = std::exp(-0.5 * z * z) / x;
  }
  return normalised(g, w, mass, "truncated_lognormal");
}

}  // namespace cmfg
