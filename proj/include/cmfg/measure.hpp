#pragma once

#include <span>
#include <vector>

#include "cmfg/grid.hpp"

namespace cmfg {

// Discrete measure on the spatial mesh: one mass per node-centred cell
// [x_i - dx/2, x_i + dx/2]. Entries 0 and nx+1 belong to the boundary nodes
// and are always zero (absorbing Dirichlet condition).
class MeasureVector {
 public:
  MeasureVector() = default;
  explicit MeasureVector(const Grid& g, bool is_signed = false)
      : mass_(g.nodes(), 0.0), dx_(g.dx()), signed_(is_signed) {}

  int nodes() const { return static_cast<int>(mass_.size()); }
  int nx() const { return nodes() - 2; }
  double dx() const { return dx_; }
  bool is_signed() const { return signed_; }
  void set_signed(bool s) { signed_ = s; }

  double& operator[](int i) { return mass_[i]; }
  double operator[](int i) const { return mass_[i]; }
  std::span<const double> masses() const { return mass_; }
  std::span<double> masses() { return mass_; }

  double total() const;
  double total_variation() const;
  double density(int i) const { return mass_[i] / dx_; }

  // Clamps negative entries of an unsigned measure to zero. Returns the
  // total clamped mass (the "defect") so callers can log it.
  double clamp_negative();

  MeasureVector& operator+=(const MeasureVector& o);
  MeasureVector& operator-=(const MeasureVector& o);
  MeasureVector& operator*=(double s);

 private:
  std::vector<double> mass_;
  double dx_ = 0.0;
  bool signed_ = false;
};

MeasureVector operator+(MeasureVector a, const MeasureVector& b);
MeasureVector operator-(MeasureVector a, const MeasureVector& b);
MeasureVector operator*(double s, MeasureVector a);

// Built-in initial-measure families.
MeasureVector dirac(const Grid& g, double y, double mass = 1.0);
// Gaussian of standard deviation `width` centred at y, restricted to the
// interior cells and renormalised to `mass`.
MeasureVector mollified_dirac(const Grid& g, double y, double width, double mass = 1.0);
MeasureVector uniform(const Grid& g, double a, double b, double mass = 1.0);
// Lognormal(mu, s) density truncated to (0, L), renormalised to `mass`.
MeasureVector truncated_lognormal(const Grid& g, double mu, double s, double mass = 1.0);

}  // namespace cmfg
