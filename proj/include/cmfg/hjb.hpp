#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cmfg/grid.hpp"
#include "cmfg/hamiltonian.hpp"
#include "cmfg/tridiagonal.hpp"

namespace cmfg {

// eps(t_k) per time level.
struct EpsilonSchedule {
  double eps0 = 0.0;
  std::vector<double> values;

  // eps0 * s((T - t)/l), s(z) = z^2 (3 - 2z) on [0,1], l = min(T, max(T/2, 1.5 eps0)).
  static EpsilonSchedule smooth(const Grid& g, double eps0);
  // Throws DomainError unless nonnegative, nonincreasing, eps(T) = 0 and
  // discrete slope <= 1 + 1e-9.
  void validate(const Grid& g) const;

  double operator[](int k) const { return values[k]; }
};

enum class TerminalConstruction { CubicHPositive, CubicHZero, Zero, Custom };

struct TerminalData {
  TerminalConstruction construction = TerminalConstruction::Zero;
  double c1 = 0.0;
  double c3 = 0.0;
  double h = 0.0;
  std::function<double(double)> custom;  // only for Custom

  double value(double x) const;
  std::vector<double> sample(const Grid& g) const;
};

// Terminal profile with u_T(0) = 0, u_T'(0) = c3 and the compatibility
// condition (sigma^2/2) u_T''(0) + H(0,0,c3) = 0.
TerminalData build_terminal(const PriceModel& model, double sigma, double c3);
TerminalData zero_terminal();

// M(sigma, r, c1, c3): a priori bound on u_x.
double max_ux_bound(const PriceModel& model, double sigma, double r, double c1, double c3);

// u on the full mesh with one-sided differences at x = 0, centred inside and
// the Neumann ghost at x = L.
struct ValueField {
  Field u;
  Field ux;
  Field uxx;
  double clamp_defect = 0.0;  // max |min(u_x, 0)| seen before Hamiltonian calls
};

// Gradient used by the Hamiltonian: second-order one-sided at 0, centred
// inside, zero at L.
void gradient(const Grid& g, std::span<const double> u, std::span<double> ux);
void second_difference(const Grid& g, std::span<const double> u, std::span<double> uxx);
void fill_derivatives(const Grid& g, ValueField& v);

using HamiltonianFn = std::function<double(double eps, double Q, double a)>;

struct HjbOptions {
  // replaces H(eps, Q, a) when set (tests only)
  HamiltonianFn hamiltonian;
  // one extra sweep per step with a refreshed gradient when dt is coarse
  bool sweep = true;
};

// Implicit backward operator (I/dt - sigma^2/2 D2 + r) on nodes 1..nx+1 with
// u_0 = 0 and the Neumann ghost at L; shared with the linearized solver.
class BackwardOperator {
 public:
  BackwardOperator(const Grid& g, double r);
  // rhs holds nodes 0..nx+1; node 0 is set to 0 on return.
  void solve(std::span<double> rhs_inout) const;
  double inv_dt() const { return inv_dt_; }

 private:
  TridiagonalFactor factor_;
  double inv_dt_;
};

ValueField hjb_solve(const Grid& g, const PriceModel& model, const EpsilonSchedule& eps,
                     std::span<const double> Q_path, double r, const TerminalData& uT,
                     const HjbOptions& opts = {});

}  // namespace cmfg
