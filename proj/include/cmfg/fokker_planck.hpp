#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cmfg/grid.hpp"
#include "cmfg/measure.hpp"

namespace cmfg {

struct HolderEstimate {
  double exponent = 0.0;
  double constant = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
};

// Total surviving mass per time level.
struct MassHistory {
  std::vector<double> t;
  std::vector<double> eta;
  HolderEstimate holder;  // exponent is NaN when too few levels to fit
};

struct FpResult {
  std::vector<MeasureVector> m;  // one per time level
  MassHistory history;
  double clamp_defect = 0.0;     // total negative mass clamped away
};

// S(x,t) = (2 sigma^2 pi t)^(-1/2) exp(-x^2 / (2 sigma^2 t)).
double heat_kernel(double x, double t, double sigma);

// n-th x-derivative of S, n in {0,1,2,3}.
double hermite_kernel_factor(int n, double x, double t, double sigma);

// Method-of-images solution of the absorbed heat equation, as a density at
// every mesh node (zero at x = 0).
std::vector<double> heat_solution_density(const Grid& g, const MeasureVector& m0, double t);
// Same solution as cell masses (density times dx).
MeasureVector heat_solution(const Grid& g, const MeasureVector& m0, double t);

// eta^h[m0](t): surviving mass of the absorbed heat flow started from m0.
double mass_function_heat(const MeasureVector& m0, double t, double sigma);
// Same for a continuous initial measure given by its tail z -> m0((z, inf)).
double mass_function_heat(const std::function<double(double)>& tail, double t, double sigma);

// Implicit upwind step of m_t = (sigma^2/2) m_xx + (b m)_x with Dirichlet
// conditions at both ends. b_next holds nodal drift at the new level (b >= 0
// pushes mass toward 0). extra_flux, if non-empty, holds nx+1 explicit face
// fluxes (face f sits between nodes f and f+1) whose divergence is subtracted.
void fp_implicit_step(const Grid& g, std::span<const double> m_prev, std::span<const double> b_next,
                      std::span<const double> extra_flux, std::span<double> m_next);

// Upwind node for face f given nodal drift b: f+1 when the face-averaged
// drift is nonnegative, f otherwise.
inline int upwind_node(std::span<const double> b, int f) { return 0.5 * (b[f] + b[f + 1]) >= 0.0 ? f + 1 : f; }

// Full trajectory from m0 with drift given per (level, node).
FpResult fp_solve(const Grid& g, const MeasureVector& m0, const Field& drift, bool fit_holder = true);

// sum_i x_i^(-alpha) |m_i| over interior cells.
double inverse_moment(const MeasureVector& m, double alpha);

struct McResult {
  std::vector<double> t;                  // output times
  std::vector<double> survival;           // surviving mass fraction times initial mass
  std::vector<double> survival_stderr;
  std::vector<MeasureVector> histogram;   // binned surviving mass per output time
  std::vector<double> mean_position;      // mean over surviving paths
};

using DriftFn = std::function<double(double x, double t)>;

// Euler-Maruyama for dX = -b(X,t) dt + sigma dW, killed at the first crossing
// of 0 (with a Brownian-bridge test between steps). Starting points are
// drawn from the cell masses of m0; histograms are binned on g. Output is
// recorded every `record_every` steps. Deterministic in seed regardless of
// thread count.
McResult mc_absorbed_sde(const Grid& g, const MeasureVector& m0, const DriftFn& b, double sigma,
                         std::size_t n_paths, double dt_mc, double horizon, std::uint64_t seed,
                         int record_every = 1);

}  // namespace cmfg
