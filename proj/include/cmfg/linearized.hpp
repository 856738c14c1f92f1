#pragma once

#include <vector>

#include "cmfg/grid.hpp"
#include "cmfg/measure.hpp"
#include "cmfg/mfg_solver.hpp"

namespace cmfg {

enum class LinearMode { Derivative, Differences, Remainder };

// A source term d/dx(coef * measure) in the forward equation; it also
// enters the clearing relation through sum_i coef_i measure_i.
struct FluxTerm {
  Field coef;
  std::vector<MeasureVector> measure;
};

// Backward-equation coefficients V1, V2 and f live on HJB steps (row k is
// step k -> uses the gradient of level k+1; row nt is unused). V3..V5 live
// on time levels.
struct LinearizedCoeffs {
  LinearMode mode = LinearMode::Derivative;
  Field V1, V2, V3, V4, V5;
  Field f;
  std::vector<FluxTerm> nu;
  double V4_min = 0.0, V4_max = 0.0;
  double V5_min = 0.0, V5_max = 0.0;
  bool V4_in_box = true;  // V4 within [1/C_H, C_H] up to tolerance
};

LinearizedCoeffs build_coeffs(const MfgSolution& sol, LinearMode mode, const MfgSolution* second = nullptr);

struct LinearizedOptions {
  double damping = 0.5;
  double tol = 1e-10;  // relative to sup |Q|
  int max_iter = 1000;
  bool auto_halve = true;
};

struct LinearizedSolution {
  Field w;
  Field wx;
  std::vector<MeasureVector> mu;
  std::vector<double> sQ;
  int iterations = 0;
  std::vector<double> residual_history;
  std::vector<double> clearing_residual;  // equation (iii) per level
};

LinearizedSolution solve_linearized(const MfgSolution& base, const LinearizedCoeffs& coeffs,
                                    const MeasureVector& mu0, const LinearizedOptions& opts = {});

struct KernelOptions {
  bool mollified = false;
  double width_cells = 2.0;  // Gaussian width in cells when mollified
  LinearizedOptions solver;
};

// w(., 0) of the Derivative-mode system started from a unit mass at y.
std::vector<double> master_derivative_kernel(const MfgSolution& base, double y, const KernelOptions& opts = {});
// Same with precomputed Derivative-mode coefficients.
std::vector<double> master_derivative_kernel(const MfgSolution& base, const LinearizedCoeffs& coeffs, double y,
                                             const KernelOptions& opts = {});

struct EnergyGap {
  double lhs = 0.0;
  double rhs = 0.0;
  double value_norm = 0.0;    // ||u_hat(.,0) - u(.,0)||_X2
  double measure_norm = 0.0;  // ||m_hat_0 - m_0||_{-2}
};

EnergyGap energy_gap(const MfgSolution& sol, const MfgSolution& sol_hat);

}  // namespace cmfg
