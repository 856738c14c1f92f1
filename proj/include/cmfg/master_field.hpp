#pragma once

#include <array>
#include <vector>

#include "cmfg/linearized.hpp"
#include "cmfg/mfg_solver.hpp"

namespace cmfg {

struct MasterEvaluation {
  std::vector<double> U;       // U(x_i, m0) on mesh nodes
  double Qstar0 = 0.0;
  std::vector<double> y;       // kernel source locations
  std::vector<std::vector<double>> dUdm;  // dUdm[j][i] = K(m0, x_i, y_j)
  std::vector<double> residual;
  bool mollified = false;
};

// t = 0 slice of a computed equilibrium.
MasterEvaluation eval_U(const MfgSolution& sol);
// Solves the finite-horizon problem first.
MasterEvaluation eval_U(const MfgProblem& problem, const SolverOptions& opts = {});

// Nodes carrying mass of m0 plus one node on each side.
std::vector<double> support_y_grid(const MfgSolution& base);
// `count` nodes geometrically spaced from y_max down toward 0 (distinct mesh nodes).
std::vector<double> geometric_y_grid(const Grid& g, double y_max, int count);

// Kernel slices for every y, computed concurrently.
std::vector<std::vector<double>> kernel_matrix(const MfgSolution& base, const std::vector<double>& ys,
                                               const KernelOptions& opts = {});

// Pointwise master-equation residual at the mesh nodes with K(x, 0) = 0.
// The kernel slices on the support grid (ev.y, ev.dUdm) are only filled
// when with_kernels is set.
MasterEvaluation master_residual(const MfgSolution& base, const KernelOptions& opts = {},
                                 bool with_kernels = false);

struct KernelBounds {
  std::vector<double> y;
  std::array<std::vector<double>, 3> norms;  // X2 norms of d^l/dy^l K(., y), l = 0, 1, 2
  std::array<double, 3> exponent{};          // fitted log-log slope of norms for y < 1
  std::array<double, 3> target{};            // -alpha - l
};

// ys must be ascending mesh nodes with kernels[j] = K(., ys[j]).
KernelBounds dUdm_bound_check(const Grid& g, const std::vector<double>& ys,
                              const std::vector<std::vector<double>>& kernels, double alpha);

}  // namespace cmfg
