#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmfg/fokker_planck.hpp"
#include "cmfg/hamiltonian.hpp"
#include "cmfg/hjb.hpp"
#include "cmfg/report.hpp"

namespace cmfg {

struct MfgProblem {
  Grid grid;
  PriceModel model = PriceModel::linear();
  EpsilonSchedule eps;
  double r = 1.0;
  MeasureVector m0;
  TerminalData uT;
};

struct SolverOptions {
  double damping = 0.5;
  double tol = 1e-7;
  int max_iter = 500;
  bool auto_halve = true;
  std::vector<double> initial_Q;  // per time level; empty means q_cap/2
  HjbOptions hjb;
};

struct AssumptionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  std::string relation;
  bool ok = false;
};

struct AssumptionReport {
  double Q_bar = 0.0;
  double c = 1.0;        // c(rho_bar, eps)
  double P_bar = 1.0;
  double M = 0.0;
  double C_H = 1.0;
  double kappa = 0.0, kappa0 = 0.0, kappa1 = 0.0;
  AssumptionCheck smooth_H;   // M < P(eps Q_bar)
  AssumptionCheck kappa_ok;   // r >= 2 max(kappa, kappa0, kappa1)
  AssumptionCheck r_star;     // r >= 1000 max{...}^2
  AssumptionCheck eps_star;   // eps <= (4 C_H c (1+Q_bar)(C_H (P(0)+1) + P_bar))^-1
  AssumptionCheck linear_eps; // eps < 2, linear demand only
  bool linear = false;

  nlohmann::json to_json() const;
  // Small-eps regime or linear-demand regime.
  bool uniqueness_regime() const;
};

AssumptionReport check_assumptions(const PriceModel& model, double eps, double r, double sigma);

struct MfgSolution {
  MfgProblem problem;
  ValueField u;
  std::vector<MeasureVector> m;
  MassHistory history;
  std::vector<double> Q_path;
  int iterations = 0;
  std::vector<double> residual_history;  // sup_t |Q_hat - Q| per iteration
  std::vector<double> clearing_residual; // per time level, for the stored (u, m, Q)
  DiagnosticReport diagnostics;
  AssumptionReport assumptions;
};

// Drift q*(eps_k, Q_k, u_x) at every node of every level, u_x clamped at 0.
Field equilibrium_drift(const MfgProblem& p, const Field& ux, const std::vector<double>& Q);

MfgSolution solve_finite(const MfgProblem& problem, const SolverOptions& opts = {});

struct InfiniteSolveResult {
  MfgSolution solution;            // largest horizon
  std::vector<double> T_list;
  std::vector<double> tail_differences;  // ||u^{T_{i+1}} - u^{T_i}||_inf on [0, T_i/2]
};

// Solves on each horizon of T_list with nt = round(T / dt) (dt from
// `grid`), eps(0) = eps and terminal data with c3 = 1/T.
InfiniteSolveResult solve_infinite(const Grid& grid, const PriceModel& model, double eps, double r,
                                   const MeasureVector& m0, const std::vector<double>& T_list,
                                   const SolverOptions& opts = {});

struct UniquenessResult {
  double max_distance = 0.0;
  int converged = 0;
  std::vector<std::string> failures;
  std::vector<std::vector<double>> paths;
};

// Solves from n_starts random initial Q paths (per-level uniform on
// [0, q_cap]) and reports the largest pairwise sup distance.
UniquenessResult uniqueness_probe(const MfgProblem& problem, const SolverOptions& opts, int n_starts,
                                  std::uint64_t seed);

}  // namespace cmfg
