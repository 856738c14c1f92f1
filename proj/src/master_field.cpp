#include "cmfg/master_field.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cmfg/diagnostics.hpp"
#include "cmfg/errors.hpp"
#include "cmfg/parallel.hpp"

namespace cmfg {

MasterEvaluation eval_U(const MfgSolution& sol) {
  MasterEvaluation ev;
  const auto u0 = sol.u.u[0];
  ev.U.assign(u0.begin(), u0.end());
  ev.Qstar0 = sol.Q_path.front();
  return ev;
}

MasterEvaluation eval_U(const MfgProblem& problem, const SolverOptions& opts) {
  return eval_U(solve_finite(problem, opts));
}

std::vector<double> support_y_grid(const MfgSolution& base) {
  const Grid& g = base.problem.grid;
  const auto& m0 = base.problem.m0;
  std::set<int> nodes;
  for (int i = 1; i <= g.nx; ++i) {
    if (m0[i] == 0.0) continue;
    for (int d = -1; d <= 1; ++d)
      if (i + d >= 1 && i + d <= g.nx) nodes.insert(i + d);
  }
  std::vector<double> ys;
  for (int i : nodes) ys.push_back(g.x(i));
  return ys;
}

std::vector<double> geometric_y_grid(const Grid& g, double y_max, int count) {
  std::set<int> nodes;
  const double y_min = g.dx();
  for (int k = 0; k < count; ++k) {
    const double y = y_max * std::pow(y_min / y_max, static_cast<double>(k) / std::max(count - 1, 1));
    nodes.insert(g.nearest_node(y));
  }
  std::vector<double> ys;
  for (int i : nodes) ys.push_back(g.x(i));
  return ys;
}

std::vector<std::vector<double>> kernel_matrix(const MfgSolution& base, const std::vector<double>& ys,
                                               const KernelOptions& opts) {
  const auto coeffs = build_coeffs(base, LinearMode::Derivative);
  std::vector<std::vector<double>> K(ys.size());
  parallel_for(ys.size(), [&](std::size_t j) { K[j] = master_derivative_kernel(base, coeffs, ys[j], opts); });
  return K;
}

MasterEvaluation master_residual(const MfgSolution& base, const KernelOptions& opts, bool with_kernels) {
  const auto& p = base.problem;
  const Grid& g = p.grid;
  const auto& m0 = p.m0;
  MasterEvaluation ev = eval_U(base);
  ev.mollified = opts.mollified;
  const double ia = inverse_moment(m0, 2.5);
  if (!std::isfinite(ia)) spdlog::warn("master_residual: m0 has no finite inverse moment of order 2.5");

  std::vector<double> Ux(g.nodes()), Uxx(g.nodes()), phi(g.nodes());
  gradient(g, ev.U, Ux);
  second_difference(g, ev.U, Uxx);
  for (int i = 0; i < g.nodes(); ++i) phi[i] = std::max(Ux[i], 0.0);
  const double eps = p.eps[0];
  const double Q = market_clearing(p.model, eps, phi, m0);
  ev.Qstar0 = Q;
  const double dx = g.dx(), s2 = 0.5 * g.sigma * g.sigma;

  // sum_j m0_j [Ha_j D1 + s2 D2]_y K(., y_j) is K applied to one signed
  // source, so a single linearized solve gives the whole measure term.
  std::vector<double> weight(g.nodes(), 0.0);
  for (int j = 1; j <= g.nx; ++j) {
    if (m0[j] == 0.0) continue;
    const double Ha = dH_da(p.model, {eps, Q, phi[j]});
    weight[j + 1] += m0[j] * (Ha / (2.0 * dx) + s2 / (dx * dx));
    weight[j] -= m0[j] * 2.0 * s2 / (dx * dx);
    weight[j - 1] += m0[j] * (-Ha / (2.0 * dx) + s2 / (dx * dx));
  }
  MeasureVector source(g, true);
  for (int l = 1; l <= g.nx; ++l) {
    if (weight[l] == 0.0) continue;
    if (opts.mollified) {
      source += weight[l] * mollified_dirac(g, g.x(l), opts.width_cells * dx);
    } else {
      source[l] += weight[l];
    }
  }
  source.set_signed(true);
  const auto coeffs = build_coeffs(base, LinearMode::Derivative);
  const auto lin = solve_linearized(base, coeffs, source, opts.solver);

  ev.residual.assign(g.nodes(), 0.0);
  for (int i = 0; i < g.nodes(); ++i)
    ev.residual[i] = hamiltonian_value(p.model, {eps, Q, phi[i]}) - p.r * ev.U[i] + s2 * Uxx[i] + lin.w(0, i);

  if (with_kernels) {
    ev.y = support_y_grid(base);
    if (ev.y.size() < 3) spdlog::warn("master_residual: kernel y-grid has only {} nodes", ev.y.size());
    ev.dUdm = kernel_matrix(base, ev.y, opts);
  }
  return ev;
}

KernelBounds dUdm_bound_check(const Grid& g, const std::vector<double>& ys,
                              const std::vector<std::vector<double>>& kernels, double alpha) {
  if (ys.size() != kernels.size()) throw DomainError("dUdm_bound_check: y and kernel counts differ");
  if (ys.size() < 3) throw DomainError("dUdm_bound_check: need at least 3 y nodes");
  for (std::size_t j = 1; j < ys.size(); ++j)
    if (!(ys[j] > ys[j - 1])) throw DomainError("dUdm_bound_check: y grid must be ascending");
  KernelBounds b;
  b.y = ys;
  const std::size_t n = ys.size();
  const int N = g.nodes();
  std::vector<double> d1(N), d2(N);
  for (auto& v : b.norms) v.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    b.norms[0][j] = weighted_norm_Xn(kernels[j], g.dx(), 2);
    // nonuniform three-point differences in y (one-sided at the ends)
    const std::size_t jm = j == 0 ? 0 : (j == n - 1 ? n - 3 : j - 1);
    const double y0 = ys[jm], y1 = ys[jm + 1], y2 = ys[jm + 2], y = ys[j];
    const double h1 = y1 - y0, h2 = y2 - y1;
    for (int i = 0; i < N; ++i) {
      const double f0 = kernels[jm][i], f1 = kernels[jm + 1][i], f2 = kernels[jm + 2][i];
      const double s01 = (f1 - f0) / h1, s12 = (f2 - f1) / h2;
      const double c2 = (s12 - s01) / (h1 + h2);
      d1[i] = s01 + c2 * (2.0 * y - y0 - y1);
      d2[i] = 2.0 * c2;
    }
    b.norms[1][j] = weighted_norm_Xn(d1, g.dx(), 2);
    b.norms[2][j] = weighted_norm_Xn(d2, g.dx(), 2);
  }
  for (int l = 0; l < 3; ++l) {
    b.target[l] = -alpha - l;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int k = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (ys[j] >= 1.0 || !(b.norms[l][j] > 0.0)) continue;
      const double x = std::log(ys[j]), yv = std::log(b.norms[l][j]);
      sx += x;
      sy += yv;
      sxx += x * x;
      sxy += x * yv;
      ++k;
    }
    b.exponent[l] = k >= 2 ? (k * sxy - sx * sy) / (k * sxx - sx * sx) : std::nan("");
  }
  return b;
}

}  // namespace cmfg
