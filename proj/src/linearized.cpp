#include "cmfg/linearized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cmfg/diagnostics.hpp"
#include "cmfg/errors.hpp"
#include "cmfg/fokker_planck.hpp"
#include "cmfg/hjb.hpp"

namespace cmfg {

namespace {

// Gauss-Legendre on [0, 1]
constexpr double kGx[8] = {0.019855071751231856, 0.10166676129318664, 0.2372337950418355, 0.4082826787521751,
                           0.5917173212478249,   0.7627662049581645,  0.8983332387068134, 0.9801449282487681};
constexpr double kGw[8] = {0.05061426814518813, 0.11119051722668724, 0.15685332293894363, 0.18134189168918100,
                           0.18134189168918100, 0.15685332293894363, 0.11119051722668724, 0.05061426814518813};

struct SAverage {
  double Ha = 0, HQ = 0, Haa = 0, HaQ = 0;
};

SAverage s_average(const PriceModel& model, double eps, double Q, double Qh, double a, double ah) {
  SAverage s;
  for (int k = 0; k < 8; ++k) {
    const double t = kGx[k];
    const auto e = evaluate(model, {eps, Q + t * (Qh - Q), a + t * (ah - a)});
    s.Ha += kGw[k] * e.Ha;
    s.HQ += kGw[k] * e.HQ;
    s.Haa += kGw[k] * e.Haa;
    s.HaQ += kGw[k] * e.HaQ;
  }
  return s;
}

double clamp0(double v) { return std::max(v, 0.0); }

}  // namespace

LinearizedCoeffs build_coeffs(const MfgSolution& sol, LinearMode mode, const MfgSolution* second) {
  const auto& p = sol.problem;
  const Grid& g = p.grid;
  if (mode != LinearMode::Derivative) {
    if (!second) throw DomainError("build_coeffs: Differences and Remainder modes need a second solution");
    if (!second->problem.grid.same_mesh(g)) throw DomainError("build_coeffs: solutions live on different meshes");
  }
  LinearizedCoeffs c;
  c.mode = mode;
  c.V1 = Field(g);
  c.V2 = Field(g);
  c.V3 = Field(g);
  c.V4 = Field(g);
  c.V5 = Field(g);
  c.f = Field(g);
  const auto& ux = sol.u.ux;
  const auto& Q = sol.Q_path;

  // backward-equation coefficients on HJB steps
  for (int k = 0; k < g.nt; ++k) {
    const double e = p.eps[k];
    for (int i = 0; i < g.nodes(); ++i) {
      const double a = clamp0(ux(k + 1, i));
      if (mode == LinearMode::Differences) {
        const double ah = clamp0(second->u.ux(k + 1, i));
        const auto s = s_average(p.model, e, Q[k], second->Q_path[k], a, ah);
        c.V1(k, i) = s.Ha;
        c.V2(k, i) = s.HQ;
      } else {
        const auto b = evaluate(p.model, {e, Q[k], a});
        c.V1(k, i) = b.Ha;
        c.V2(k, i) = b.HQ;
        if (mode == LinearMode::Remainder) {
          const double ah = clamp0(second->u.ux(k + 1, i));
          const auto s = s_average(p.model, e, Q[k], second->Q_path[k], a, ah);
          c.f(k, i) = -(s.Ha - b.Ha) * (ah - a) - (s.HQ - b.HQ) * (second->Q_path[k] - Q[k]);
        }
      }
    }
  }

  if (mode == LinearMode::Remainder) {
    c.nu.resize(2);
    for (auto& t : c.nu) {
      t.coef = Field(g);
      t.measure.resize(g.levels());
    }
  }
  // forward-equation coefficients on time levels
  for (int k = 0; k <= g.nt; ++k) {
    const double e = p.eps[k];
    for (int i = 0; i < g.nodes(); ++i) {
      const double a = clamp0(ux(k, i));
      const auto b = evaluate(p.model, {e, Q[k], a});
      if (mode == LinearMode::Differences) {
        const double ah = clamp0(second->u.ux(k, i));
        const auto s = s_average(p.model, e, Q[k], second->Q_path[k], a, ah);
        c.V3(k, i) = evaluate(p.model, {e, second->Q_path[k], ah}).Ha;
        c.V4(k, i) = s.Haa;
        c.V5(k, i) = s.HaQ;
      } else {
        c.V3(k, i) = b.Ha;
        c.V4(k, i) = b.Haa;
        c.V5(k, i) = b.HaQ;
        if (mode == LinearMode::Remainder) {
          const double ah = clamp0(second->u.ux(k, i));
          const double dQ = second->Q_path[k] - Q[k];
          const auto s = s_average(p.model, e, Q[k], second->Q_path[k], a, ah);
          c.nu[0].coef(k, i) = b.HaQ * dQ + b.Haa * (ah - a);
          c.nu[1].coef(k, i) = (s.HaQ - b.HaQ) * dQ + (s.Haa - b.Haa) * (ah - a);
        }
      }
    }
    if (mode == LinearMode::Remainder) {
      c.nu[0].measure[k] = second->m[k] - sol.m[k];
      c.nu[1].measure[k] = second->m[k];
    }
  }

  // V4 and V5 range where the base population lives
  c.V4_min = c.V5_min = std::numeric_limits<double>::infinity();
  c.V4_max = c.V5_max = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= g.nt; ++k)
    for (int i = 1; i <= g.nx; ++i) {
      if (ux(k, i) > sol.assumptions.M + 1e-12) continue;
      c.V4_min = std::min(c.V4_min, c.V4(k, i));
      c.V4_max = std::max(c.V4_max, c.V4(k, i));
      c.V5_min = std::min(c.V5_min, c.V5(k, i));
      c.V5_max = std::max(c.V5_max, c.V5(k, i));
    }
  const double CH = sol.assumptions.C_H;
  c.V4_in_box = c.V4_min >= 1.0 / CH - 1e-9 && c.V4_max <= CH + 1e-9;
  if (!c.V4_in_box) spdlog::warn("build_coeffs: V4 range [{}, {}] leaves [1/C_H, C_H] = [{}, {}]", c.V4_min, c.V4_max, 1.0 / CH, CH);
  return c;
}

LinearizedSolution solve_linearized(const MfgSolution& base, const LinearizedCoeffs& c, const MeasureVector& mu0,
                                    const LinearizedOptions& o) {
  const auto& p = base.problem;
  const Grid& g = p.grid;
  if (mu0.nodes() != g.nodes()) throw DomainError("solve_linearized: mu0 not on this grid");
  if (c.V1.levels() != g.levels() || c.V1.nodes() != g.nodes()) throw DomainError("solve_linearized: coefficient shape mismatch");
  if (!(o.damping > 0.0 && o.damping <= 1.0)) throw DomainError("solve_linearized: damping must lie in (0, 1]");

  const int levels = g.levels(), n = g.nodes();
  const double dx = g.dx();
  const BackwardOperator op(g, p.r);
  LinearizedSolution s;
  s.w = Field(g);
  s.wx = Field(g);
  s.mu.assign(levels, MeasureVector(g, true));
  s.mu[0] = mu0;
  s.mu[0].set_signed(true);
  std::vector<double> sQ(levels, 0.0), sQhat(levels);
  std::vector<double> rhs(n), grad(n), flux(g.nx + 1), drift(n), S(n);

  // base drift for the forward equation is -V3
  auto sweep = [&] {
    for (int k = g.nt - 1; k >= 0; --k) {
      const auto next = s.w[k + 1];
      gradient(g, next, grad);
      for (int i = 1; i < n; ++i) rhs[i] = next[i] * op.inv_dt() + c.V1(k, i) * grad[i] + c.V2(k, i) * sQ[k] - c.f(k, i);
      op.solve(rhs);
      std::copy(rhs.begin(), rhs.end(), s.w[k].begin());
    }
    for (int k = 0; k <= g.nt; ++k) gradient(g, s.w[k], s.wx[k]);
    for (int k = 0; k < g.nt; ++k) {
      const int j = k + 1;
      for (int i = 0; i < n; ++i) {
        drift[i] = -c.V3(j, i);
        S[i] = c.V4(j, i) * s.wx(j, i) + c.V5(j, i) * sQ[j];
      }
      const auto& m = base.m[j];
      for (int f = 0; f <= g.nx; ++f) {
        const int up = upwind_node(drift, f);
        double J = 0.5 * (S[f] + S[f + 1]) * m[up];
        for (const auto& t : c.nu) J += 0.5 * (t.coef(j, f) + t.coef(j, f + 1)) * t.measure[j][up];
        flux[f] = J / dx;
      }
      fp_implicit_step(g, s.mu[k].masses(), drift, flux, s.mu[j].masses());
    }
  };
  auto clearing = [&](int j, double q) {
    const auto& m = base.m[j];
    double den = 1.0, num = 0.0;
    for (int i = 1; i <= g.nx; ++i) {
      den += c.V5(j, i) * m[i];
      num -= c.V3(j, i) * s.mu[j][i] + c.V4(j, i) * s.wx(j, i) * m[i];
      for (const auto& t : c.nu) num -= t.coef(j, i) * t.measure[j][i];
    }
    return std::isnan(q) ? num / den : q * den - num;
  };

  double theta = o.damping;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= o.max_iter; ++it) {
    sweep();
    double res = 0.0, scale = 0.0;
    for (int j = 0; j < levels; ++j) {
      sQhat[j] = clearing(j, std::numeric_limits<double>::quiet_NaN());
      res = std::max(res, std::abs(sQhat[j] - sQ[j]));
      scale = std::max(scale, std::abs(sQhat[j]));
    }
    s.residual_history.push_back(res);
    if (res <= o.tol * scale) {
      s.sQ = sQhat;
      s.iterations = it;
      s.clearing_residual.resize(levels);
      for (int j = 0; j < levels; ++j) s.clearing_residual[j] = clearing(j, s.sQ[j]);
      return s;
    }
    if (o.auto_halve && res > prev && theta > 1.0 / 64.0) theta *= 0.5;
    prev = res;
    for (int j = 0; j < levels; ++j) sQ[j] += theta * (sQhat[j] - sQ[j]);
  }
  throw NonConvergenceError(fmt::format("solve_linearized: no convergence in {} iterations", o.max_iter),
                            s.residual_history);
}

std::vector<double> master_derivative_kernel(const MfgSolution& base, const LinearizedCoeffs& coeffs, double y,
                                             const KernelOptions& opts) {
  const Grid& g = base.problem.grid;
  if (!(y > 0.0 && y < g.L)) throw DomainError(fmt::format("master_derivative_kernel: y = {} outside (0, L)", y));
  MeasureVector mu0 = opts.mollified ? mollified_dirac(g, y, opts.width_cells * g.dx()) : dirac(g, y);
  mu0.set_signed(true);
  const auto sol = solve_linearized(base, coeffs, mu0, opts.solver);
  const auto w0 = sol.w[0];
  return {w0.begin(), w0.end()};
}

std::vector<double> master_derivative_kernel(const MfgSolution& base, double y, const KernelOptions& opts) {
  return master_derivative_kernel(base, build_coeffs(base, LinearMode::Derivative), y, opts);
}

EnergyGap energy_gap(const MfgSolution& a, const MfgSolution& b) {
  const Grid& g = a.problem.grid;
  if (!b.problem.grid.same_mesh(g)) throw DomainError("energy_gap: solutions live on different meshes");
  EnergyGap e;
  const double r = a.problem.r;
  for (int k = 0; k <= g.nt; ++k) {
    double s = 0.0;
    for (int i = 1; i <= g.nx; ++i) {
      const double d = a.u.ux(k, i) - b.u.ux(k, i);
      s += d * d * (a.m[k][i] + b.m[k][i]);
    }
    const double wgt = (k == 0 || k == g.nt) ? 0.5 : 1.0;
    e.lhs += wgt * g.dt() * std::exp(-r * g.t(k)) * s;
  }
  std::vector<double> w0(g.nodes());
  for (int i = 0; i < g.nodes(); ++i) w0[i] = b.u.u(0, i) - a.u.u(0, i);
  e.value_norm = weighted_norm_Xn(w0, g.dx(), 2);
  const MeasureVector dm = b.problem.m0 - a.problem.m0;
  e.measure_norm = dual_norm_minus_n(dm, 2, {w0});
  e.rhs = 8.0 * e.value_norm * e.measure_norm;
  return e;
}

}  // namespace cmfg
