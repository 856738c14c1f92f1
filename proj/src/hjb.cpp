#include "cmfg/hjb.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cmfg/errors.hpp"

namespace cmfg {

EpsilonSchedule EpsilonSchedule::smooth(const Grid& g, double eps0) {
  if (eps0 < 0.0) throw DomainError("epsilon schedule: eps0 must be nonnegative");
  if (g.T < 1.5 * eps0)
    throw DomainError(fmt::format("epsilon schedule: T = {} too short for |eps'| <= 1 with eps0 = {}", g.T, eps0));
  EpsilonSchedule s;
  s.eps0 = eps0;
  s.values.resize(g.levels());
  const double ell = std::min(g.T, std::max(0.5 * g.T, 1.5 * eps0));
  for (int k = 0; k <= g.nt; ++k) {
    const double z = std::clamp((g.T - g.t(k)) / ell, 0.0, 1.0);
    s.values[k] = eps0 * z * z * (3.0 - 2.0 * z);
  }
  s.values[g.nt] = 0.0;
  return s;
}

void EpsilonSchedule::validate(const Grid& g) const {
  if (static_cast<int>(values.size()) != g.levels()) throw DomainError("epsilon schedule: wrong length");
  if (values.back() != 0.0) throw DomainError("epsilon schedule: eps(T) must be 0");
  for (int k = 0; k <= g.nt; ++k) {
    if (!(values[k] >= 0.0)) throw DomainError(fmt::format("epsilon schedule: negative value at level {}", k));
    if (k > 0) {
      if (values[k] > values[k - 1]) throw DomainError(fmt::format("epsilon schedule: increases at level {}", k));
      if ((values[k - 1] - values[k]) / g.dt() > 1.0 + 1e-9)
        throw DomainError(fmt::format("epsilon schedule: slope exceeds 1 at level {}", k));
    }
  }
}

double TerminalData::value(double x) const {
  switch (construction) {
    case TerminalConstruction::Zero:
      return 0.0;
    case TerminalConstruction::Custom:
      return custom(x);
    case TerminalConstruction::CubicHPositive: {
      const double x0 = 2.0 * c3 / h;
      const double d = std::min(x - x0, 0.0);
      return 2.0 * c3 * c3 / (3.0 * h) + h * h / (12.0 * c3) * d * d * d;
    }
    case TerminalConstruction::CubicHZero: {
      const double ell = 2.0 * std::sqrt(c3);
      const double z = std::min(x, ell);
      return c3 * (z - 2.0 * z * z * z / (3.0 * ell * ell) + std::pow(z, 5) / (5.0 * std::pow(ell, 4)));
    }
  }
  return 0.0;
}

std::vector<double> TerminalData::sample(const Grid& g) const {
  std::vector<double> v(g.nodes());
  for (int i = 0; i < g.nodes(); ++i) v[i] = value(g.x(i));
  v[0] = 0.0;
  return v;
}

TerminalData build_terminal(const PriceModel& model, double sigma, double c3) {
  if (!(c3 > 0.0)) throw DomainError(fmt::format("build_terminal: c3 must be positive, got {}", c3));
  TerminalData d;
  d.c3 = c3;
  d.h = 2.0 / (sigma * sigma) * hamiltonian_value(model, {0.0, 0.0, c3});
  if (d.h > 0.0) {
    d.construction = TerminalConstruction::CubicHPositive;
    d.c1 = 2.0 * c3 * c3 / (3.0 * d.h);
  } else {
    d.construction = TerminalConstruction::CubicHZero;
    d.c1 = 8.0 * c3 * 2.0 * std::sqrt(c3) / 15.0;
  }
  return d;
}

TerminalData zero_terminal() { return {}; }

double max_ux_bound(const PriceModel& model, double sigma, double r, double c1, double c3) {
  const double H0 = hamiltonian_value(model, {0.0, 0.0, 0.0});
  const double s2 = sigma * sigma;
  if (c3 <= std::sqrt(2.0 / (s2 * r)) * H0) return 2.0 * std::sqrt(2.0 * H0 * (H0 + r * c1) / (s2 * r));
  return c3 + 2.0 * H0 * H0 / (s2 * r * c3) + 2.0 * c1 * H0 / (s2 * c3);
}

void gradient(const Grid& g, std::span<const double> u, std::span<double> ux) {
  const int last = g.nx + 1;
  const double h = g.dx();
  ux[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
  for (int i = 1; i < last; ++i) ux[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
  ux[last] = 0.0;
}

void second_difference(const Grid& g, std::span<const double> u, std::span<double> uxx) {
  const int last = g.nx + 1;
  const double h2 = g.dx() * g.dx();
  uxx[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
  for (int i = 1; i < last; ++i) uxx[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
  uxx[last] = 2.0 * (u[last - 1] - u[last]) / h2;
}

void fill_derivatives(const Grid& g, ValueField& v) {
  v.ux = Field(g);
  v.uxx = Field(g);
  for (int k = 0; k <= g.nt; ++k) {
    gradient(g, v.u[k], v.ux[k]);
    second_difference(g, v.u[k], v.uxx[k]);
  }
}

BackwardOperator::BackwardOperator(const Grid& g, double r) : inv_dt_(1.0 / g.dt()) {
  const int n = g.nx + 1;
  const double c = 0.5 * g.sigma * g.sigma / (g.dx() * g.dx());
  std::vector<double> lo(n, -c), di(n, inv_dt_ + r + 2.0 * c), up(n, -c);
  lo[0] = 0.0;
  up[n - 1] = 0.0;
  lo[n - 1] = -2.0 * c;
  factor_ = TridiagonalFactor(std::move(lo), std::move(di), std::move(up));
}

void BackwardOperator::solve(std::span<double> rhs) const {
  factor_.solve(rhs.subspan(1));
  rhs[0] = 0.0;
}

ValueField hjb_solve(const Grid& g, const PriceModel& model, const EpsilonSchedule& eps,
                     std::span<const double> Q_path, double r, const TerminalData& uT, const HjbOptions& opts) {
  g.validate();
  if (!(r > 0.0)) throw DomainError(fmt::format("hjb_solve: r must be positive, got {}", r));
  if (static_cast<int>(Q_path.size()) != g.levels()) throw DomainError("hjb_solve: Q_path length mismatch");
  if (static_cast<int>(eps.values.size()) != g.levels()) throw DomainError("hjb_solve: epsilon schedule length mismatch");

  auto H = [&](double e, double Q, double a) {
    return opts.hamiltonian ? opts.hamiltonian(e, Q, a) : hamiltonian_value(model, {e, Q, a});
  };
  const BackwardOperator op(g, r);
  const int n = g.nodes();
  ValueField v;
  v.u = Field(g);
  {
    const auto ut = uT.sample(g);
    std::copy(ut.begin(), ut.end(), v.u[g.nt].begin());
  }
  std::vector<double> grad(n), rhs(n);
  const double qmax = optimal_quantity(model, {0.0, 0.0, 0.0});
  const bool coarse = opts.sweep && (r * g.dt() > 0.05 || qmax * g.dt() / g.dx() > 0.5);

  for (int k = g.nt - 1; k >= 0; --k) {
    const auto next = v.u[k + 1];
    const double e = eps[k];
    const double Q = Q_path[k];
    auto step = [&](std::span<const double> from) {
      gradient(g, from, grad);
      for (int i = 1; i < n; ++i) {
        if (grad[i] < 0.0) v.clamp_defect = std::max(v.clamp_defect, -grad[i]);
        rhs[i] = next[i] * op.inv_dt() + H(e, Q, std::max(grad[i], 0.0));
      }
      op.solve(rhs);
      std::copy(rhs.begin(), rhs.end(), v.u[k].begin());
    };
    step(next);
    if (coarse) step(v.u[k]);
  }
  if (v.clamp_defect > 1e-9) spdlog::warn("hjb_solve: clamped negative u_x up to {:.3g}", v.clamp_defect);
  fill_derivatives(g, v);
  return v;
}

}  // namespace cmfg
