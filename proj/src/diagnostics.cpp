#include "cmfg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "cmfg/errors.hpp"

namespace cmfg {

double weighted_norm_Xn(std::span<const double> f, double dx, int n) {
  if (n < 0 || n > 2) throw DomainError(fmt::format("weighted_norm_Xn: n = {} unsupported", n));
  const int N = static_cast<int>(f.size());
  if (N < 3) throw DomainError("weighted_norm_Xn: need at least 3 samples");
  auto d = [&](int i) { return std::min(i * dx, 1.0); };
  double norm = 0.0;
  for (double v : f) norm = std::max(norm, std::abs(v));
  if (n >= 1) {
    for (int i = 0; i < N; ++i) {
      double g;
      if (i == 0) g = (f[1] - f[0]) / dx;
      else if (i == N - 1) g = (f[N - 1] - f[N - 2]) / dx;
      else g = (f[i + 1] - f[i - 1]) / (2.0 * dx);
      norm = std::max(norm, d(i) * std::abs(g));
    }
  }
  if (n >= 2) {
    for (int i = 1; i + 1 < N; ++i) {
      const double g2 = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (dx * dx);
      norm = std::max(norm, d(i) * d(i) * std::abs(g2));
    }
  }
  return norm;
}

double dual_norm_minus_n(const MeasureVector& mu, int n, const std::vector<std::vector<double>>& extra) {
  if (n < 0 || n > 2) throw DomainError(fmt::format("dual_norm_minus_n: n = {} unsupported", n));
  const int N = mu.nodes();
  const double dx = mu.dx();
  const double L = (N - 1) * dx;
  std::vector<double> phi(N);
  double best = 0.0;
  auto consider = [&] {
    const double nrm = weighted_norm_Xn(phi, dx, n);
    if (!(nrm > 0.0)) return;
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += phi[i] * mu[i];
    best = std::max(best, std::abs(s) / nrm);
  };

  if (n == 0) {
    for (int i = 0; i < N; ++i) phi[i] = mu[i] > 0.0 ? 1.0 : (mu[i] < 0.0 ? -1.0 : 0.0);
    consider();
  }
  std::fill(phi.begin(), phi.end(), 1.0);
  consider();
  for (double s = dx; s < 4.0 * L; s *= 2.0) {
    for (int i = 0; i < N; ++i) phi[i] = s * (1.0 - std::exp(-i * dx / s));
    consider();
  }
  const double widths[] = {2.0 * dx, 8.0 * dx, 0.1, 0.5, 2.0};
  for (double w : widths) {
    for (int c = 1; c <= 24; ++c) {
      const double xc = L * c / 25.0;
      for (int i = 0; i < N; ++i) phi[i] = std::tanh((i * dx - xc) / w);
      consider();
    }
  }
  for (int k = 1; k <= 16; ++k) {
    for (int i = 0; i < N; ++i) phi[i] = std::sin(k * std::numbers::pi * i * dx / L);
    consider();
  }
  for (const auto& e : extra) {
    if (static_cast<int>(e.size()) != N) throw DomainError("dual_norm_minus_n: extra test function has wrong length");
    std::copy(e.begin(), e.end(), phi.begin());
    consider();
  }
  return best;
}

HolderEstimate holder_fit(std::span<const double> t, std::span<const double> v, std::pair<double, double> window) {
  if (t.size() != v.size()) throw DomainError("holder_fit: series lengths differ");
  if (t.size() < 8) throw DomainError("holder_fit: need at least 8 points");
  const auto [lo, hi] = window;
  if (!(lo > 0.0 && hi > lo)) throw DomainError("holder_fit: bad window");
  // per dyadic bin of |t - s|: the largest |v(t) - v(s)| and its |t - s|
  std::map<int, std::pair<double, double>> bins;
  const double tol = 1e-12 * lo;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const double dt = std::abs(t[j] - t[i]);
      if (dt < lo - tol || dt > hi + tol) continue;
      const int b = static_cast<int>(std::floor(std::log2(dt)));
      const double dv = std::abs(v[j] - v[i]);
      auto it = bins.find(b);
      if (it == bins.end()) bins.emplace(b, std::make_pair(dv, dt));
      else if (dv > it->second.first) it->second = {dv, dt};
    }
  }
  HolderEstimate est;
  est.window_lo = lo;
  est.window_hi = hi;
  std::vector<std::pair<double, double>> pts;
  for (const auto& [b, p] : bins)
    if (p.first > 0.0) pts.emplace_back(std::log(p.second), std::log(p.first));
  if (pts.empty()) {
    if (bins.empty()) throw DomainError("holder_fit: no pairs inside the window");
    est.exponent = std::numeric_limits<double>::infinity();
    est.constant = 0.0;
    return est;
  }
  if (pts.size() < 2) throw DomainError("holder_fit: window spans fewer than two dyadic scales");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(pts.size());
  est.exponent = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  est.constant = std::exp((sy - est.exponent * sx) / k);
  return est;
}

DiagnosticReport verify_solution_bounds(const MfgSolution& sol) {
  const auto& p = sol.problem;
  const Grid& g = p.grid;
  DiagnosticReport rep;
  const double H0 = hamiltonian_value(p.model, {0.0, 0.0, 0.0});
  double umin = std::numeric_limits<double>::infinity(), umax = -umin;
  double uxmin = umin, uxmax = -umin;
  for (int k = 0; k <= g.nt; ++k)
    for (int i = 0; i < g.nodes(); ++i) {
      umin = std::min(umin, sol.u.u(k, i));
      umax = std::max(umax, sol.u.u(k, i));
      uxmin = std::min(uxmin, sol.u.ux(k, i));
      uxmax = std::max(uxmax, sol.u.ux(k, i));
    }
  rep.add("u_nonnegative", umin, ">=", 0.0, 1e-9);
  rep.add("u_upper_bound", umax, "<=", H0 / p.r + p.uT.c1, 1e-12);
  rep.add("ux_nonnegative", uxmin, ">=", 0.0, 1e-9);
  rep.add("ux_upper_bound", uxmax, "<=", max_ux_bound(p.model, g.sigma, p.r, p.uT.c1, p.uT.c3), 1e-12);
  const double qmax = sol.Q_path.empty() ? 0.0 : *std::max_element(sol.Q_path.begin(), sol.Q_path.end());
  const double qmin = sol.Q_path.empty() ? 0.0 : *std::min_element(sol.Q_path.begin(), sol.Q_path.end());
  rep.add("Q_nonnegative", qmin, ">=", 0.0, 0.0);
  rep.add("Q_upper_bound", qmax, "<=", q_cap(p.model, p.eps.eps0), 1e-12);
  double eta_rise = 0.0, tv_rise = 0.0;
  for (std::size_t k = 1; k < sol.m.size(); ++k) {
    eta_rise = std::max(eta_rise, sol.m[k].total() - sol.m[k - 1].total());
    tv_rise = std::max(tv_rise, sol.m[k].total_variation() - sol.m[k - 1].total_variation());
  }
  rep.add("eta_nonincreasing", eta_rise, "<=", 0.0, 1e-12);
  rep.add("tv_nonincreasing", tv_rise, "<=", 0.0, 1e-12);
  double clear = 0.0;
  for (double c : sol.clearing_residual) clear = std::max(clear, std::abs(c));
  rep.add("clearing_residual", clear, "<=", 1e-10, 0.0);
  if (g.nt >= 8) {
    try {
      const auto h = holder_fit(sol.history.t, sol.Q_path, {g.dt(), g.T});
      rep.exponents.push_back({"Q_path", h.exponent, h.constant, h.window_lo, h.window_hi});
    } catch (const DomainError&) {
    }
    if (std::isfinite(sol.history.holder.exponent))
      rep.exponents.push_back({"eta", sol.history.holder.exponent, sol.history.holder.constant,
                               sol.history.holder.window_lo, sol.history.holder.window_hi});
  }
  return rep;
}

}  // namespace cmfg
