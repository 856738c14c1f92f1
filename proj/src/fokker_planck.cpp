#include "cmfg/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cmfg/diagnostics.hpp"
#include "cmfg/errors.hpp"
#include "cmfg/parallel.hpp"
#include "cmfg/tridiagonal.hpp"

namespace cmfg {

double heat_kernel(double x, double t, double sigma) {
  if (!(t > 0.0)) throw DomainError(fmt::format("heat_kernel: t must be positive, got {}", t));
  const double v = sigma * sigma * t;
  return std::exp(-x * x / (2.0 * v)) / std::sqrt(2.0 * std::numbers::pi * v);
}

double hermite_kernel_factor(int n, double x, double t, double sigma) {
  if (n < 0 || n > 3) throw DomainError(fmt::format("hermite_kernel_factor: order {} unsupported", n));
  const double s = std::sqrt(sigma * sigma * t);
  const double z = x / s;
  // probabilists' Hermite: He_{k+1} = z He_k - k He_{k-1}
  double h0 = 1.0, h1 = z;
  double hn = n == 0 ? h0 : h1;
  for (int k = 1; k < n; ++k) {
    hn = z * h1 - k * h0;
    h0 = h1;
    h1 = hn;
  }
  const double sign = (n % 2) ? -1.0 : 1.0;
  return sign * hn * std::pow(s, -n) * heat_kernel(x, t, sigma);
}

std::vector<double> heat_solution_density(const Grid& g, const MeasureVector& m0, double t) {
  if (!(t > 0.0)) throw DomainError(fmt::format("heat_solution: t must be positive, got {}", t));
  std::vector<double> rho(g.nodes(), 0.0);
  for (int i = 1; i < g.nodes(); ++i) {
    const double x = g.x(i);
    double s = 0.0;
    for (int j = 1; j <= g.nx; ++j) {
      if (m0[j] == 0.0) continue;
      const double y = g.x(j);
      s += m0[j] * (heat_kernel(x - y, t, g.sigma) - heat_kernel(x + y, t, g.sigma));
    }
    rho[i] = s;
  }
  return rho;
}

MeasureVector heat_solution(const Grid& g, const MeasureVector& m0, double t) {
  const auto rho = heat_solution_density(g, m0, t);
  MeasureVector m(g, m0.is_signed());
  for (int i = 1; i <= g.nx; ++i) m[i] = rho[i] * g.dx();
  return m;
}

double mass_function_heat(const MeasureVector& m0, double t, double sigma) {
  if (t < 0.0) throw DomainError("mass_function_heat: negative time");
  if (t == 0.0) return m0.total();
  // The tail of a discrete measure is a step function, so the Fubini
  // integral splits into exact Gaussian integrals over [0, y_j / sqrt(t)].
  const double scale = std::sqrt(2.0 * sigma * sigma * t);
  double s = 0.0;
  for (int j = 1; j + 1 < m0.nodes(); ++j)
    if (m0[j] != 0.0) s += m0[j] * std::erf(j * m0.dx() / scale);
  return s;
}

double mass_function_heat(const std::function<double(double)>& tail, double t, double sigma) {
  if (t < 0.0) throw DomainError("mass_function_heat: negative time");
  if (t == 0.0) return tail(0.0);
  // Gauss-Legendre on log-spaced panels of (0, 12 sigma]; the tail may vary
  // on every scale near the origin.
  static const double gx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                               0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
  static const double gw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                               0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  const double st = std::sqrt(t);
  auto f = [&](double x) { return std::exp(-x * x / (2.0 * sigma * sigma)) * tail(st * x); };
  const double x_min = 1e-14 * sigma, x_max = 12.0 * sigma;
  const int panels = 600;
  double s = x_min * f(0.5 * x_min);
  const double r = std::log(x_max / x_min) / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = x_min * std::exp(r * p), b = x_min * std::exp(r * (p + 1));
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (int k = 0; k < 8; ++k) s += gw[k] * h * f(c + h * gx[k]);
  }
  return 2.0 / std::sqrt(2.0 * std::numbers::pi * sigma * sigma) * s;
}

void fp_implicit_step(const Grid& g, std::span<const double> m_prev, std::span<const double> b,
                      std::span<const double> extra_flux, std::span<double> m_next) {
  const int n = g.nx;
  const double dx = g.dx(), dt = g.dt();
  const double D = 0.5 * g.sigma * g.sigma / (dx * dx);
  // face flux J_f = alpha_f m_f + beta_f m_{f+1}
  std::vector<double> alpha(n + 1), beta(n + 1);
  for (int f = 0; f <= n; ++f) {
    const double bf = 0.5 * (b[f] + b[f + 1]);
    alpha[f] = D + (bf < 0.0 ? -bf / dx : 0.0);
    beta[f] = -D - (bf >= 0.0 ? bf / dx : 0.0);
  }
  std::vector<double> lo(n), di(n), up(n), rhs(n);
  for (int i = 1; i <= n; ++i) {
    const int r = i - 1;
    di[r] = 1.0 + dt * (alpha[i] - beta[i - 1]);
    up[r] = dt * beta[i];
    lo[r] = -dt * alpha[i - 1];
    rhs[r] = m_prev[i];
    if (!extra_flux.empty()) rhs[r] -= dt * (extra_flux[i] - extra_flux[i - 1]);
  }
  solve_tridiagonal(lo, di, up, rhs);
  m_next[0] = 0.0;
  m_next[n + 1] = 0.0;
  for (int i = 1; i <= n; ++i) m_next[i] = rhs[i - 1];
}

FpResult fp_solve(const Grid& g, const MeasureVector& m0, const Field& drift, bool fit_holder) {
  g.validate();
  if (m0.nodes() != g.nodes()) throw DomainError("fp_solve: m0 not on this grid");
  if (drift.levels() != g.levels() || drift.nodes() != g.nodes()) throw DomainError("fp_solve: drift shape mismatch");
  FpResult res;
  res.m.reserve(g.levels());
  res.m.push_back(m0);
  double bmax = 0.0;
  for (double v : drift.raw()) bmax = std::max(bmax, std::abs(v));
  spdlog::debug("fp_solve: CFL metric dt*max|b|/dx = {:.3g}", g.dt() * bmax / g.dx());
  for (int k = 0; k < g.nt; ++k) {
    MeasureVector next(g, m0.is_signed());
    fp_implicit_step(g, res.m.back().masses(), drift[k + 1], {}, next.masses());
    res.clamp_defect += next.clamp_negative();
    res.m.push_back(std::move(next));
  }
  if (res.clamp_defect > 1e-12) spdlog::warn("fp_solve: clamped {:.3g} negative mass", res.clamp_defect);
  res.history.t.resize(g.levels());
  res.history.eta.resize(g.levels());
  for (int k = 0; k <= g.nt; ++k) {
    res.history.t[k] = g.t(k);
    res.history.eta[k] = res.m[k].total();
  }
  res.history.holder.exponent = std::numeric_limits<double>::quiet_NaN();
  if (fit_holder && g.nt >= 8) {
    try {
      res.history.holder = holder_fit(res.history.t, res.history.eta, {g.dt(), g.T});
    } catch (const DomainError&) {
    }
  }
  return res;
}

double inverse_moment(const MeasureVector& m, double alpha) {
  if (alpha < 0.0) throw DomainError("inverse_moment: alpha must be nonnegative");
  double s = 0.0;
  for (int i = 1; i + 1 < m.nodes(); ++i) s += std::pow(i * m.dx(), -alpha) * std::abs(m[i]);
  return s;
}

McResult mc_absorbed_sde(const Grid& g, const MeasureVector& m0, const DriftFn& b, double sigma,
                         std::size_t n_paths, double dt_mc, double horizon, std::uint64_t seed, int record_every) {
  if (n_paths == 0) throw DomainError("mc_absorbed_sde: need at least one path");
  if (!(dt_mc > 0.0) || !(horizon > 0.0)) throw DomainError("mc_absorbed_sde: dt and horizon must be positive");
  if (record_every < 1) throw DomainError("mc_absorbed_sde: record_every must be positive");
  const double total = m0.total();
  if (!(total > 0.0)) throw DomainError("mc_absorbed_sde: m0 has no mass");
  const int steps = static_cast<int>(std::lround(horizon / dt_mc));
  const int n_out = steps / record_every + 1;
  const double weight = total / static_cast<double>(n_paths);
  const double sq = sigma * std::sqrt(dt_mc);

  std::vector<double> w(m0.masses().begin(), m0.masses().end());
  for (double& v : w) v = std::max(v, 0.0);

  constexpr std::size_t kBatch = 4096;
  const std::size_t n_batches = (n_paths + kBatch - 1) / kBatch;
  struct Partial {
    std::vector<double> alive;
    std::vector<double> pos_sum;
    std::vector<std::vector<double>> hist;
  };
  std::vector<Partial> parts(n_batches);

  parallel_for(n_batches, [&](std::size_t batch) {
    std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(batch)};
    std::mt19937_64 rng(ss);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::discrete_distribution<int> start(w.begin(), w.end());
    Partial& p = parts[batch];
    p.alive.assign(n_out, 0.0);
    p.pos_sum.assign(n_out, 0.0);
    p.hist.assign(n_out, std::vector<double>(g.nodes(), 0.0));
    const std::size_t first = batch * kBatch;
    const std::size_t last = std::min(n_paths, first + kBatch);
    for (std::size_t path = first; path < last; ++path) {
      double x = g.x(start(rng));
      auto record = [&](int o) {
        p.alive[o] += 1.0;
        p.pos_sum[o] += x;
        const long cell = std::lround(x / g.dx());
        if (cell >= 1 && cell <= g.nx) p.hist[o][cell] += 1.0;
      };
      record(0);
      for (int s = 1; s <= steps; ++s) {
        const double t = (s - 1) * dt_mc;
        const double x1 = x - b(x, t) * dt_mc + sq * normal(rng);
        if (x1 <= 0.0) break;
        const double u = unif(rng);
        if (u < std::exp(-2.0 * x * x1 / (sigma * sigma * dt_mc))) break;
        x = x1;
        if (s % record_every == 0) record(s / record_every);
      }
    }
  });

  McResult res;
  res.t.resize(n_out);
  res.survival.assign(n_out, 0.0);
  res.survival_stderr.assign(n_out, 0.0);
  res.mean_position.assign(n_out, 0.0);
  res.histogram.assign(n_out, MeasureVector(g));
  for (int o = 0; o < n_out; ++o) {
    res.t[o] = o * record_every * dt_mc;
    double alive = 0.0, pos = 0.0;
    for (const auto& p : parts) {
      alive += p.alive[o];
      pos += p.pos_sum[o];
      for (int i = 1; i <= g.nx; ++i) res.histogram[o][i] += p.hist[o][i] * weight;
    }
    const double frac = alive / static_cast<double>(n_paths);
    res.survival[o] = total * frac;
    res.survival_stderr[o] = total * std::sqrt(frac * (1.0 - frac) / static_cast<double>(n_paths));
    res.mean_position[o] = alive > 0.0 ? pos / alive : 0.0;
  }
  return res;
}

}  // namespace cmfg
