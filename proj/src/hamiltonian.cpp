#include "cmfg/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cmfg/errors.hpp"

namespace cmfg {

namespace {

constexpr double kRootTol = 1e-12;
constexpr int kMaxNewton = 200;

void check_point(const HamiltonianPoint& p) {
  if (!(std::isfinite(p.eps) && std::isfinite(p.Q) && std::isfinite(p.a)) || p.eps < 0.0 || p.Q < 0.0 || p.a < 0.0)
    throw DomainError(fmt::format("hamiltonian: inadmissible point (eps={}, Q={}, a={})", p.eps, p.Q, p.a));
}

// Root of g(q) = q P'(s+q) + P(s+q) - a on [0, hi], g decreasing.
double foc_root(const PriceModel& model, double s, double a, double hi) {
  auto g = [&](double q) { return q * model.slope(s + q) + model.price(s + q) - a; };
  double lo = 0.0;
  double q = 0.5 * hi;
  for (int it = 0; it < kMaxNewton; ++it) {
    const double gq = g(q);
    if (gq > 0.0) lo = q; else hi = q;
    const double dg = 2.0 * model.slope(s + q) + q * model.curvature(s + q);
    double next = q - gq / dg;
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    if (std::abs(next - q) <= kRootTol || hi - lo <= kRootTol) return next;
    q = next;
  }
  throw NumericError(fmt::format("optimal_quantity: no convergence, bracket [{}, {}]", lo, hi));
}

}  // namespace

PriceModel PriceModel::linear() {
  PriceModel m;
  m.kind_ = PriceKind::Linear;
  m.saturation_ = 1.0;
  m.prudence_bound_ = 0.0;
  m.params_ = {{"kind", "linear"}};
  return m;
}

PriceModel PriceModel::custom(Fn p, Fn dp, Fn d2p, double saturation, std::optional<double> prudence_bound,
                              nlohmann::json params) {
  if (!(saturation > 0.0)) throw DomainError("price model: saturation must be positive");
  PriceModel m;
  m.kind_ = PriceKind::Custom;
  m.p_ = std::make_shared<const Fn>(std::move(p));
  m.dp_ = std::make_shared<const Fn>(std::move(dp));
  m.d2p_ = std::make_shared<const Fn>(std::move(d2p));
  m.saturation_ = saturation;
  m.params_ = params.is_object() && !params.empty() ? std::move(params) : nlohmann::json{{"kind", "custom"}};
  if (prudence_bound) {
    m.prudence_bound_ = *prudence_bound;
  } else {
    double rb = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 2000; ++k) {
      const double q = saturation * std::pow(10.0, -6.0 + 6.0 * k / 2000.0);
      rb = std::max(rb, relative_prudence(m, q));
    }
    m.prudence_bound_ = rb;
  }
  return m;
}

PriceModel PriceModel::constant_prudence(double p0, double rho) {
  if (!(p0 > 0.0)) throw DomainError("constant_prudence: p0 must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("constant_prudence: rho must lie in [0, 1)");
  const double e = 1.0 - rho;
  const double eta = std::pow(e * p0, 1.0 / e);
  return custom([=](double q) { return p0 - std::pow(q, e) / e; },
                [=](double q) { return -std::pow(q, -rho); },
                [=](double q) { return rho * std::pow(q, -rho - 1.0); },
                eta, rho, {{"kind", "constant_prudence"}, {"p0", p0}, {"rho", rho}});
}

PriceModel PriceModel::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") return linear();
  if (kind == "constant_prudence") return constant_prudence(j.at("p0").get<double>(), j.at("rho").get<double>());
  throw DomainError(fmt::format("price model: unknown kind '{}'", kind));
}

nlohmann::json PriceModel::to_json() const { return params_; }

double PriceModel::price(double q) const { return kind_ == PriceKind::Linear ? 1.0 - q : (*p_)(q); }
double PriceModel::slope(double q) const { return kind_ == PriceKind::Linear ? -1.0 : (*dp_)(q); }
double PriceModel::curvature(double q) const { return kind_ == PriceKind::Linear ? 0.0 : (*d2p_)(q); }

void PriceModel::validate() const {
  if (!(price(0.0) > 0.0)) throw DomainError("price model: P(0) must be positive");
  if (std::abs(price(saturation_)) > 1e-10)
    throw DomainError(fmt::format("price model: P(saturation) = {} is not zero", price(saturation_)));
  for (int k = 1; k <= 200; ++k) {
    const double q = 2.0 * saturation_ * k / 200.0;
    if (!(slope(q) < 0.0)) throw DomainError(fmt::format("price model: P' not negative at q = {}", q));
  }
}

void PriceModel::check_prudence(double eps) const {
  const double bound = (2.0 + eps) / (1.0 + eps);
  if (!(prudence_bound_ < bound))
    throw DomainError(fmt::format("price model: prudence bound {} not below (2+eps)/(1+eps) = {}", prudence_bound_, bound));
}

double profit(const PriceModel& model, const HamiltonianPoint& p, double q) {
  if (q < 0.0) throw DomainError(fmt::format("profit: negative quantity {}", q));
  if (q == 0.0) return 0.0;
  return q * (model.price(p.eps * p.Q + q) - p.a);
}

double relative_prudence(const PriceModel& model, double Q) {
  if (!(Q > 0.0)) throw DomainError(fmt::format("relative_prudence: Q must be positive, got {}", Q));
  const double d1 = model.slope(Q);
  if (d1 == 0.0) throw DomainError("relative_prudence: P'(Q) = 0");
  const double r = -Q * model.curvature(Q) / d1;
  return r == 0.0 ? 0.0 : r;
}

double optimal_quantity(const PriceModel& model, const HamiltonianPoint& p) {
  check_point(p);
  const double s = p.eps * p.Q;
  if (model.kind() == PriceKind::Linear) return std::max(0.0, 0.5 * (1.0 - s - p.a));
  if (model.price(s) <= p.a) return 0.0;
  return foc_root(model, s, p.a, model.saturation() - s);
}

HamiltonianEval evaluate(const PriceModel& model, const HamiltonianPoint& p) {
  HamiltonianEval e;
  e.q = optimal_quantity(model, p);
  if (e.q == 0.0) return e;
  const double s = p.eps * p.Q + e.q;
  const double d1 = model.slope(s);
  const double d2 = model.curvature(s);
  const double pi_qq = 2.0 * d1 + e.q * d2;
  e.H = e.q * (model.price(s) - p.a);
  e.Ha = -e.q;
  e.Haa = -1.0 / pi_qq;
  e.HQ = p.eps * e.q * d1;
  e.HaQ = p.eps * (e.q * d2 + d1) / pi_qq;
  return e;
}

double hamiltonian_value(const PriceModel& m, const HamiltonianPoint& p) { return evaluate(m, p).H; }
double dH_da(const PriceModel& m, const HamiltonianPoint& p) { return -optimal_quantity(m, p); }
double d2H_da2(const PriceModel& m, const HamiltonianPoint& p) { return evaluate(m, p).Haa; }
double dH_dQ(const PriceModel& m, const HamiltonianPoint& p) { return evaluate(m, p).HQ; }
double d2H_dQda(const PriceModel& m, const HamiltonianPoint& p) { return evaluate(m, p).HaQ; }

double prudence_factor(double rho_bar, double eps) {
  if (!(rho_bar < (2.0 + eps) / (1.0 + eps)))
    throw DomainError(fmt::format("prudence factor: rho_bar = {} violates the bound for eps = {}", rho_bar, eps));
  return std::max((2.0 - rho_bar) / (2.0 + eps - (1.0 + eps) * rho_bar), 1.0);
}

double q_cap(const PriceModel& model, double eps) {
  return prudence_factor(model.prudence_bound(), eps) * optimal_quantity(model, {0.0, 0.0, 0.0});
}

double clearing_residual(const PriceModel& model, double eps, double Q, std::span<const double> phi,
                         const MeasureVector& m) {
  double s = 0.0;
  for (int i = 1; i + 1 < m.nodes(); ++i)
    if (m[i] != 0.0) s += optimal_quantity(model, {eps, Q, phi[i]}) * m[i];
  return Q - s;
}

double market_clearing(const PriceModel& model, double eps, std::span<const double> phi, const MeasureVector& m) {
  if (static_cast<int>(phi.size()) != m.nodes()) throw DomainError("market_clearing: phi and m sizes differ");
  if (m.total() > 1.0 + 1e-9) throw DomainError(fmt::format("market_clearing: total mass {} exceeds 1", m.total()));
  for (int i = 1; i + 1 < m.nodes(); ++i)
    if (phi[i] < 0.0) throw DomainError(fmt::format("market_clearing: negative phi {} at node {}", phi[i], i));
  if (m.total_variation() == 0.0) return 0.0;
  double lo = 0.0;
  double hi = 1.01 * q_cap(model, eps);
  if (clearing_residual(model, eps, hi, phi, m) < 0.0)
    throw std::logic_error("market_clearing: bracket violated, prudence assumption broken");
  // Newton on F(Q) = Q - sum q* m with F' = 1 + sum H_aQ m, kept inside the
  // bracket by bisection.
  double Q = 0.5 * (lo + hi);
  for (int it = 0; it < kMaxNewton; ++it) {
    double F = Q, dF = 1.0;
    for (int i = 1; i + 1 < m.nodes(); ++i) {
      if (m[i] == 0.0) continue;
      const auto e = evaluate(model, {eps, Q, phi[i]});
      F -= e.q * m[i];
      dF += e.HaQ * m[i];
    }
    if (F == 0.0) return Q;
    if (F > 0.0) hi = Q; else lo = Q;
    double next = Q - F / dF;
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    if (std::abs(next - Q) <= 1e-15 || hi - lo <= kRootTol) return next;
    Q = next;
  }
  throw NumericError("market_clearing: no convergence");
}

}  // namespace cmfg
