#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "insiderlab/donsker.hpp"
#include "insiderlab/errors.hpp"
#include "insiderlab/market.hpp"
#include "insiderlab/portfolio.hpp"

namespace insiderlab::adjoint {

// Utility with a closed-form inverse marginal I = (U')^{-1}. Power is
// restricted to rho < 1, rho != 0; rho -> 0 is the log limit and is handled
// by the Log kind, not as a limit.
struct UtilitySpec {
  enum class Kind { Log, Power };
  Kind kind = Kind::Log;
  double rho = 0.0;

  static UtilitySpec log_utility() { return UtilitySpec{Kind::Log, 0.0}; }
  static UtilitySpec power(double rho) {
    UtilitySpec u{Kind::Power, rho};
    u.validate();
    return u;
  }

  void validate() const {
    if (kind == Kind::Power && !(rho < 1.0 && rho != 0.0)) {
      throw InvalidArgument("utility: power requires rho < 1, rho != 0");
    }
  }

  double value(double x) const {
    return kind == Kind::Log ? std::log(x) : std::pow(x, rho) / rho;
  }
  double marginal(double x) const {
    return kind == Kind::Log ? 1.0 / x : std::pow(x, rho - 1.0);
  }
  double inverse_marginal(double z) const {
    return kind == Kind::Log ? 1.0 / z : std::pow(z, 1.0 / (rho - 1.0));
  }
};

// Per-path terminal values of the two stochastic exponentials.
struct ExponentialPair {
  double gamma0_T = 0.0;
  double gamma_T = 0.0;
};

// Which of the two pure pipelines applies: a Brownian market (sigma0 bounded
// away from zero) or a single-mark Poisson market (sigma0 identically zero).
enum class Variant { Brownian, Poisson };

namespace detail {

inline Variant detect_variant(const market::PathBundle& path,
                              const InsiderSpec& insider,
                              const market::MarketSpec& mkt, double y,
                              std::size_t i_T) {
  bool any_live = false, any_dead = false;
  bool any_jump_exposure = false;
  for (std::size_t i = 0; i <= i_T; ++i) {
    const double s = std::abs(mkt.sigma0(path.grid[i], y));
    (s >= floors::volatility ? any_live : any_dead) = true;
    for (const auto& mk : insider.marks) {
      if (mk.nu > 0.0 && mkt.gamma0(path.grid[i], y, mk.zeta) != 0.0) {
        any_jump_exposure = true;
      }
    }
  }
  if (any_live && any_dead) {
    throw DegenerateVolatility(
        "adjoint: sigma0 must be bounded away from 0 or identically 0 on [0,T]");
  }
  if (any_live && any_jump_exposure) {
    throw InvalidArgument(
        "adjoint: the exponential pipeline covers pure markets only; "
        "sigma0 and gamma0 are both active here");
  }
  return any_live ? Variant::Brownian : Variant::Poisson;
}

inline std::size_t horizon_index(const market::PathBundle& path, double T) {
  const double r = T / path.dt();
  const auto i = static_cast<std::size_t>(std::llround(r));
  if (i > path.steps() || std::abs(r - static_cast<double>(i)) > 1e-9) {
    throw GridMismatch("adjoint: T is not a grid point");
  }
  return i;
}

// Trapezoid over grid values f_0..f_n with uniform step dt. The stochastic
// sums stay left-point (Ito); the deterministic exponent terms use the
// second-order rule, which is what separates this route's discretization
// from the market module's left-point exponents in the closure checks.
inline double trapezoid(const std::vector<double>& f, double dt) {
  double acc = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) acc += f[i];
  return acc * dt;
}

inline double checked_q(double b0, double lambda, double gamma0, double t) {
  if (gamma0 == 0.0) {
    throw DegenerateMarket("adjoint: gamma0 = 0 in Poisson variant");
  }
  const double q = b0 / (lambda * gamma0);
  if (q >= 1.0) {
    throw InvalidRegime("adjoint: b0/(lambda*gamma0) >= 1 at t=" +
                        std::to_string(t));
  }
  return q;
}

struct PathExponentials {
  double log_gamma0 = 0.0;
  double log_gamma = 0.0;
};

// Shared accumulation of log Gamma0 and (optionally) log Gamma along one
// path. Gamma needs the density ratios, so it is only computed on request.
inline PathExponentials accumulate(const market::PathBundle& path,
                                   const InsiderSpec& insider,
                                   const market::MarketSpec& mkt, double y,
                                   bool want_gamma,
                                   const QuadratureConfig& quad) {
  mkt.validate(insider);
  const std::size_t i_T = horizon_index(path, mkt.T);
  const Variant variant = detect_variant(path, insider, mkt, y, i_T);
  const double dt = path.dt();
  PathExponentials out;

  if (variant == Variant::Brownian) {
    std::vector<double> theta(i_T + 1), phi;
    if (want_gamma) phi.resize(i_T + 1);
    for (std::size_t i = 0; i <= i_T; ++i) {
      const double t = path.grid[i];
      theta[i] = mkt.b0(t, y) / mkt.sigma0(t, y);
      if (want_gamma) {
        phi[i] = donsker::phi_at(insider, t, y, path.point(i), quad);
      }
    }
    double db_theta = 0.0, db_phi = 0.0;
    for (std::size_t i = 0; i < i_T; ++i) {
      db_theta += theta[i] * path.dB[i];
      if (want_gamma) db_phi += phi[i] * path.dB[i];
    }
    std::vector<double> theta_sq(i_T + 1);
    for (std::size_t i = 0; i <= i_T; ++i) theta_sq[i] = theta[i] * theta[i];
    const double int_theta_sq = trapezoid(theta_sq, dt);
    out.log_gamma0 = -db_theta - 0.5 * int_theta_sq;
    if (want_gamma) {
      std::vector<double> phi_sq(i_T + 1);
      for (std::size_t i = 0; i <= i_T; ++i) phi_sq[i] = phi[i] * phi[i];
      out.log_gamma = -(db_phi + db_theta) +
                      0.5 * (trapezoid(phi_sq, dt) - int_theta_sq);
    }
    return out;
  }

  // Poisson variant: single-mark market, sigma0 = 0.
  if (insider.marks.size() != 1) {
    throw InvalidArgument("adjoint: Poisson variant needs a single mark");
  }
  const double lambda = insider.marks[0].nu;
  const double zeta = insider.marks[0].zeta;

  std::vector<double> q(i_T + 1), psi;
  if (want_gamma) psi.resize(i_T + 1);
  for (std::size_t i = 0; i <= i_T; ++i) {
    const double t = path.grid[i];
    q[i] = checked_q(mkt.b0(t, y), lambda, mkt.gamma0(t, y, zeta), t);
    if (want_gamma) {
      psi[i] = donsker::psi_at(insider, t, y, path.point(i), 0, quad);
      if (1.0 + psi[i] <= 0.0) {
        throw Error("adjoint: 1 + Psi <= 0 along path");
      }
    }
  }

  // ln Gamma0 = lambda \int q ds + sum_jumps ln(1 - q), the compensated form
  // of lambda \int [ln(1-q) + q] ds + \int ln(1-q) dNtilde.
  double jump_g0 = 0.0, jump_g = 0.0;
  for (const auto& ev : path.jumps) {
    if (ev.time > mkt.T) break;
    const auto left = static_cast<std::size_t>(ev.time / dt);
    const std::size_t i = std::min(left, i_T);
    jump_g0 += std::log1p(-q[i]);
    if (want_gamma) jump_g += std::log1p(-q[i]) - std::log1p(psi[i]);
  }
  out.log_gamma0 = lambda * trapezoid(q, dt) + jump_g0;
  if (want_gamma) {
    // ln Gamma = sum_jumps [ln(1-q) - ln(1+Psi)] + lambda \int (q + Psi) ds.
    std::vector<double> q_plus_psi(i_T + 1);
    for (std::size_t i = 0; i <= i_T; ++i) q_plus_psi[i] = q[i] + psi[i];
    out.log_gamma = jump_g + lambda * trapezoid(q_plus_psi, dt);
  }
  return out;
}

}  // namespace detail

// Terminal value of the market price-of-risk exponential Gamma0(T, y).
inline double gamma0_path(const market::PathBundle& path,
                          const InsiderSpec& insider,
                          const market::MarketSpec& mkt, double y) {
  return std::exp(
      detail::accumulate(path, insider, mkt, y, false, {}).log_gamma0);
}

// Terminal value of the insider-adjusted exponential Gamma(T, y).
inline double gamma_path(const market::PathBundle& path,
                         const InsiderSpec& insider,
                         const market::MarketSpec& mkt, double y,
                         const QuadratureConfig& quad = {}) {
  return std::exp(
      detail::accumulate(path, insider, mkt, y, true, quad).log_gamma);
}

inline ExponentialPair exponential_pair(const market::PathBundle& path,
                                        const InsiderSpec& insider,
                                        const market::MarketSpec& mkt, double y,
                                        const QuadratureConfig& quad = {}) {
  const auto acc = detail::accumulate(path, insider, mkt, y, true, quad);
  return ExponentialPair{std::exp(acc.log_gamma0), std::exp(acc.log_gamma)};
}

struct SolveCResult {
  double c = 0.0;
  double budget_value = 0.0;  // Monte Carlo estimate of E[I(c Gamma) Gamma0]
  double budget_se = 0.0;
  int iterations = 0;
  std::size_t n_paths = 0;
};

// Budget map at fixed exponential draws (common random numbers): the sample
// mean of I(c Gamma_i) Gamma0_i. Strictly decreasing in c because I is.
inline double budget_estimate(const UtilitySpec& utility, double c,
                              const std::vector<ExponentialPair>& draws,
                              double* se_out = nullptr) {
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& d : draws) {
    const double w = utility.inverse_marginal(c * d.gamma_T) * d.gamma0_T;
    sum += w;
    sum_sq += w * w;
  }
  const auto n = static_cast<double>(draws.size());
  const double mean = sum / n;
  if (se_out) {
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    *se_out = std::sqrt(var / n);
  }
  return mean;
}

// Solves E[I(c Gamma(T,y)) Gamma0(T,y)] = x0 for c = p(0,y) by monotone
// bisection over c in [1e-12, 1e12] with common random numbers across
// iterates. Deterministic given the seed.
inline SolveCResult solve_c(const InsiderSpec& insider,
                            const market::MarketSpec& mkt,
                            const UtilitySpec& utility, double y,
                            std::size_t n_paths, std::uint64_t seed,
                            std::size_t n_steps = 2048,
                            const QuadratureConfig& quad = {}) {
  utility.validate();
  mkt.validate(insider);
  if (n_paths < 2) throw InvalidArgument("solve_c: need n_paths >= 2");

  market::PathSimulator sim(insider, n_steps, seed);
  std::vector<ExponentialPair> draws(n_paths);
  market::PathBundle buf;
  for (std::size_t i = 0; i < n_paths; ++i) {
    sim.simulate_into(buf, i);
    draws[i] = exponential_pair(buf, insider, mkt, y, quad);
  }

  const double lo = 1e-12, hi = 1e12;
  const double g_lo = budget_estimate(utility, lo, draws);
  const double g_hi = budget_estimate(utility, hi, draws);
  if (!(g_lo >= mkt.x0 && g_hi <= mkt.x0)) {
    throw BracketFailure("solve_c: no c in [1e-12, 1e12] brackets x0");
  }

  // The budget map is deterministic under common random numbers, so the
  // bisection runs to machine resolution in log c; the Monte Carlo noise
  // enters only through the feasibility check afterwards.
  SolveCResult out;
  out.n_paths = n_paths;
  double log_lo = std::log(lo), log_hi = std::log(hi);
  int it = 0;
  while (log_hi - log_lo > 1e-14 && it < 400) {
    ++it;
    const double c = std::exp(0.5 * (log_lo + log_hi));
    const double g = budget_estimate(utility, c, draws);
    (g > mkt.x0 ? log_lo : log_hi) = std::log(c);
  }
  out.c = std::exp(0.5 * (log_lo + log_hi));
  out.budget_value = budget_estimate(utility, out.c, draws, &out.budget_se);
  out.iterations = it;
  const double tol = std::max(1e-8 * mkt.x0, 0.5 * out.budget_se);
  if (!(std::abs(out.budget_value - mkt.x0) < tol)) {
    throw Error("solve_c: budget tolerance not met at the bisection limit");
  }
  return out;
}

// Adjoint trajectory p(t,y) = c Gamma0(t,y) on grid points 0..index(T), with
// q and r from the linear stationarity relations: q = -(b0/sigma0) p in the
// Brownian variant, r(1) = -(b0/(lambda gamma0)) p in the Poisson variant.
inline std::vector<portfolio::AdjointState> adjoint_processes(
    const market::PathBundle& path, const InsiderSpec& insider,
    const market::MarketSpec& mkt, double y, double c) {
  mkt.validate(insider);
  const std::size_t i_T = detail::horizon_index(path, mkt.T);
  const Variant variant = detail::detect_variant(path, insider, mkt, y, i_T);
  const double dt = path.dt();

  std::vector<portfolio::AdjointState> states(i_T + 1);
  double log_g0 = 0.0;

  if (variant == Variant::Brownian) {
    std::vector<double> theta(i_T + 1);
    for (std::size_t i = 0; i <= i_T; ++i) {
      theta[i] = mkt.b0(path.grid[i], y) / mkt.sigma0(path.grid[i], y);
    }
    for (std::size_t i = 0; i <= i_T; ++i) {
      if (i > 0) {
        log_g0 -= theta[i - 1] * path.dB[i - 1];
        log_g0 -= 0.25 * (theta[i - 1] * theta[i - 1] + theta[i] * theta[i]) * dt;
      }
      auto& st = states[i];
      st.p = c * std::exp(log_g0);
      st.q = -theta[i] * st.p;
      st.r.assign(insider.marks.size(), 0.0);
    }
    return states;
  }

  if (insider.marks.size() != 1) {
    throw InvalidArgument("adjoint: Poisson variant needs a single mark");
  }
  const double lambda = insider.marks[0].nu;
  const double zeta = insider.marks[0].zeta;
  std::vector<double> q(i_T + 1);
  for (std::size_t i = 0; i <= i_T; ++i) {
    q[i] = detail::checked_q(mkt.b0(path.grid[i], y), lambda,
                             mkt.gamma0(path.grid[i], y, zeta), path.grid[i]);
  }
  std::size_t j = 0;
  for (std::size_t i = 0; i <= i_T; ++i) {
    if (i > 0) {
      log_g0 += 0.5 * lambda * (q[i - 1] + q[i]) * dt;
      while (j < path.jumps.size() && path.jumps[j].time <= path.grid[i]) {
        log_g0 += std::log1p(-q[i - 1]);
        ++j;
      }
    }
    auto& st = states[i];
    st.p = c * std::exp(log_g0);
    st.q = 0.0;
    st.r.assign(1, -q[i] * st.p);  // r = -(b0/(lambda gamma0)) p
  }
  return states;
}

// Terminal-condition diagnostic p(T,y) vs U'(x(T,y)) Mhat(T,y), where Mhat is
// the conditional density normalized to Mhat(0,y) = 1. Returns the ratio;
// 1 up to discretization error when the pipeline is consistent.
inline double terminal_consistency_ratio(const UtilitySpec& utility,
                                         double p_terminal, double x_terminal,
                                         double m_terminal,
                                         double m_unconditional) {
  if (!(m_unconditional > 0.0) || !(m_terminal > 0.0)) {
    throw DensityFloor("terminal consistency: density not positive");
  }
  const double m_hat = m_terminal / m_unconditional;
  return p_terminal / (utility.marginal(x_terminal) * m_hat);
}

}  // namespace insiderlab::adjoint
