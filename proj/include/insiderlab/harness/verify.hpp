#pragma once

// The `verify` experiment: every invariant in the library's contract, run at
// the configured scale, emitted as a JSON report with one entry per check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "insiderlab/harness/runner.hpp"

namespace insiderlab::harness {

struct VerifyEntry {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string note;
};

namespace verify_detail {

using detail::mean_se;
using detail::state_at;

struct Context {
  const ExperimentConfig& cfg;
  InsiderSpec insider;
  market::MarketSpec mkt;
  MarketConstants mc;
  std::uint64_t seed;
  double max_imag = 0.0;  // collected across density evaluations

  // Jump-kind density ratios go through quadrature per path point, so the
  // path-heavy adjoint checks run at a reduced scale for those kinds.
  std::size_t adjoint_paths() const {
    if (insider.kind == InsiderKind::Gaussian) {
      return std::min<std::size_t>(cfg.n_paths, 20'000);
    }
    return std::min<std::size_t>(cfg.n_paths, 64);
  }
  std::size_t adjoint_steps() const {
    if (insider.kind == InsiderKind::Gaussian) return cfg.n_steps;
    return std::min<std::size_t>(cfg.n_steps, 256);
  }
  // The closure gap is dominated by an O(dt) term, so its stated 1e-2
  // threshold needs at least ~1024 steps regardless of the adjoint cap.
  std::size_t closure_steps() const {
    if (insider.kind == InsiderKind::Gaussian) return cfg.n_steps;
    return std::max<std::size_t>(std::min(cfg.n_steps, std::size_t{2048}), 1024);
  }
  std::size_t closure_paths() const {
    if (insider.kind == InsiderKind::Gaussian) {
      return std::min<std::size_t>(cfg.n_paths, 40);
    }
    return std::min<std::size_t>(cfg.n_paths, 12);
  }

  // The exponential pipeline covers pure markets only; for a mixed configured
  // market the adjoint invariants run on its pure-Brownian reduction.
  bool market_is_mixed() const {
    if (std::abs(mc.sigma0) < floors::volatility) return false;
    for (double g : mc.gamma0_by_mark) {
      if (g != 0.0) return true;
    }
    return false;
  }
  market::MarketSpec adjoint_market(std::string& note) const {
    if (!market_is_mixed()) return mkt;
    MarketConstants reduced = mc;
    for (double& g : reduced.gamma0_by_mark) g = 0.0;
    note = "mixed market: ran on its pure-Brownian reduction; ";
    return reduced.build(insider);
  }
};

using Check = std::function<VerifyEntry(Context&)>;

inline VerifyEntry make(const std::string& name, double measured,
                        double threshold, bool pass,
                        const std::string& note = "") {
  return VerifyEntry{name, measured, threshold, pass, note};
}

// ---- donsker ---------------------------------------------------------------

inline VerifyEntry normalization(Context& c) {
  market::PathSimulator sim(c.insider, c.cfg.n_steps, c.seed);
  const auto path = sim.simulate(0);
  const auto ys = donsker::default_y_grid(c.insider, c.cfg.y_points,
                                          c.cfg.y_halfwidth_sds);
  const double dy = ys[1] - ys[0];
  double worst = 0.0;
  for (double t_req : {0.0, c.mc.T / 2.0, c.mc.T}) {
    const auto i = detail::snapped_index(path, t_req);
    const double t = path.grid[i];
    const auto pt = path.point(i);
    double total = 0.0;
    for (double y : ys) {
      donsker::EvalDiag diag;
      total += donsker::cond_density_at(c.insider, t, y, pt, c.cfg.quad, &diag) * dy;
      c.max_imag = std::max(c.max_imag, diag.imag_residual);
    }
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return make("donsker.normalization", worst, 1e-3, worst <= 1e-3);
}

inline VerifyEntry martingale(Context& c) {
  market::PathSimulator sim(c.insider, c.cfg.n_steps, c.seed + 1);
  const double sd = c.insider.unconditional_sd();
  const std::vector<double> ys{-2.0 * sd, -sd, 0.0, sd, 2.0 * sd};
  const std::vector<double> ts{c.mc.T / 2.0, c.mc.T};
  const std::size_t n = c.insider.kind == InsiderKind::GeneralChaos
                            ? std::min<std::size_t>(c.cfg.n_paths, 500)
                            : c.cfg.n_paths;

  std::vector<market::PathBundle> paths(n);
  for (std::size_t i = 0; i < n; ++i) sim.simulate_into(paths[i], i);

  double worst_z = 0.0;
  for (double t_req : ts) {
    const auto idx = detail::snapped_index(paths[0], t_req);
    const double t = paths[0].grid[idx];
    for (double y : ys) {
      const double m0 = donsker::unconditional_density(c.insider, y, c.cfg.quad);
      std::vector<double> vals(n);
      if (c.insider.kind == InsiderKind::BrownianPoisson) {
        std::vector<donsker::BpState> states(n);
        for (std::size_t i = 0; i < n; ++i) {
          states[i] = paths[i].point(idx).bp();
        }
        vals = donsker::bp_cond_density_batch(c.insider, t, y, states,
                                              c.cfg.quad);
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          vals[i] = donsker::cond_density_at(c.insider, t, y,
                                             paths[i].point(idx), c.cfg.quad);
        }
      }
      const auto ms = mean_se(vals);
      if (ms.se > 0.0) {
        worst_z = std::max(worst_z, std::abs(ms.mean - m0) / ms.se);
      }
    }
  }
  return make("donsker.martingale", worst_z, 3.0, worst_z <= 3.0);
}

inline VerifyEntry imag_residual(Context& c) {
  return make("donsker.imag_residual", c.max_imag, 1e-6, c.max_imag < 1e-6,
              "max over the normalization sweep");
}

inline VerifyEntry ratio_consistency(Context& c) {
  const auto twin = InsiderSpec::gaussian(c.insider.beta, c.insider.horizon_T0);
  std::mt19937 rng(101u);
  std::uniform_real_distribution<double> ut(0.0, 0.9 * twin.horizon_T0);
  std::uniform_real_distribution<double> uy(-2.0, 2.0);
  double worst = 0.0;
  const double eps = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const double t = ut(rng), y = uy(rng), y_t = uy(rng);
    const double beta_t = twin.beta_at(t);
    const double up =
        std::log(donsker::gaussian_cond_density(twin, t, y, y_t + beta_t * eps));
    const double dn =
        std::log(donsker::gaussian_cond_density(twin, t, y, y_t - beta_t * eps));
    const double fd = (up - dn) / (2.0 * eps);
    worst = std::max(worst,
                     std::abs(fd - donsker::gaussian_phi(twin, t, y, y_t)));
  }
  return make("donsker.ratio_consistency", worst, 1e-5, worst <= 1e-5);
}

inline VerifyEntry specialization(Context& c) {
  const double lambda =
      c.insider.kind == InsiderKind::BrownianPoisson ? c.insider.lambda() : 1.0;
  const auto bp = InsiderSpec::brownian_poisson(1.0, lambda, 1.0);
  const auto gen = InsiderSpec::general(
      PiecewiseConstant::constant(1.0, 1.0), {Mark{1.0, lambda}},
      {PiecewiseConstant::constant(1.0, 1.0)}, 1.0);
  const donsker::ChaosState state{0.4, -0.3};
  std::mt19937 rng(7u);
  std::uniform_real_distribution<double> ux(-12.0, 12.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double x = ux(rng);
    const auto a = donsker::fourier_base_sample(bp, 0.3, 0.2, state, x);
    const auto b = donsker::fourier_base_sample(gen, 0.3, 0.2, state, x);
    worst = std::max(worst, std::abs(a - b));
  }
  return make("donsker.specialization", worst, 0.0, worst == 0.0,
              "integrand samples must be bit-identical");
}

// ---- quadrature ------------------------------------------------------------

inline VerifyEntry conjugate_symmetry(Context& c) {
  using cplx = std::complex<double>;
  double worst = 0.0;
  const auto probe = [&](auto g, double sigma_sq, double hint) {
    const auto r = damped_oscillatory_integral(g, sigma_sq, c.cfg.quad, hint);
    const double bound = c.cfg.quad.abs_tol * std::max(r.panels_used, 1);
    worst = std::max(worst, std::abs(r.value.imag()) / bound);
  };
  probe([](double) { return cplx(1.0, 0.0); }, 1.0, 0.0);
  probe([](double x) { return std::exp(cplx(0.0, 1.3 * x)); }, 1.0, 1.3);
  probe(
      [](double x) {
        return std::exp(0.5 * (std::exp(cplx(0.0, x)) - cplx(1.0, x)));
      },
      0.5, 1.0);
  return make("quadrature.conjugate_symmetry", worst, 1.0, worst < 1.0,
              "|Im| relative to abs_tol * panels");
}

inline VerifyEntry truncation(Context& c) {
  // A Brownian-Poisson density integrand at a mid-horizon state.
  const double lam = 0.8, tau = 0.5, theta = 0.7, y = 0.4;
  auto g = [&](double x) {
    const auto eix = std::exp(std::complex<double>(0.0, x));
    return std::exp(std::complex<double>(0.0, x * (theta - y)) +
                    lam * tau * (eix - std::complex<double>(1.0, x))) *
           std::exp(-0.5 * tau * x * x) / (2.0 * std::numbers::pi);
  };
  const double R = std::sqrt(2.0 * std::log(1e16) / tau);
  const auto r1 = integrate_on(g, R, c.cfg.quad, std::abs(theta - y) + 2.0);
  const auto r2 = integrate_on(g, 2.0 * R, c.cfg.quad, std::abs(theta - y) + 2.0);
  const double diff = std::abs(r1.value - r2.value);
  const double bound = 10.0 * c.cfg.quad.abs_tol;
  return make("quadrature.truncation", diff, bound, diff < bound);
}

inline VerifyEntry refinement(Context& c) {
  using cplx = std::complex<double>;
  double worst_ratio = 0.0;
  const auto probe = [&](auto g, double sigma_sq, double hint) {
    const auto r = damped_oscillatory_integral(g, sigma_sq, c.cfg.quad, hint);
    for (std::size_t i = 1; i < r.residual_history.size(); ++i) {
      if (r.residual_history[i - 1] == 0.0 || r.residual_history[i] == 0.0)
        continue;
      worst_ratio = std::max(worst_ratio,
                             r.residual_history[i] / r.residual_history[i - 1]);
    }
  };
  probe([](double) { return cplx(1.0, 0.0); }, 1.0, 0.0);
  probe([](double x) { return std::exp(cplx(0.0, x)); }, 1.0, 1.0);
  probe(
      [](double x) {
        return std::exp(0.5 * (std::exp(cplx(0.0, x)) - cplx(1.0, x)));
      },
      0.5, 1.0);
  return make("quadrature.refinement_monotonic", worst_ratio, 0.5,
              worst_ratio <= 0.5, "residual ratio per refinement level");
}

// ---- market ----------------------------------------------------------------

inline VerifyEntry seed_determinism(Context& c) {
  market::PathSimulator sim(c.insider, c.cfg.n_steps, c.seed);
  const auto a = sim.simulate(0);
  const auto b = sim.simulate(0);
  double worst = std::abs(a.realized_Y - b.realized_Y);
  for (std::size_t i = 0; i < a.dB.size(); ++i) {
    worst = std::max(worst, std::abs(a.dB[i] - b.dB[i]));
  }
  worst += std::abs(static_cast<double>(a.jumps.size()) -
                    static_cast<double>(b.jumps.size()));
  return make("market.seed_determinism", worst, 0.0, worst == 0.0);
}

inline VerifyEntry realized_y_recompute(Context& c) {
  market::PathSimulator sim(c.insider, c.cfg.n_steps, c.seed + 2);
  double worst = 0.0;
  for (std::uint64_t idx = 0; idx < 4; ++idx) {
    const auto path = sim.simulate(idx);
    double brown = 0.0;
    for (std::size_t i = 0; i < path.dB.size(); ++i) {
      brown += c.insider.beta_at(path.grid[i]) * path.dB[i];
    }
    double jump = 0.0;
    for (const auto& ev : path.jumps) {
      jump += c.insider.psi_at(ev.mark_index, ev.time);
    }
    double comp = 0.0;
    for (std::size_t k = 0; k < c.insider.marks.size(); ++k) {
      comp += c.insider.marks[k].nu *
              c.insider.psi[k].integral(0.0, c.insider.horizon_T0);
    }
    worst = std::max(worst, std::abs(path.realized_Y - (brown + jump - comp)));
  }
  return make("market.realized_y_recompute", worst, 1e-12, worst <= 1e-12);
}

inline VerifyEntry wealth_positivity(Context& c) {
  market::PathSimulator sim(c.insider, c.cfg.n_steps, c.seed + 3);
  double min_x = 1e300;
  market::PathBundle buf;
  for (std::uint64_t i = 0; i < 4; ++i) {
    sim.simulate_into(buf, i);
    const auto policy =
        portfolio::make_insider_policy(c.insider, c.mkt, buf, c.cfg.quad);
    const auto x =
        market::wealth_exact(buf, c.insider, c.mkt, policy, buf.realized_Y);
    for (double v : x) min_x = std::min(min_x, v);
  }
  return make("market.wealth_positivity", min_x, 0.0, min_x > 0.0,
              "min wealth over insider-policy trajectories");
}

inline VerifyEntry jump_rate(Context& c) {
  if (c.insider.marks.empty()) {
    return make("market.jump_rate", 0.0, 3.0, true, "no jump channel");
  }
  market::PathSimulator sim(c.insider, 64, c.seed + 4);
  const std::size_t n = std::min<std::size_t>(c.cfg.n_paths, 20'000);
  std::vector<double> counts(n);
  market::PathBundle buf;
  for (std::size_t i = 0; i < n; ++i) {
    sim.simulate_into(buf, i);
    counts[i] = static_cast<double>(buf.jumps.size());
  }
  const auto ms = mean_se(counts);
  const double expected =
      c.insider.total_jump_intensity() * c.insider.horizon_T0;
  const double z = std::abs(ms.mean - expected) / ms.se;
  return make("market.jump_rate", z, 3.0, z <= 3.0, "z-score of mean count");
}

inline VerifyEntry y_variance(Context& c) {
  market::PathSimulator sim(c.insider, c.cfg.n_steps, c.seed + 5);
  const std::size_t n = std::min<std::size_t>(c.cfg.n_paths, 20'000);
  std::vector<double> ys(n);
  market::PathBundle buf;
  for (std::size_t i = 0; i < n; ++i) {
    sim.simulate_into(buf, i);
    ys[i] = buf.realized_Y;
  }
  double mean = 0.0;
  for (double v : ys) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (ys[i] - mean) * (ys[i] - mean);
  const auto ms = mean_se(sq);
  const double z =
      std::abs(ms.mean - c.insider.unconditional_variance()) / ms.se;
  return make("market.y_variance", z, 3.0, z <= 3.0,
              "z-score of realized_Y variance");
}

inline VerifyEntry forward_consistency(Context& c) {
  // Adapted smooth policy at dt = T/4096: exact exponent vs Euler scheme.
  const auto steps = static_cast<std::size_t>(
      std::llround(4096.0 * c.insider.horizon_T0 / c.mc.T));
  market::PathSimulator sim(c.insider, steps, c.seed + 6);
  const auto path = sim.simulate(0);
  auto policy = [](double t, double) { return 0.8 + 0.1 * std::sin(3.0 * t); };
  const double exact =
      market::insider_wealth(path, c.insider, c.mkt, policy);

  double x = c.mkt.x0;
  const double dt = path.dt();
  const auto i_T = static_cast<std::size_t>(std::llround(c.mc.T / dt));
  std::size_t j = 0;
  for (std::size_t i = 0; i < i_T; ++i) {
    const double t = path.grid[i];
    const double pi = policy(t, 0.0);
    double jump_term = 0.0;
    while (j < path.jumps.size() && path.jumps[j].time <= path.grid[i + 1]) {
      jump_term += pi * c.mkt.gamma0(path.jumps[j].time, 0.0, path.jumps[j].zeta);
      ++j;
    }
    double comp = 0.0;
    for (const auto& mk : c.insider.marks) {
      comp += mk.nu * c.mkt.gamma0(t, 0.0, mk.zeta);
    }
    x *= 1.0 + pi * (c.mkt.b0(t, 0.0) * dt + c.mkt.sigma0(t, 0.0) * path.dB[i] -
                     comp * dt) +
         jump_term;
  }
  const double rel = std::abs(exact / x - 1.0);
  return make("market.forward_consistency", rel, 5e-3, rel < 5e-3,
              "adapted policy, dt = T/4096");
}

// ---- portfolio -------------------------------------------------------------

inline VerifyEntry stationarity(Context&) {
  std::mt19937 rng(99u);
  std::uniform_real_distribution<double> ub(-0.1, 0.1), us(0.1, 0.4),
      ug(0.05, 0.5), ul(0.1, 1.5);
  double worst = 0.0;
  const auto insider_bp = InsiderSpec::brownian_poisson(1.0, 0.5, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double b0 = ub(rng), s0 = us(rng), g0 = ug(rng), lam = ul(rng);
    const auto r = portfolio::solve_foc_bp(b0, s0, g0, lam, 0.0, 0.0);
    if (r.status != portfolio::SolveStatus::Converged) continue;
    market::MarketSpec m;
    m.b0 = market::constant_field(b0);
    m.sigma0 = market::constant_field(s0);
    m.gamma0 = market::constant_jump_field(g0);
    m.x0 = 1.0;
    m.T = 0.5;
    const auto adj = portfolio::stationary_adjoint(0.1, 0.0, 1.0, m, insider_bp);
    worst = std::max(worst, std::abs(portfolio::hamiltonian_grad_pi(
                                0.1, 1.0, 0.0, adj, m, insider_bp)));
  }
  return make("portfolio.stationarity", worst, 1e-10, worst < 1e-10);
}

inline VerifyEntry concavity(Context&) {
  std::mt19937 rng(17u);
  std::uniform_real_distribution<double> ub(-0.1, 0.1), us(0.0, 0.4),
      ug(0.05, 0.5), ul(0.05, 2.0), upsi(-0.5, 0.5), uu(0.0, 1.0);
  double worst = -1e300;
  for (int cse = 0; cse < 20; ++cse) {
    const double b0 = ub(rng), s0 = us(rng), g0 = ug(rng), lam = ul(rng),
                 psi = upsi(rng);
    const std::vector<portfolio::FocMark> marks{{g0, lam, psi}};
    for (int i = 0; i < 100; ++i) {
      const double pi = -1.0 / g0 + (20.0 + 1.0 / g0) * (0.001 + 0.998 * uu(rng));
      worst = std::max(
          worst, portfolio::foc_second_derivative(b0, s0, marks, 0.0, pi));
    }
  }
  return make("portfolio.concavity", worst, 0.0, worst < 0.0,
              "max objective second derivative over random admissible pi");
}

inline VerifyEntry merton_reduction(Context&) {
  const double pi0 = portfolio::solve_foc_bp(0.05, 0.2, 0.3, 0.1, 0.0, 0.0).pi;
  double worst = 0.0;
  for (double eps : {1e-3, 1e-6}) {
    const double pi_eps =
        portfolio::solve_foc_bp(0.05, 0.2, 0.3, 0.1, eps, eps).pi;
    worst = std::max(worst, std::abs(pi_eps - pi0) / (100.0 * eps));
  }
  return make("portfolio.merton_reduction", worst, 1.0, worst <= 1.0,
              "|pi(eps) - pi(0)| / (C eps), C = 100");
}

inline VerifyEntry scale_invariance(Context& c) {
  market::PathSimulator sim(c.insider, std::min<std::size_t>(c.cfg.n_steps, 256),
                            c.seed + 7);
  const auto path = sim.simulate(0);
  auto mc_scaled = c.mc;
  mc_scaled.x0 = 100.0 * c.mc.x0;
  const auto mkt100 = mc_scaled.build(c.insider);
  const auto p1 = portfolio::make_insider_policy(c.insider, c.mkt, path, c.cfg.quad);
  const auto p100 =
      portfolio::make_insider_policy(c.insider, mkt100, path, c.cfg.quad);
  double worst = 0.0;
  for (double t : {0.0, c.mc.T / 2.0}) {
    for (double y : {-1.0, 0.0, 1.0}) {
      worst = std::max(worst, std::abs(p1(t, y) - p100(t, y)));
    }
  }
  return make("portfolio.scale_invariance", worst, 0.0, worst == 0.0);
}

// ---- adjoint ---------------------------------------------------------------

inline VerifyEntry gamma0_martingale(Context& c) {
  std::string note;
  const auto mkt = c.adjoint_market(note);
  const std::size_t n = c.adjoint_paths();
  market::PathSimulator sim(c.insider, c.adjoint_steps(), c.seed + 8);
  std::vector<double> g0(n);
  market::PathBundle buf;
  for (std::size_t i = 0; i < n; ++i) {
    sim.simulate_into(buf, i);
    g0[i] = adjoint::gamma0_path(buf, c.insider, mkt, 0.0);
  }
  const auto ms = mean_se(g0);
  const double z = ms.se > 0.0 ? std::abs(ms.mean - 1.0) / ms.se : 0.0;
  return make("adjoint.gamma0_martingale", z, 3.0, z <= 3.0,
              note + "z-score of E[Gamma0(T)]");
}

inline void budget_checks(Context& c, std::vector<VerifyEntry>& out) {
  std::string note;
  const auto mkt = c.adjoint_market(note);
  const std::size_t n = c.adjoint_paths();
  market::PathSimulator sim(c.insider, c.adjoint_steps(), c.seed + 9);
  std::vector<adjoint::ExponentialPair> draws(n);
  market::PathBundle buf;
  for (std::size_t i = 0; i < n; ++i) {
    sim.simulate_into(buf, i);
    draws[i] = adjoint::exponential_pair(buf, c.insider, mkt, 0.0, c.cfg.quad);
  }

  // Exact monotonicity of the budget map under common random numbers.
  double prev = 1e300;
  double min_drop = 1e300;
  for (int i = 0; i <= 10; ++i) {
    const double cc = 0.05 * std::pow(400.0, i / 10.0);
    const double g = adjoint::budget_estimate(c.cfg.utility, cc, draws);
    if (i > 0) min_drop = std::min(min_drop, prev - g);
    prev = g;
  }
  out.push_back(make("adjoint.budget_monotonicity", min_drop, 0.0,
                     min_drop > 0.0, note + "min decrease over a c-ladder"));

  const auto res = adjoint::solve_c(c.insider, mkt, c.cfg.utility, 0.0, n,
                                    c.seed + 9, c.adjoint_steps(), c.cfg.quad);
  const double tol = std::max(1e-8 * mkt.x0, 0.5 * res.budget_se);
  const double gap = std::abs(res.budget_value - mkt.x0);
  out.push_back(make("adjoint.budget_feasibility", gap, tol, gap < tol, note));
}

inline void log_closure(Context& c, std::vector<VerifyEntry>& out) {
  std::string note;
  const auto mkt = c.adjoint_market(note);
  const double y = 0.4;
  const double c0 = 1.0 / mkt.x0;
  const std::size_t paths = c.closure_paths();
  auto gap_at = [&](std::size_t steps) {
    market::PathSimulator sim(c.insider, steps, c.seed + 10);
    market::PathBundle buf;
    double worst = 0.0;
    for (std::size_t i = 0; i < paths; ++i) {
      sim.simulate_into(buf, i);
      const auto policy =
          portfolio::make_insider_policy(c.insider, mkt, buf, c.cfg.quad);
      const double x_market =
          market::wealth_exact(buf, c.insider, mkt, policy, y).back();
      const double x_bsde =
          1.0 / (c0 * adjoint::gamma_path(buf, c.insider, mkt, y, c.cfg.quad));
      worst = std::max(worst, std::abs(x_bsde / x_market - 1.0));
    }
    return worst;
  };
  const double g1 = gap_at(c.closure_steps());
  const double g2 = gap_at(2 * c.closure_steps());
  out.push_back(make("adjoint.log_closure", g1, 1e-2, g1 < 1e-2 && g2 <= g1,
                     note + "refined-grid gap " + g17(g2)));
}

// ---- harness ---------------------------------------------------------------

inline VerifyEntry output_determinism(Context& c) {
  ExperimentConfig small = c.cfg;
  small.t_points = 2;
  small.y_points = 21;
  const auto a = run_density(small);
  const auto b = run_density(small);
  const bool same = a.files == b.files;
  return make("harness.output_determinism", same ? 0.0 : 1.0, 0.0, same,
              "density artifacts built twice");
}

}  // namespace verify_detail

inline RunArtifacts run_verify(const ExperimentConfig& cfg) {
  verify_detail::Context ctx{cfg,
                             cfg.require_insider(),
                             cfg.require_market().build(cfg.require_insider()),
                             cfg.require_market(),
                             cfg.require_seed()};

  std::vector<VerifyEntry> entries;
  const auto guard = [&](const std::string& name, auto&& fn) {
    try {
      entries.push_back(fn(ctx));
    } catch (const std::exception& e) {
      entries.push_back(VerifyEntry{name, 0.0, 0.0, false, e.what()});
    }
  };

  guard("donsker.normalization", verify_detail::normalization);
  guard("donsker.martingale", verify_detail::martingale);
  guard("donsker.imag_residual", verify_detail::imag_residual);
  guard("donsker.ratio_consistency", verify_detail::ratio_consistency);
  guard("donsker.specialization", verify_detail::specialization);
  guard("quadrature.conjugate_symmetry", verify_detail::conjugate_symmetry);
  guard("quadrature.truncation", verify_detail::truncation);
  guard("quadrature.refinement_monotonic", verify_detail::refinement);
  guard("market.seed_determinism", verify_detail::seed_determinism);
  guard("market.realized_y_recompute", verify_detail::realized_y_recompute);
  guard("market.wealth_positivity", verify_detail::wealth_positivity);
  guard("market.jump_rate", verify_detail::jump_rate);
  guard("market.y_variance", verify_detail::y_variance);
  guard("market.forward_consistency", verify_detail::forward_consistency);
  guard("portfolio.stationarity", verify_detail::stationarity);
  guard("portfolio.concavity", verify_detail::concavity);
  guard("portfolio.merton_reduction", verify_detail::merton_reduction);
  guard("portfolio.scale_invariance", verify_detail::scale_invariance);
  guard("adjoint.gamma0_martingale", verify_detail::gamma0_martingale);
  try {
    verify_detail::budget_checks(ctx, entries);
  } catch (const std::exception& e) {
    entries.push_back(VerifyEntry{"adjoint.budget", 0.0, 0.0, false, e.what()});
  }
  try {
    verify_detail::log_closure(ctx, entries);
  } catch (const std::exception& e) {
    entries.push_back(
        VerifyEntry{"adjoint.log_closure", 0.0, 0.0, false, e.what()});
  }
  guard("harness.output_determinism", verify_detail::output_determinism);
  const std::vector<VerifyEntry>& unique = entries;

  int failed = 0;
  ordered_json report;
  report["schema_version"] = 1;
  report["kind"] = "verify";
  report["seed"] = ctx.seed;
  report["n_paths"] = cfg.n_paths;
  report["n_steps"] = cfg.n_steps;
  ordered_json list = ordered_json::array();
  for (const auto& e : unique) {
    if (!e.pass) ++failed;
    ordered_json j;
    j["name"] = e.name;
    j["measured"] = e.measured;
    j["threshold"] = e.threshold;
    j["pass"] = e.pass;
    if (!e.note.empty()) j["note"] = e.note;
    list.push_back(j);
  }
  report["n_checks"] = unique.size();
  report["n_failed"] = failed;
  report["entries"] = list;

  RunArtifacts out;
  out.exit_code = failed == 0 ? 0 : 1;
  out.files.emplace_back("verify_report.json", report.dump(2) + "\n");
  return out;
}

inline RunArtifacts run_experiment(ExperimentKind kind,
                                   const ExperimentConfig& cfg) {
  switch (kind) {
    case ExperimentKind::Density: return run_density(cfg);
    case ExperimentKind::Policy: return run_policy(cfg);
    case ExperimentKind::Simulate: return run_simulate(cfg);
    case ExperimentKind::Foc: return run_foc(cfg);
    case ExperimentKind::SolveC: return run_solve_c(cfg);
    case ExperimentKind::Verify: return run_verify(cfg);
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace insiderlab::harness
