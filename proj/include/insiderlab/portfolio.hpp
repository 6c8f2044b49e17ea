#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "insiderlab/donsker.hpp"
#include "insiderlab/errors.hpp"
#include "insiderlab/insider_spec.hpp"
#include "insiderlab/market.hpp"

namespace insiderlab::portfolio {

enum class SolveStatus { Converged, NoSolution };

// Endpoint values of the first-order condition when no sign change was found.
struct BracketProbe {
  double lo = 0.0, hi = 0.0;
  double f_lo = 0.0, f_hi = 0.0;
};

struct PolicyResult {
  double pi = 0.0;                    // fraction of wealth in the risky asset
  double foc_residual = 0.0;
  double admissibility_margin = 1.0;  // min over marks of 1 + pi*gamma0
  std::optional<double> hamiltonian_grad;
  SolveStatus status = SolveStatus::Converged;
  std::optional<BracketProbe> probe;
};

// Adjoint triple (p, q, r(zeta_k)) at one (t, y); r aligned with the marks.
struct AdjointState {
  double p = 0.0;
  double q = 0.0;
  std::vector<double> r;
};

// One jump term of the first-order condition.
struct FocMark {
  double gamma = 0.0;  // gamma0 at this mark
  double nu = 0.0;     // intensity
  double psi = 0.0;    // Psi(t, y, zeta)
};

namespace detail {

struct FocProblem {
  double b0 = 0.0;
  double sigma0 = 0.0;
  double phi = 0.0;
  std::vector<FocMark> marks;

  // b0 - pi s^2 + s Phi + sum_k nu_k (gamma_k Psi_k - pi gamma_k^2)/(1 + pi gamma_k)
  double f(double pi) const {
    double v = b0 - pi * sigma0 * sigma0 + sigma0 * phi;
    for (const auto& m : marks) {
      if (m.nu == 0.0 || m.gamma == 0.0) continue;
      v += m.nu * (m.gamma * m.psi - pi * m.gamma * m.gamma) /
           (1.0 + pi * m.gamma);
    }
    return v;
  }

  double df(double pi) const {
    double v = -sigma0 * sigma0;
    for (const auto& m : marks) {
      if (m.nu == 0.0 || m.gamma == 0.0) continue;
      const double d = 1.0 + pi * m.gamma;
      v -= m.nu * m.gamma * m.gamma * (1.0 + m.psi) / (d * d);
    }
    return v;
  }

  // Per-(t,y) expected-log-growth integrand, normalized by the density.
  // Its stationary points are exactly the roots of f.
  double objective(double pi) const {
    double v = pi * b0 - 0.5 * pi * pi * sigma0 * sigma0 + pi * sigma0 * phi;
    for (const auto& m : marks) {
      if (m.nu == 0.0 || m.gamma == 0.0) continue;
      const double lg = std::log(1.0 + pi * m.gamma);
      v += m.nu * ((lg - pi * m.gamma) + lg * m.psi);
    }
    return v;
  }

  // Admissible open interval: 1 + pi*gamma_k > 0 for every mark.
  std::pair<double, double> bracket() const {
    double lo = -1e12, hi = 1e12;
    for (const auto& m : marks) {
      if (m.nu == 0.0 || m.gamma == 0.0) continue;
      const double edge = -1.0 / m.gamma;
      if (m.gamma > 0.0) lo = std::max(lo, edge);
      else hi = std::min(hi, edge);
    }
    return {lo, hi};
  }

  double margin(double pi) const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& m : marks) {
      if (m.nu == 0.0) continue;
      v = std::min(v, 1.0 + pi * m.gamma);
    }
    return std::isfinite(v) ? v : 1.0;
  }
};

// Newton iteration safeguarded by a maintained sign-change bracket.
inline double polish_root(const FocProblem& p, double a, double b, double fa) {
  double x = 0.5 * (a + b);
  double fx = p.f(x);
  for (int it = 0; it < 200; ++it) {
    if (std::abs(fx) < floors::foc_tol) return x;
    if ((fa < 0.0) == (fx < 0.0)) {
      a = x;
      fa = fx;
    } else {
      b = x;
    }
    const double d = p.df(x);
    double next = x - fx / d;
    if (!(next > std::min(a, b)) || !(next < std::max(a, b)) ||
        !std::isfinite(next)) {
      next = 0.5 * (a + b);
    }
    x = next;
    fx = p.f(x);
    if (std::abs(b - a) < 1e-16 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

inline PolicyResult solve(const FocProblem& p) {
  auto [lo, hi] = p.bracket();
  // Keep strictly inside admissibility: endpoints where 1 + pi*gamma = eps.
  const double eps_edge = 1e-12;
  double plo = lo, phi_edge = hi;
  for (const auto& m : p.marks) {
    if (m.nu == 0.0 || m.gamma == 0.0) continue;
    if (m.gamma > 0.0) plo = std::max(plo, (eps_edge - 1.0) / m.gamma);
    else phi_edge = std::min(phi_edge, (eps_edge - 1.0) / m.gamma);
  }

  // Geometric probe ladder outward from 0 plus near-boundary probes.
  std::vector<double> probes{0.0};
  for (double step = 1.0 / 1024.0; step <= 1 << 20; step *= 2.0) {
    probes.push_back(step);
    probes.push_back(-step);
  }
  probes.push_back(plo + std::abs(plo) * 1e-9 + 1e-300);
  probes.push_back(phi_edge - std::abs(phi_edge) * 1e-9 - 1e-300);
  std::vector<double> pts;
  for (double q : probes) {
    if (q > plo && q < phi_edge && std::isfinite(q)) pts.push_back(q);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  // Sign-change intervals; exact zeros at probe points become degenerate
  // cells and are returned as-is.
  std::vector<std::pair<double, double>> cells;
  double prev_x = pts.front();
  double prev_f = p.f(prev_x);
  if (prev_f == 0.0) cells.emplace_back(prev_x, prev_x);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double fx = p.f(pts[i]);
    if (fx == 0.0) {
      cells.emplace_back(pts[i], pts[i]);
    } else if (prev_f != 0.0 && (prev_f < 0.0) != (fx < 0.0)) {
      cells.emplace_back(prev_x, pts[i]);
    }
    prev_x = pts[i];
    prev_f = fx;
  }

  PolicyResult out;
  if (cells.empty()) {
    out.status = SolveStatus::NoSolution;
    out.probe = BracketProbe{pts.front(), pts.back(), p.f(pts.front()),
                             p.f(pts.back())};
    out.pi = 0.0;
    out.foc_residual = std::abs(p.f(0.0));
    out.admissibility_margin = p.margin(0.0);
    return out;
  }

  // The concave objective makes the root unique; if probing still found
  // several sign changes, keep the one with the best objective value.
  double best_pi = 0.0;
  double best_obj = -std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : cells) {
    const double root =
        (a == b) ? a : polish_root(p, a, b, p.f(a));
    const double obj = p.objective(root);
    if (obj > best_obj) {
      best_obj = obj;
      best_pi = root;
    }
  }
  out.pi = best_pi;
  out.foc_residual = std::abs(p.f(best_pi));
  out.admissibility_margin = p.margin(best_pi);
  out.status = SolveStatus::Converged;
  return out;
}

}  // namespace detail

// Log-utility optimal fraction in a Brownian market:
// pi = b0/sigma0^2 + Phi/sigma0. Phi = 0 recovers the Merton ratio.
inline PolicyResult log_pi_brownian(double b0, double sigma0, double phi) {
  if (std::abs(sigma0) < floors::volatility) {
    throw DegenerateVolatility("log_pi_brownian: |sigma0| below floor");
  }
  PolicyResult out;
  out.pi = b0 / (sigma0 * sigma0) + phi / sigma0;
  out.foc_residual = 0.0;
  out.admissibility_margin = 1.0;
  out.status = SolveStatus::Converged;
  return out;
}

// Root of the Brownian-Poisson first-order condition
//   b0 - pi sigma0^2 - lambda pi gamma0^2/(1+pi gamma0)
//      + sigma0 Phi + lambda gamma0 Psi/(1+pi gamma0) = 0
// on the admissible bracket.
inline PolicyResult solve_foc_bp(double b0, double sigma0, double gamma0,
                                 double lambda, double phi, double psi) {
  if (sigma0 == 0.0 && (gamma0 == 0.0 || lambda == 0.0)) {
    throw DegenerateMarket("solve_foc_bp: sigma0 = 0 and no jump channel");
  }
  detail::FocProblem p;
  p.b0 = b0;
  p.sigma0 = sigma0;
  p.phi = phi;
  p.marks = {FocMark{gamma0, lambda, psi}};
  return detail::solve(p);
}

// General Ito-Levy first-order condition with a discrete mark measure;
// jump terms are mark sums.
inline PolicyResult solve_foc_levy(double b0, double sigma0,
                                   const std::vector<FocMark>& marks,
                                   double phi) {
  bool any_jump = false;
  for (const auto& m : marks) any_jump |= (m.nu > 0.0 && m.gamma != 0.0);
  if (sigma0 == 0.0 && !any_jump) {
    throw DegenerateMarket("solve_foc_levy: sigma0 = 0 and no jump channel");
  }
  detail::FocProblem p;
  p.b0 = b0;
  p.sigma0 = sigma0;
  p.phi = phi;
  p.marks = marks;
  return detail::solve(p);
}

// Pure-Poisson market (sigma0 absent). Requires b0/(lambda gamma0) < 1 so the
// adjoint exponential log(1 - b0/(lambda gamma0)) exists.
inline PolicyResult solve_foc_poisson_pure(double b0, double gamma0,
                                           double lambda, double psi) {
  if (gamma0 == 0.0 || !(lambda > 0.0)) {
    throw DegenerateMarket("solve_foc_poisson_pure: need gamma0 != 0, lambda > 0");
  }
  if (b0 / (lambda * gamma0) >= 1.0) {
    throw InvalidRegime("solve_foc_poisson_pure: b0/(lambda*gamma0) >= 1");
  }
  detail::FocProblem p;
  p.b0 = b0;
  p.sigma0 = 0.0;
  p.phi = 0.0;
  p.marks = {FocMark{gamma0, lambda, psi}};
  return detail::solve(p);
}

// Per-(t,y) expected-log-growth integrand; grid argmax of this is the
// independent oracle for the FOC roots.
inline double log_growth_objective(double b0, double sigma0,
                                   const std::vector<FocMark>& marks,
                                   double phi, double pi) {
  detail::FocProblem p;
  p.b0 = b0;
  p.sigma0 = sigma0;
  p.phi = phi;
  p.marks = marks;
  return p.objective(pi);
}

inline double foc_value(double b0, double sigma0,
                        const std::vector<FocMark>& marks, double phi,
                        double pi) {
  detail::FocProblem p;
  p.b0 = b0;
  p.sigma0 = sigma0;
  p.phi = phi;
  p.marks = marks;
  return p.f(pi);
}

inline double foc_second_derivative(double b0, double sigma0,
                                    const std::vector<FocMark>& marks,
                                    double phi, double pi) {
  detail::FocProblem p;
  p.b0 = b0;
  p.sigma0 = sigma0;
  p.phi = phi;
  p.marks = marks;
  return p.df(pi);
}

// Hamiltonian for the portfolio problem,
//   H = M(t,y) f + b p + sigma q + \int gamma r nu(dz)
// with b = pi x b0, sigma = pi x sigma0, gamma = pi x gamma0. profit_rate is
// the running profit f(t, x, pi, y); the portfolio applications have f = 0.
inline double hamiltonian(double t, double x, double y, double pi,
                          const AdjointState& adj,
                          const market::MarketSpec& mkt,
                          const InsiderSpec& insider,
                          const donsker::DensityState& density,
                          double profit_rate = 0.0) {
  double jump_term = 0.0;
  for (std::size_t k = 0; k < insider.marks.size(); ++k) {
    const double r_k = k < adj.r.size() ? adj.r[k] : 0.0;
    jump_term +=
        insider.marks[k].nu * mkt.gamma0(t, y, insider.marks[k].zeta) * r_k;
  }
  return density.m * profit_rate +
         pi * x * (mkt.b0(t, y) * adj.p + mkt.sigma0(t, y) * adj.q + jump_term);
}

// dH/dpi for the linear-in-pi Hamiltonian: x [b0 p + sigma0 q + sum gamma r nu].
inline double hamiltonian_grad_pi(double t, double x, double y,
                                  const AdjointState& adj,
                                  const market::MarketSpec& mkt,
                                  const InsiderSpec& insider) {
  double jump_term = 0.0;
  for (std::size_t k = 0; k < insider.marks.size(); ++k) {
    const double r_k = k < adj.r.size() ? adj.r[k] : 0.0;
    jump_term +=
        insider.marks[k].nu * mkt.gamma0(t, y, insider.marks[k].zeta) * r_k;
  }
  return x * (mkt.b0(t, y) * adj.p + mkt.sigma0(t, y) * adj.q + jump_term);
}

// The honest-trader policy: the first-order condition with the information
// ratios zeroed out. Reduces to the Merton ratio b0/sigma0^2 when the market
// has no jumps.
inline market::Policy make_merton_policy(const InsiderSpec& insider,
                                         const market::MarketSpec& mkt) {
  if (insider.marks.empty()) {
    return [mkt](double t, double y) {
      return log_pi_brownian(mkt.b0(t, y), mkt.sigma0(t, y), 0.0).pi;
    };
  }
  std::vector<Mark> measure = insider.marks;
  return [mkt, measure](double t, double y) {
    std::vector<FocMark> fm(measure.size());
    for (std::size_t k = 0; k < measure.size(); ++k) {
      fm[k] = FocMark{mkt.gamma0(t, y, measure[k].zeta), measure[k].nu, 0.0};
    }
    const PolicyResult r = solve_foc_levy(mkt.b0(t, y), mkt.sigma0(t, y), fm, 0.0);
    if (r.status != SolveStatus::Converged) {
      throw NoRootInBracket("merton policy: no admissible root at t=" +
                            std::to_string(t));
    }
    return r.pi;
  };
}

// The insider's log-optimal policy along one simulated path: at each (t, y)
// the information ratios Phi, Psi are read from the path's filtration state
// (the left grid point, so jump-time evaluations stay predictable) and the
// first-order condition is solved. The path and insider spec must outlive
// the returned policy.
inline market::Policy make_insider_policy(const InsiderSpec& insider,
                                          const market::MarketSpec& mkt,
                                          const market::PathBundle& path,
                                          const QuadratureConfig& quad = {}) {
  const market::PathBundle* p = &path;
  const InsiderSpec* ins = &insider;
  return [p, ins, mkt, quad](double t, double y) {
    const double dt = p->dt();
    auto i = static_cast<std::size_t>(t / dt + 1e-9);
    if (i >= p->B.size()) i = p->B.size() - 1;
    const donsker::PathPoint pt = p->point(i);
    const double phi = donsker::phi_at(*ins, t, y, pt, quad);
    if (ins->marks.empty()) {
      return log_pi_brownian(mkt.b0(t, y), mkt.sigma0(t, y), phi).pi;
    }
    std::vector<FocMark> fm(ins->marks.size());
    for (std::size_t k = 0; k < ins->marks.size(); ++k) {
      fm[k] = FocMark{mkt.gamma0(t, y, ins->marks[k].zeta), ins->marks[k].nu,
                      donsker::psi_at(*ins, t, y, pt, k, quad)};
    }
    const PolicyResult r = solve_foc_levy(mkt.b0(t, y), mkt.sigma0(t, y), fm, phi);
    if (r.status != SolveStatus::Converged) {
      throw NoRootInBracket("insider policy: no admissible root at t=" +
                            std::to_string(t));
    }
    return r.pi;
  };
}

// Adjoint state satisfying the stationarity relation for a solved policy:
// q = -(b0/sigma0) p when the market has a Brownian exposure, otherwise the
// jump channel carries it via r = -(b0 / sum(gamma nu)) p.
inline AdjointState stationary_adjoint(double t, double y, double p_value,
                                       const market::MarketSpec& mkt,
                                       const InsiderSpec& insider) {
  AdjointState adj;
  adj.p = p_value;
  adj.r.assign(insider.marks.size(), 0.0);
  const double s = mkt.sigma0(t, y);
  if (std::abs(s) >= floors::volatility) {
    adj.q = -(mkt.b0(t, y) / s) * p_value;
    return adj;
  }
  double denom = 0.0;
  for (const auto& mk : insider.marks) {
    denom += mk.nu * mkt.gamma0(t, y, mk.zeta);
  }
  if (denom == 0.0) {
    throw DegenerateMarket("stationary_adjoint: no Brownian or jump channel");
  }
  const double r_common = -mkt.b0(t, y) / denom * p_value;
  for (auto& r : adj.r) r = r_common;
  adj.q = 0.0;
  return adj;
}

}  // namespace insiderlab::portfolio
