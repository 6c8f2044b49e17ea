#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "insiderlab/donsker.hpp"
#include "insiderlab/errors.hpp"
#include "insiderlab/insider_spec.hpp"

namespace insiderlab::market {

using CoeffField = std::function<double(double t, double y)>;          // b0, sigma0
using JumpField = std::function<double(double t, double y, double z)>; // gamma0
using Policy = std::function<double(double t, double y)>;

inline CoeffField constant_field(double c) {
  return [c](double, double) { return c; };
}
inline JumpField constant_jump_field(double c) {
  return [c](double, double, double) { return c; };
}

// Risky-asset coefficients, initial wealth, and trading horizon. The risk
// free unit price is fixed at 1. The jump driver is the insider spec's
// Poisson random measure, so the Levy measure lives there.
struct MarketSpec {
  CoeffField b0 = constant_field(0.0);
  CoeffField sigma0 = constant_field(0.0);
  JumpField gamma0 = constant_jump_field(0.0);
  double x0 = 1.0;
  double T = 0.0;

  void validate(const InsiderSpec& insider) const {
    if (!(x0 > 0.0)) throw InvalidArgument("market: x0 must be > 0");
    if (!(T > 0.0) || !(T < insider.horizon_T0)) {
      throw InvalidArgument("market: need 0 < T < T0 strictly");
    }
  }
};

struct JumpEvent {
  double time = 0.0;
  double zeta = 0.0;
  std::size_t mark_index = 0;
};

// One simulated scenario on [0, T0]: the uniform grid, the Brownian
// increments, the jump events, and running state at every grid point.
struct PathBundle {
  std::vector<double> grid;   // N+1 points, grid[0] = 0, grid[N] = T0
  std::vector<double> dB;     // N increments, Normal(0, dt)
  std::vector<JumpEvent> jumps;
  double realized_Y = 0.0;

  // Running values at grid points (size N+1 each).
  std::vector<double> B;
  std::vector<double> n_tilde;         // N(t) - total_intensity * t
  std::vector<double> jump_phase;      // \int_0^t \int psi dNtilde
  std::vector<double> brownian_phase;  // \int_0^t beta dB
  std::vector<double> Y;

  std::size_t steps() const { return dB.size(); }
  double dt() const { return grid[1] - grid[0]; }

  donsker::PathPoint point(std::size_t i) const {
    return {B[i], n_tilde[i], jump_phase[i], brownian_phase[i]};
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Per-path substream: paths are identical regardless of generation order,
// which is what makes path-parallel fan-out well defined.
inline std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (index + 1)));
}

}  // namespace detail

// Generates scenario paths of the driving noise and the insider variable.
// Brownian increments are drawn first, then the jump process, so the two
// drivers are independent streams of one engine.
class PathSimulator {
 public:
  PathSimulator(InsiderSpec insider, std::size_t n_steps, std::uint64_t seed)
      : insider_(std::move(insider)), n_(n_steps), seed_(seed) {
    if (n_ < 2) throw InvalidArgument("simulate: need at least 2 steps");
    dt_ = insider_.horizon_T0 / static_cast<double>(n_);
    total_intensity_ = insider_.total_jump_intensity();
    cum_nu_.reserve(insider_.marks.size());
    double acc = 0.0;
    for (const auto& m : insider_.marks) {
      acc += m.nu;
      cum_nu_.push_back(acc);
    }
  }

  const InsiderSpec& insider() const { return insider_; }
  std::size_t n_steps() const { return n_; }
  double dt() const { return dt_; }

  // Index of time t on the grid; throws GridMismatch when t is not a node.
  std::size_t grid_index(double t) const {
    const double r = t / dt_;
    const auto i = static_cast<std::size_t>(std::llround(r));
    if (i > n_ || std::abs(r - static_cast<double>(i)) > 1e-9) {
      throw GridMismatch("simulate: time " + std::to_string(t) +
                         " is not a grid point");
    }
    return i;
  }

  void simulate_into(PathBundle& path, std::uint64_t path_index) const {
    auto eng = detail::path_engine(seed_, path_index);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt_));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    path.grid.resize(n_ + 1);
    path.dB.resize(n_);
    path.B.assign(n_ + 1, 0.0);
    path.n_tilde.assign(n_ + 1, 0.0);
    path.jump_phase.assign(n_ + 1, 0.0);
    path.brownian_phase.assign(n_ + 1, 0.0);
    path.Y.assign(n_ + 1, 0.0);
    path.jumps.clear();

    for (std::size_t i = 0; i <= n_; ++i) {
      path.grid[i] = static_cast<double>(i) * dt_;
    }
    for (std::size_t i = 0; i < n_; ++i) path.dB[i] = normal(eng);

    if (total_intensity_ > 0.0) {
      double t = 0.0;
      while (true) {
        const double u = unif(eng);
        t += -std::log1p(-u) / total_intensity_;
        if (t >= insider_.horizon_T0) break;
        const double v = unif(eng) * total_intensity_;
        std::size_t k = 0;
        while (k + 1 < cum_nu_.size() && v > cum_nu_[k]) ++k;
        path.jumps.push_back(JumpEvent{t, insider_.marks[k].zeta, k});
      }
    }

    std::size_t j = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double t_i = path.grid[i];
      const double t_next = path.grid[i + 1];
      path.B[i + 1] = path.B[i] + path.dB[i];
      path.brownian_phase[i + 1] =
          path.brownian_phase[i] + insider_.beta_at(t_i) * path.dB[i];

      double jump_sum = 0.0;
      double count = 0.0;
      while (j < path.jumps.size() && path.jumps[j].time <= t_next) {
        const auto& ev = path.jumps[j];
        jump_sum += insider_.psi_at(ev.mark_index, ev.time);
        count += 1.0;
        ++j;
      }
      // Compensator of \int\int psi dNtilde over the step, exact for the
      // piecewise-constant psi.
      double comp = 0.0;
      for (std::size_t k = 0; k < insider_.marks.size(); ++k) {
        comp += insider_.marks[k].nu * insider_.psi[k].integral(t_i, t_next);
      }
      path.jump_phase[i + 1] = path.jump_phase[i] + jump_sum - comp;
      path.n_tilde[i + 1] =
          path.n_tilde[i] + count - total_intensity_ * dt_;
      path.Y[i + 1] = path.brownian_phase[i + 1] + path.jump_phase[i + 1];
    }
    path.realized_Y = path.Y[n_];
  }

  PathBundle simulate(std::uint64_t path_index) const {
    PathBundle p;
    simulate_into(p, path_index);
    return p;
  }

 private:
  InsiderSpec insider_;
  std::size_t n_;
  std::uint64_t seed_;
  double dt_ = 0.0;
  double total_intensity_ = 0.0;
  std::vector<double> cum_nu_;
};

inline std::vector<PathBundle> simulate_paths(const InsiderSpec& insider,
                                              const MarketSpec& market,
                                              std::size_t n_paths,
                                              std::uint64_t seed,
                                              std::size_t n_steps = 2048) {
  market.validate(insider);
  if (n_paths < 1) throw InvalidArgument("simulate: n_paths must be >= 1");
  PathSimulator sim(insider, n_steps, seed);
  sim.grid_index(market.T);  // T must be a grid point
  std::vector<PathBundle> out(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) sim.simulate_into(out[i], i);
  return out;
}

// Wealth trajectory x(., y) under the exact exponential solution of
//
//   dx = pi x [b0 dt + sigma0 dB + \int gamma0 dNtilde]
//
// written in compensated form: the ds-exponent is
// pi b0 - pi^2 sigma0^2 / 2 - pi \int gamma0 nu(dz), time integrals by
// left-point sums, plus log(1 + pi gamma0) applied exactly at jump times.
// Returns x at grid points 0..index(T).
inline std::vector<double> wealth_exact(const PathBundle& path,
                                        const InsiderSpec& insider,
                                        const MarketSpec& market,
                                        const Policy& policy, double y) {
  market.validate(insider);
  const double dt = path.dt();
  const double ratio = market.T / dt;
  const auto i_T = static_cast<std::size_t>(std::llround(ratio));
  if (i_T > path.steps() || std::abs(ratio - static_cast<double>(i_T)) > 1e-9) {
    throw GridMismatch("wealth: T is not a grid point");
  }

  std::vector<double> x(i_T + 1);
  x[0] = market.x0;
  double log_acc = 0.0;
  std::size_t j = 0;
  while (j < path.jumps.size() && path.jumps[j].time <= 0.0) ++j;

  for (std::size_t i = 0; i < i_T; ++i) {
    const double t_i = path.grid[i];
    const double t_next = path.grid[i + 1];
    const double pi = policy(t_i, y);
    const double b = market.b0(t_i, y);
    const double s = market.sigma0(t_i, y);

    double comp = 0.0;
    for (const auto& mk : insider.marks) {
      const double g = market.gamma0(t_i, y, mk.zeta);
      if (1.0 + pi * g <= floors::admissibility) {
        throw AdmissibilityViolation(
            "wealth: 1 + pi*gamma0 at or below floor at t=" +
                std::to_string(t_i) + ", mark=" + std::to_string(mk.zeta),
            t_i, mk.zeta);
      }
      comp += mk.nu * g;
    }
    log_acc += (pi * b - 0.5 * pi * pi * s * s - pi * comp) * dt;
    log_acc += pi * s * path.dB[i];

    while (j < path.jumps.size() && path.jumps[j].time <= t_next) {
      const auto& ev = path.jumps[j];
      const double pj = policy(ev.time, y);
      const double gj = market.gamma0(ev.time, y, ev.zeta);
      const double one_plus = 1.0 + pj * gj;
      if (one_plus <= floors::admissibility) {
        throw AdmissibilityViolation(
            "wealth: 1 + pi*gamma0 at or below floor at jump t=" +
                std::to_string(ev.time) + ", mark=" + std::to_string(ev.zeta),
            ev.time, ev.zeta);
      }
      log_acc += std::log(one_plus);
      ++j;
    }
    x[i + 1] = market.x0 * std::exp(log_acc);
  }
  return x;
}

// Terminal insider wealth: the whole path (including the future-measurable Y)
// is generated first, then the y-parametrized dynamics are evaluated at
// y = realized Y. This substitution is what realizes the forward integral.
inline double insider_wealth(const PathBundle& path, const InsiderSpec& insider,
                             const MarketSpec& market, const Policy& policy) {
  return wealth_exact(path, insider, market, policy, path.realized_Y).back();
}

}  // namespace insiderlab::market
