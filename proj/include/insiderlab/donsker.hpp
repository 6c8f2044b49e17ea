#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "insiderlab/errors.hpp"
#include "insiderlab/insider_spec.hpp"
#include "insiderlab/quadrature.hpp"

namespace insiderlab::donsker {

// Observed state for the Brownian-Poisson kind at time t.
struct BpState {
  double b_t = 0.0;        // B(t)
  double n_tilde_t = 0.0;  // N(t) - lambda t
};

// Observed state for the general chaos kind at time t: the two accumulated
// phase terms of the Fourier exponent.
struct ChaosState {
  double jump_phase = 0.0;      // \int_0^t \int psi dNtilde
  double brownian_phase = 0.0;  // \int_0^t beta dB
};

// Everything a density formula can need about an observed path at time t.
// market::PathBundle rows convert to this.
struct PathPoint {
  double b = 0.0;
  double n_tilde = 0.0;
  double jump_phase = 0.0;
  double brownian_phase = 0.0;

  double y_t() const { return jump_phase + brownian_phase; }
  BpState bp() const { return {b, n_tilde}; }
  ChaosState chaos() const { return {jump_phase, brownian_phase}; }
};

// Quadrature diagnostics attached to a density evaluation.
struct EvalDiag {
  double imag_residual = 0.0;  // |Im| / max(|Re|, density_floor)
  int panels_used = 0;
  double quad_residual = 0.0;
};

// The triple (M(t,y), Phi(t,y), Psi(t,y,zeta_k)) at one point. psi_ratio is
// aligned with spec.marks. Ratios are absent when the density value is below
// the density floor (the ratio would be extrapolation, not measurement).
struct DensityState {
  double t = 0.0;
  double y = 0.0;
  double m = 0.0;
  std::optional<double> phi;
  std::vector<std::optional<double>> psi_ratio;
  double imag_residual = 0.0;
};

namespace detail {

using cplx = std::complex<double>;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline void check_time(const InsiderSpec& spec, double t) {
  if (t < 0.0) throw InvalidArgument("donsker: t must be >= 0");
  if (t >= spec.horizon_T0) {
    throw HorizonViolation("donsker: t must be strictly below T0");
  }
}

inline double checked_var_tail(const InsiderSpec& spec, double t) {
  const double v = spec.var_tail(t);
  if (v <= floors::variance) {
    throw DegenerateVariance(
        "donsker: remaining variance below floor (t too close to T0)");
  }
  return v;
}

// The Fourier problem behind every density formula:
//
//   m(t, y) = Re (1/2pi) \int exp[i x (A(t) - y) + C(t, x) - v_t x^2 / 2] dx
//
// where A(t) is the accumulated phase (jump + Brownian), C(t, x) the
// deterministic jump exponent over (t, T0], and v_t the remaining Gaussian
// variance. The Gaussian factor is owned by the quadrature engine; base()
// returns everything else.
struct FourierProblem {
  const InsiderSpec* spec;
  double t;
  double phase0;    // A(t) - y
  double sigma_sq;  // v_t
  double freq_hint;

  cplx base(double x) const {
    cplx e(0.0, x * phase0);
    for (std::size_t k = 0; k < spec->marks.size(); ++k) {
      const double nu = spec->marks[k].nu;
      if (nu == 0.0) continue;
      spec->psi[k].for_each_cell(t, spec->horizon_T0, [&](double p, double len) {
        const cplx w = std::exp(cplx(0.0, x * p)) - cplx(1.0, x * p);
        e += nu * len * w;
      });
    }
    return std::exp(e) / kTwoPi;
  }
};

inline FourierProblem make_problem(const InsiderSpec& spec, double t, double y,
                                   const ChaosState& state) {
  check_time(spec, t);
  FourierProblem p;
  p.spec = &spec;
  p.t = t;
  p.phase0 = state.jump_phase + state.brownian_phase - y;
  p.sigma_sq = checked_var_tail(spec, t);
  double jump_rate = 0.0;
  double psi_sup = 0.0;
  for (std::size_t k = 0; k < spec.marks.size(); ++k) {
    double pk = 0.0;
    spec.psi[k].for_each_cell(t, spec.horizon_T0, [&](double v, double len) {
      jump_rate += 2.0 * spec.marks[k].nu * std::abs(v) * len;
      pk = std::max(pk, std::abs(v));
    });
    psi_sup = std::max(psi_sup, pk);
  }
  p.freq_hint = std::abs(p.phase0) + jump_rate + psi_sup;
  return p;
}

inline double ratio_den_checked(double m) {
  if (m <= floors::density) {
    throw DensityFloor("donsker: density below floor, ratio not available");
  }
  return m;
}

template <typename Weight>
double fourier_value(const FourierProblem& p, Weight&& weight,
                     const QuadratureConfig& cfg, EvalDiag* diag) {
  auto g = [&](double x) { return p.base(x) * weight(x); };
  const QuadratureResult r =
      damped_oscillatory_integral(g, p.sigma_sq, cfg, p.freq_hint);
  const double re = r.value.real();
  const double rel_imag =
      std::abs(r.value.imag()) / std::max(std::abs(re), floors::density);
  if (diag) {
    diag->imag_residual = std::max(diag->imag_residual, rel_imag);
    diag->panels_used = std::max(diag->panels_used, r.panels_used);
    diag->quad_residual = std::max(diag->quad_residual, r.residual_estimate);
  }
  return re;
}

}  // namespace detail

// Diagnostic hook: one sample of the Fourier base integrand (everything
// except the Gaussian damping factor). BrownianPoisson and GeneralChaos
// specializations share this code path by construction.
inline std::complex<double> fourier_base_sample(const InsiderSpec& spec,
                                                double t, double y,
                                                const ChaosState& state,
                                                double x) {
  return detail::make_problem(spec, t, y, state).base(x);
}

// ---------------------------------------------------------------------------
// Gaussian kind: closed forms.
// ---------------------------------------------------------------------------

// Conditional density of Y given F_t when Y has no jump part:
// normal in y with mean Y(t) and variance \int_t^{T0} beta^2.
inline double gaussian_cond_density(const InsiderSpec& spec, double t, double y,
                                    double y_t) {
  if (spec.kind != InsiderKind::Gaussian) {
    throw InvalidArgument("gaussian_cond_density: spec kind must be Gaussian");
  }
  detail::check_time(spec, t);
  const double v = detail::checked_var_tail(spec, t);
  const double d = y_t - y;
  return std::exp(-0.5 * d * d / v) / std::sqrt(detail::kTwoPi * v);
}

// The ratio Phi(t,y) = E[D_t delta_Y(y) | F_t] / E[delta_Y(y) | F_t]
// in the Gaussian case: (y - Y(t)) beta(t) / \int_t^{T0} beta^2.
inline double gaussian_phi(const InsiderSpec& spec, double t, double y,
                           double y_t) {
  if (spec.kind != InsiderKind::Gaussian) {
    throw InvalidArgument("gaussian_phi: spec kind must be Gaussian");
  }
  detail::check_time(spec, t);
  const double v = detail::checked_var_tail(spec, t);
  return (y - y_t) * spec.beta_at(t) / v;
}

// ---------------------------------------------------------------------------
// Brownian-Poisson kind: Fourier inversion with closed-form exponent.
// ---------------------------------------------------------------------------

namespace detail {
inline ChaosState bp_to_chaos(const InsiderSpec& spec, const BpState& s) {
  return ChaosState{s.n_tilde_t, spec.beta.values()[0] * s.b_t};
}

inline void check_bp(const InsiderSpec& spec) {
  if (spec.kind != InsiderKind::BrownianPoisson) {
    throw InvalidArgument("donsker: spec kind must be BrownianPoisson");
  }
}
}  // namespace detail

inline double bp_cond_density(const InsiderSpec& spec, double t, double y,
                              const BpState& state,
                              const QuadratureConfig& quad = {},
                              EvalDiag* diag = nullptr) {
  detail::check_bp(spec);
  auto p = detail::make_problem(spec, t, y, detail::bp_to_chaos(spec, state));
  return detail::fourier_value(
      p, [](double) { return detail::cplx(1.0, 0.0); }, quad, diag);
}

inline double bp_phi(const InsiderSpec& spec, double t, double y,
                     const BpState& state, const QuadratureConfig& quad = {},
                     EvalDiag* diag = nullptr) {
  detail::check_bp(spec);
  auto p = detail::make_problem(spec, t, y, detail::bp_to_chaos(spec, state));
  const double m = detail::ratio_den_checked(detail::fourier_value(
      p, [](double) { return detail::cplx(1.0, 0.0); }, quad, diag));
  const double beta = spec.beta.values()[0];
  const double num = detail::fourier_value(
      p, [beta](double x) { return detail::cplx(0.0, x * beta); }, quad, diag);
  return num / m;
}

inline double bp_psi(const InsiderSpec& spec, double t, double y,
                     const BpState& state, const QuadratureConfig& quad = {},
                     EvalDiag* diag = nullptr) {
  detail::check_bp(spec);
  auto p = detail::make_problem(spec, t, y, detail::bp_to_chaos(spec, state));
  const double m = detail::ratio_den_checked(detail::fourier_value(
      p, [](double) { return detail::cplx(1.0, 0.0); }, quad, diag));
  const double num = detail::fourier_value(
      p,
      [](double x) {
        return std::exp(detail::cplx(0.0, x)) - detail::cplx(1.0, 0.0);
      },
      quad, diag);
  return num / m;
}

// ---------------------------------------------------------------------------
// General chaos kind.
// ---------------------------------------------------------------------------

namespace detail {
inline void check_general(const InsiderSpec& spec) {
  if (spec.kind != InsiderKind::GeneralChaos) {
    throw InvalidArgument("donsker: spec kind must be GeneralChaos");
  }
}
}  // namespace detail

inline double general_cond_density(const InsiderSpec& spec, double t, double y,
                                   const ChaosState& state,
                                   const QuadratureConfig& quad = {},
                                   EvalDiag* diag = nullptr) {
  detail::check_general(spec);
  auto p = detail::make_problem(spec, t, y, state);
  return detail::fourier_value(
      p, [](double) { return detail::cplx(1.0, 0.0); }, quad, diag);
}

inline double general_phi(const InsiderSpec& spec, double t, double y,
                          const ChaosState& state,
                          const QuadratureConfig& quad = {},
                          EvalDiag* diag = nullptr) {
  detail::check_general(spec);
  auto p = detail::make_problem(spec, t, y, state);
  const double m = detail::ratio_den_checked(detail::fourier_value(
      p, [](double) { return detail::cplx(1.0, 0.0); }, quad, diag));
  const double beta_t = spec.beta_at(t);
  const double num = detail::fourier_value(
      p, [beta_t](double x) { return detail::cplx(0.0, x * beta_t); }, quad,
      diag);
  return num / m;
}

inline double general_psi(const InsiderSpec& spec, double t, double y,
                          const ChaosState& state, std::size_t mark_index,
                          const QuadratureConfig& quad = {},
                          EvalDiag* diag = nullptr) {
  detail::check_general(spec);
  if (mark_index >= spec.marks.size()) {
    throw InvalidArgument("general_psi: mark index out of range");
  }
  auto p = detail::make_problem(spec, t, y, state);
  const double m = detail::ratio_den_checked(detail::fourier_value(
      p, [](double) { return detail::cplx(1.0, 0.0); }, quad, diag));
  const double psi_t = spec.psi_at(mark_index, t);
  const double num = detail::fourier_value(
      p,
      [psi_t](double x) {
        return std::exp(detail::cplx(0.0, x * psi_t)) - detail::cplx(1.0, 0.0);
      },
      quad, diag);
  return num / m;
}

// ---------------------------------------------------------------------------
// Kind dispatch on an observed path point.
// ---------------------------------------------------------------------------

inline double cond_density_at(const InsiderSpec& spec, double t, double y,
                              const PathPoint& pt,
                              const QuadratureConfig& quad = {},
                              EvalDiag* diag = nullptr) {
  switch (spec.kind) {
    case InsiderKind::Gaussian:
      return gaussian_cond_density(spec, t, y, pt.brownian_phase);
    case InsiderKind::BrownianPoisson:
      return bp_cond_density(spec, t, y, pt.bp(), quad, diag);
    case InsiderKind::GeneralChaos:
      return general_cond_density(spec, t, y, pt.chaos(), quad, diag);
  }
  throw InvalidArgument("cond_density_at: unknown kind");
}

inline double phi_at(const InsiderSpec& spec, double t, double y,
                     const PathPoint& pt, const QuadratureConfig& quad = {},
                     EvalDiag* diag = nullptr) {
  switch (spec.kind) {
    case InsiderKind::Gaussian:
      return gaussian_phi(spec, t, y, pt.brownian_phase);
    case InsiderKind::BrownianPoisson:
      return bp_phi(spec, t, y, pt.bp(), quad, diag);
    case InsiderKind::GeneralChaos:
      return general_phi(spec, t, y, pt.chaos(), quad, diag);
  }
  throw InvalidArgument("phi_at: unknown kind");
}

inline double psi_at(const InsiderSpec& spec, double t, double y,
                     const PathPoint& pt, std::size_t mark_index,
                     const QuadratureConfig& quad = {},
                     EvalDiag* diag = nullptr) {
  switch (spec.kind) {
    case InsiderKind::Gaussian:
      // Y carries no jump component, so the jump-direction derivative of
      // delta_Y(y) vanishes identically.
      return 0.0;
    case InsiderKind::BrownianPoisson:
      if (mark_index != 0) throw InvalidArgument("psi_at: mark index");
      return bp_psi(spec, t, y, pt.bp(), quad, diag);
    case InsiderKind::GeneralChaos:
      return general_psi(spec, t, y, pt.chaos(), mark_index, quad, diag);
  }
  throw InvalidArgument("psi_at: unknown kind");
}

// Full (m, Phi, Psi_k) evaluation at one point. Ratios below the density
// floor come back empty instead of blowing up.
inline DensityState evaluate(const InsiderSpec& spec, double t, double y,
                             const PathPoint& pt,
                             const QuadratureConfig& quad = {}) {
  DensityState out;
  out.t = t;
  out.y = y;
  EvalDiag diag;
  out.m = cond_density_at(spec, t, y, pt, quad, &diag);
  try {
    out.phi = phi_at(spec, t, y, pt, quad, &diag);
  } catch (const DensityFloor&) {
    out.phi = std::nullopt;
  }
  out.psi_ratio.resize(spec.marks.size());
  for (std::size_t k = 0; k < spec.marks.size(); ++k) {
    try {
      out.psi_ratio[k] = psi_at(spec, t, y, pt, k, quad, &diag);
    } catch (const DensityFloor&) {
      out.psi_ratio[k] = std::nullopt;
    }
  }
  out.imag_residual = diag.imag_residual;
  return out;
}

// Unconditional density of Y at y (time zero, nothing observed).
inline double unconditional_density(const InsiderSpec& spec, double y,
                                    const QuadratureConfig& quad = {}) {
  return cond_density_at(spec, 0.0, y, PathPoint{}, quad);
}

// Default evaluation grid: 401 points over +-8 unconditional standard
// deviations of Y.
inline std::vector<double> default_y_grid(const InsiderSpec& spec,
                                          std::size_t points = 401,
                                          double half_width_sds = 8.0) {
  if (points < 2) throw InvalidArgument("default_y_grid: need >= 2 points");
  const double w = half_width_sds * spec.unconditional_sd();
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = -w + 2.0 * w * static_cast<double>(i) / (points - 1);
  }
  return g;
}

// Batch evaluation of the Brownian-Poisson density at one (t, y) across many
// observed states. The integrand differs across states only through the
// linear phase exp(i x theta) with theta = Ntilde(t) + beta B(t), so the
// x-grid and the state-free factor are computed once; the adaptive engine is
// run on the worst-frequency state to size the grid, and the batch uses the
// next refinement level as margin. Phases advance by a complex recurrence,
// re-anchored periodically to cap rounding drift.
inline std::vector<double> bp_cond_density_batch(
    const InsiderSpec& spec, double t, double y,
    std::span<const BpState> states, const QuadratureConfig& quad = {}) {
  detail::check_bp(spec);
  if (states.empty()) return {};
  const double beta = spec.beta.values()[0];

  double worst = 0.0;
  std::size_t worst_idx = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double th = std::abs(states[i].n_tilde_t + beta * states[i].b_t - y);
    if (th > worst) {
      worst = th;
      worst_idx = i;
    }
  }

  auto p = detail::make_problem(spec, t, y,
                                detail::bp_to_chaos(spec, states[worst_idx]));
  auto g = [&](double x) { return p.base(x); };
  const QuadratureResult ref =
      damped_oscillatory_integral(g, p.sigma_sq, quad, p.freq_hint);

  // Recover the truncation radius the adaptive call used, then add one
  // refinement level of margin for the fixed-grid pass.
  const double log_eps = std::log(quad.truncation_eps);
  double radius = std::sqrt(2.0 * std::max(-log_eps, 1.0) / p.sigma_sq);
  double envelope = std::abs(g(0.0));
  for (int i = 1; i <= 64; ++i) {
    const double x = radius * (static_cast<double>(i) / 64);
    envelope = std::max(envelope, std::max(std::abs(g(x)), std::abs(g(-x))));
  }
  radius = std::sqrt(
      2.0 * std::max(std::log(envelope) - log_eps, 1.0) / p.sigma_sq);

  const int n = std::min(ref.panels_used * 2, quad.max_panels);
  const double h = 2.0 * radius / n;
  const double inv3 = h / 3.0;

  // State-free factor with Simpson weights folded in.
  std::vector<std::complex<double>> pre(static_cast<std::size_t>(n) + 1);
  const double tau = spec.horizon_T0 - t;
  const double lam = spec.lambda();
  for (int k = 0; k <= n; ++k) {
    const double x = -radius + h * k;
    const std::complex<double> eix = std::exp(std::complex<double>(0.0, x));
    const std::complex<double> expo =
        std::complex<double>(0.0, -x * y) +
        lam * tau * (eix - std::complex<double>(1.0, x)) -
        std::complex<double>(0.5 * p.sigma_sq * x * x, 0.0);
    double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    pre[k] = std::exp(expo) / detail::kTwoPi * (w * inv3);
  }

  std::vector<double> out(states.size());
  for (std::size_t s = 0; s < states.size(); ++s) {
    const double theta = states[s].n_tilde_t + beta * states[s].b_t;
    const std::complex<double> step = std::polar(1.0, h * theta);
    std::complex<double> phase = std::polar(1.0, -radius * theta);
    std::complex<double> acc{0.0, 0.0};
    for (int k = 0; k <= n; ++k) {
      if (k % 256 == 0) phase = std::polar(1.0, (-radius + h * k) * theta);
      acc += pre[k] * phase;
      phase *= step;
    }
    out[s] = acc.real();
  }
  return out;
}

}  // namespace insiderlab::donsker
