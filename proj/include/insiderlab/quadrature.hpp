#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include "insiderlab/errors.hpp"

namespace insiderlab {

struct QuadratureConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  int max_panels = 1 << 20;
  double truncation_eps = 1e-16;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(truncation_eps > 0.0)) {
      throw InvalidArgument("quadrature: tolerances must be strictly positive");
    }
    if (max_panels < 4 || (max_panels & (max_panels - 1)) != 0) {
      throw InvalidArgument("quadrature: max_panels must be a power of two >= 4");
    }
  }
};

struct QuadratureResult {
  std::complex<double> value{0.0, 0.0};
  int panels_used = 0;
  double residual_estimate = 0.0;
  // |change| between successive refinement levels, ending with the accepted one.
  std::vector<double> residual_history;
};

namespace detail {

// Composite-trapezoid ladder with Simpson and Richardson acceleration on a
// fixed interval [-radius, radius]. Each refinement level only evaluates the
// new midpoints. freq_hint is an upper bound on the integrand phase rate;
// the starting panel count resolves that frequency so that two coarse levels
// cannot agree by aliasing before the oscillation is seen.
//
// Nodes are summed as mirrored +-x pairs: when f(-x) = conj(f(x)) the
// imaginary parts cancel exactly in IEEE arithmetic, so the imaginary
// residual reported upstream measures genuine asymmetry, not summation
// rounding.
template <typename F>
QuadratureResult refine_on_interval(F&& f, double radius,
                                    const QuadratureConfig& cfg,
                                    double freq_hint) {
  using cplx = std::complex<double>;
  cfg.validate();
  if (!(radius > 0.0)) throw InvalidArgument("quadrature: radius must be > 0");

  int n = 16;
  const double wanted = 4.0 * radius * std::max(freq_hint, 0.0);
  while (n < cfg.max_panels / 4 && static_cast<double>(n) < wanted) n *= 2;

  const auto pair = [&](double x) { return f(x) + f(-x); };

  double h = 2.0 * radius / n;
  cplx trap = f(0.0) + 0.5 * pair(h * (n / 2));
  for (int k = 1; k < n / 2; ++k) trap += pair(h * k);
  trap *= h;

  QuadratureResult out;
  cplx simpson_prev{0.0, 0.0};
  cplx richardson{0.0, 0.0};
  bool have_simpson = false;

  while (true) {
    if (n * 2 > cfg.max_panels) {
      throw QuadratureDivergence(
          "quadrature: max_panels reached before tolerance");
    }
    cplx mids{0.0, 0.0};
    for (int k = 0; k < n / 2; ++k) mids += pair(h * (k + 0.5));
    n *= 2;
    h *= 0.5;
    const cplx trap_next = 0.5 * trap + h * mids;
    const cplx simpson = (4.0 * trap_next - trap) / 3.0;
    trap = trap_next;

    if (have_simpson) {
      const double change = std::abs(simpson - simpson_prev);
      out.residual_history.push_back(change);
      richardson = simpson + (simpson - simpson_prev) / 15.0;
      const double tol = std::max(cfg.rel_tol * std::abs(simpson), cfg.abs_tol);
      if (change < tol && out.residual_history.size() >= 2) {
        out.value = richardson;
        out.panels_used = n;
        out.residual_estimate = change;
        return out;
      }
    }
    simpson_prev = simpson;
    have_simpson = true;
  }
}

}  // namespace detail

// Integrates f(x) over the fixed interval [-radius, radius]. Exposed so that
// tests can vary the truncation radius independently of the envelope logic.
inline QuadratureResult integrate_on(
    const std::function<std::complex<double>(double)>& f, double radius,
    const QuadratureConfig& cfg = {}, double freq_hint = 0.0) {
  return detail::refine_on_interval(f, radius, cfg, freq_hint);
}

// The common engine behind the conditional-density formulas:
//
//   \int_R g(x) exp(-sigma_sq x^2 / 2) dx
//
// for complex-valued oscillatory g under Gaussian damping. The truncation
// radius comes from the damping alone: |g| is bounded by its envelope sampled
// at 64 probe points, and R solves env * exp(-sigma_sq R^2/2) = truncation_eps.
inline QuadratureResult damped_oscillatory_integral(
    const std::function<std::complex<double>(double)>& g, double sigma_sq,
    const QuadratureConfig& cfg = {}, double freq_hint = 0.0) {
  cfg.validate();
  if (!(sigma_sq > 0.0)) {
    throw InvalidDamping("quadrature: sigma_sq must be strictly positive");
  }

  // Provisional radius assuming |g| <= 1, then one envelope pass to widen.
  const double log_eps = std::log(cfg.truncation_eps);
  double radius = std::sqrt(2.0 * std::max(-log_eps, 1.0) / sigma_sq);
  double envelope = std::abs(g(0.0));
  constexpr int kProbes = 64;
  for (int i = 1; i <= kProbes; ++i) {
    const double x = radius * (static_cast<double>(i) / kProbes);
    envelope = std::max(envelope, std::max(std::abs(g(x)), std::abs(g(-x))));
  }
  if (!std::isfinite(envelope)) {
    throw QuadratureDivergence("quadrature: envelope estimate failed");
  }
  if (envelope == 0.0) return QuadratureResult{};  // identically zero integrand
  const double arg = std::log(envelope) - log_eps;
  radius = std::sqrt(2.0 * std::max(arg, 1.0) / sigma_sq);
  if (!std::isfinite(radius)) {
    throw QuadratureDivergence("quadrature: truncation radius estimate failed");
  }

  auto integrand = [&](double x) {
    return g(x) * std::exp(-0.5 * sigma_sq * x * x);
  };
  return detail::refine_on_interval(integrand, radius, cfg, freq_hint);
}

}  // namespace insiderlab
