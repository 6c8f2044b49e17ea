#pragma once

#include <stdexcept>
#include <string>

namespace insiderlab {

// Base class for everything thrown by the library. The CLI maps these to
// exit code 3 (numerical error) unless a more specific mapping applies.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid user input: bad spec fields, bad config values, bad arguments.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Remaining Gaussian variance fell below variance_floor (t too close to T0).
class DegenerateVariance : public Error {
 public:
  using Error::Error;
};

// Evaluation time at or past the information horizon T0.
class HorizonViolation : public Error {
 public:
  using Error::Error;
};

// Density denominator below density_floor; the ratio is not available.
class DensityFloor : public Error {
 public:
  using Error::Error;
};

// The oscillatory integral did not reach tolerance within max_panels,
// or the truncation radius estimate failed.
class QuadratureDivergence : public Error {
 public:
  using Error::Error;
};

// Non-positive Gaussian damping passed to the quadrature engine.
class InvalidDamping : public Error {
 public:
  using Error::Error;
};

// 1 + pi * gamma0 dropped to or below the admissibility floor.
class AdmissibilityViolation : public Error {
 public:
  AdmissibilityViolation(const std::string& what, double t, double zeta)
      : Error(what), time(t), mark(zeta) {}
  double time;
  double mark;
};

// Trading horizon T is not a point of the simulation grid.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

// |sigma0| below the volatility floor where a Brownian formula divides by it.
class DegenerateVolatility : public Error {
 public:
  using Error::Error;
};

// sigma0 = 0 and gamma0 = 0: the first-order condition has no content.
class DegenerateMarket : public Error {
 public:
  using Error::Error;
};

// No sign change of the first-order condition inside the admissible bracket.
class NoRootInBracket : public Error {
 public:
  using Error::Error;
};

// Pure-Poisson formulas need b0/(lambda*gamma0) < 1.
class InvalidRegime : public Error {
 public:
  using Error::Error;
};

// No c in [1e-12, 1e12] brackets the budget constraint.
class BracketFailure : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent configuration file / CLI usage (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Numerical guards shared across modules.
namespace floors {
// Minimum remaining Gaussian variance before density formulas error out.
inline constexpr double variance = 1e-10;
// Minimum density value accepted as a ratio denominator.
inline constexpr double density = 1e-12;
// Minimum admissible value of 1 + pi * gamma0.
inline constexpr double admissibility = 1e-9;
// Minimum |sigma0| where formulas divide by it.
inline constexpr double volatility = 1e-12;
// Relative imaginary residual tolerated on density integrals.
inline constexpr double imag_tol = 1e-6;
// First-order-condition residual target.
inline constexpr double foc_tol = 1e-10;
}  // namespace floors

}  // namespace insiderlab
