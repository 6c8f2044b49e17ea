#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "insiderlab/errors.hpp"

namespace insiderlab {

// Piecewise-constant function on a uniform grid over [0, t_end].
// Cell i covers [i*dt, (i+1)*dt); the last cell is closed on the right.
// Deterministic time integrals over such functions are exact sums, which is
// why the insider integrands are restricted to this representation.
class PiecewiseConstant {
 public:
  PiecewiseConstant() = default;

  PiecewiseConstant(std::vector<double> values, double t_end)
      : values_(std::move(values)), t_end_(t_end) {
    if (values_.empty()) throw InvalidArgument("piecewise: empty value list");
    if (!(t_end_ > 0.0)) throw InvalidArgument("piecewise: t_end must be > 0");
  }

  static PiecewiseConstant constant(double v, double t_end) {
    return PiecewiseConstant(std::vector<double>{v}, t_end);
  }

  double t_end() const { return t_end_; }
  std::size_t cells() const { return values_.size(); }
  double cell_width() const { return t_end_ / static_cast<double>(values_.size()); }
  const std::vector<double>& values() const { return values_; }
  bool is_constant() const { return values_.size() == 1; }

  double operator()(double s) const {
    return values_[cell_index(s)];
  }

  // Exact \int_a^b f(s) ds for 0 <= a <= b <= t_end.
  double integral(double a, double b) const {
    return accumulate(a, b, [](double v) { return v; });
  }

  // Exact \int_a^b f(s)^2 ds.
  double integral_sq(double a, double b) const {
    return accumulate(a, b, [](double v) { return v * v; });
  }

  // Visits every cell intersecting [a, b] with (value, overlap_length).
  // Used by the Fourier integrands, whose deterministic exponents are
  // cell sums of nonlinear functions of the cell value.
  template <typename Visitor>
  void for_each_cell(double a, double b, Visitor&& visit) const {
    if (!(b > a)) return;
    const double dt = cell_width();
    std::size_t i0 = cell_index(a);
    std::size_t i1 = cell_index(b);
    for (std::size_t i = i0; i <= i1; ++i) {
      const double lo = std::max(a, static_cast<double>(i) * dt);
      const double hi = std::min(b, static_cast<double>(i + 1) * dt);
      if (hi > lo) visit(values_[i], hi - lo);
    }
  }

 private:
  std::size_t cell_index(double s) const {
    if (s < 0.0 || s > t_end_ * (1.0 + 1e-12)) {
      throw InvalidArgument("piecewise: argument outside [0, t_end]");
    }
    const double dt = cell_width();
    auto i = static_cast<std::size_t>(s / dt);
    if (i >= values_.size()) i = values_.size() - 1;
    return i;
  }

  template <typename F>
  double accumulate(double a, double b, F&& f) const {
    double acc = 0.0;
    for_each_cell(a, b, [&](double v, double len) { acc += f(v) * len; });
    return acc;
  }

  std::vector<double> values_;
  double t_end_ = 0.0;
};

}  // namespace insiderlab
