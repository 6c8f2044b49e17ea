#pragma once

// Test-only path utilities: coarsening a fine path to a subsampled grid and
// an independent re-accumulation of the running state, written as direct
// sums rather than the simulator's incremental updates.

#include <cmath>
#include <cstddef>
#include <vector>

#include "insiderlab/insider_spec.hpp"
#include "insiderlab/market.hpp"

namespace testpaths {

using insiderlab::InsiderSpec;
using insiderlab::market::PathBundle;

// Rebuilds B, n_tilde, jump_phase, brownian_phase, Y and realized_Y from the
// increments and jump list alone.
inline void rebuild_running(PathBundle& path, const InsiderSpec& insider) {
  const std::size_t n = path.dB.size();
  path.B.assign(n + 1, 0.0);
  path.n_tilde.assign(n + 1, 0.0);
  path.jump_phase.assign(n + 1, 0.0);
  path.brownian_phase.assign(n + 1, 0.0);
  path.Y.assign(n + 1, 0.0);
  const double lam = insider.total_jump_intensity();
  for (std::size_t i = 0; i < n; ++i) {
    const double t_i = path.grid[i];
    const double t_next = path.grid[i + 1];
    path.B[i + 1] = path.B[i] + path.dB[i];
    path.brownian_phase[i + 1] =
        path.brownian_phase[i] + insider.beta_at(t_i) * path.dB[i];
    double jump_sum = 0.0, count = 0.0;
    for (const auto& ev : path.jumps) {
      if (ev.time > t_i && ev.time <= t_next) {
        jump_sum += insider.psi_at(ev.mark_index, ev.time);
        count += 1.0;
      }
    }
    double comp = 0.0;
    for (std::size_t k = 0; k < insider.marks.size(); ++k) {
      comp += insider.marks[k].nu * insider.psi[k].integral(t_i, t_next);
    }
    path.jump_phase[i + 1] = path.jump_phase[i] + jump_sum - comp;
    path.n_tilde[i + 1] = path.n_tilde[i] + count - lam * (t_next - t_i);
    path.Y[i + 1] = path.brownian_phase[i + 1] + path.jump_phase[i + 1];
  }
  path.realized_Y = path.Y[n];
}

// Subsamples a fine path onto a grid coarser by `factor`, aggregating the
// Brownian increments and keeping the jump list. The coarse path describes
// the same scenario observed on fewer grid points.
inline PathBundle coarsen(const PathBundle& fine, std::size_t factor,
                          const InsiderSpec& insider) {
  PathBundle c;
  const std::size_t n_fine = fine.dB.size();
  const std::size_t n = n_fine / factor;
  c.grid.resize(n + 1);
  c.dB.assign(n, 0.0);
  for (std::size_t i = 0; i <= n; ++i) c.grid[i] = fine.grid[i * factor];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < factor; ++j) c.dB[i] += fine.dB[i * factor + j];
  }
  c.jumps = fine.jumps;
  rebuild_running(c, insider);
  return c;
}

}  // namespace testpaths
