#include "insiderlab/donsker.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "insiderlab/market.hpp"
#include "support/oracles.hpp"

namespace {

using namespace insiderlab;
using donsker::BpState;
using donsker::ChaosState;

InsiderSpec unit_gaussian() { return InsiderSpec::gaussian_const(1.0, 1.0); }

// GeneralChaos twin of a pure-Gaussian spec: no marks at all.
InsiderSpec general_gaussian() {
  return InsiderSpec::general(PiecewiseConstant::constant(1.0, 1.0), {}, {},
                              1.0);
}

TEST(GaussianDensity, StandardNormalValues) {
  const auto spec = unit_gaussian();
  EXPECT_NEAR(donsker::gaussian_cond_density(spec, 0.0, 0.0, 0.0), 0.39894228,
              1e-8);
  EXPECT_NEAR(donsker::gaussian_cond_density(spec, 0.0, 0.0, 1.0), 0.24197072,
              1e-8);
}

TEST(GaussianDensity, MatchesGeneralQuadratureWithoutJumps) {
  const auto gspec = unit_gaussian();
  const auto cspec = general_gaussian();
  const double closed = donsker::gaussian_cond_density(gspec, 0.5, 0.3, 0.1);
  const double quad =
      donsker::general_cond_density(cspec, 0.5, 0.3, ChaosState{0.0, 0.1});
  EXPECT_NEAR(quad / closed, 1.0, 1e-6);

  std::mt19937 rng(5u);
  std::uniform_real_distribution<double> ut(0.0, 0.9), uy(-2.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    const double t = ut(rng), y = uy(rng), y_t = uy(rng);
    const double a = donsker::gaussian_cond_density(gspec, t, y, y_t);
    const double b =
        donsker::general_cond_density(cspec, t, y, ChaosState{0.0, y_t});
    EXPECT_NEAR(b / a, 1.0, 1e-6) << "t=" << t << " y=" << y << " y_t=" << y_t;
  }
}

TEST(GaussianPhi, ClosedFormValues) {
  const auto spec = unit_gaussian();
  EXPECT_DOUBLE_EQ(donsker::gaussian_phi(spec, 0.3, 0.7, 0.7), 0.0);
  // Y = B(T0): Phi(0, y) = (y - B(0)) / T0.
  EXPECT_DOUBLE_EQ(donsker::gaussian_phi(spec, 0.0, 0.5, 0.0), 0.5);
  EXPECT_NEAR(donsker::gaussian_phi(spec, 0.25, 0.2, -0.1), 0.4, 1e-15);
}

TEST(GaussianPhi, MatchesLogDensityBumpDerivative) {
  // Central finite difference of log m under a Brownian bump at t: a bump of
  // size eps moves Y(t) by beta(t) * eps.
  const auto spec = unit_gaussian();
  const double t = 0.25, y = 0.2, y_t = -0.1, eps = 1e-5;
  const double beta_t = 1.0;
  const double up =
      std::log(donsker::gaussian_cond_density(spec, t, y, y_t + beta_t * eps));
  const double dn =
      std::log(donsker::gaussian_cond_density(spec, t, y, y_t - beta_t * eps));
  const double fd = (up - dn) / (2.0 * eps);
  EXPECT_NEAR(fd, donsker::gaussian_phi(spec, t, y, y_t), 1e-5);
}

TEST(GaussianDensity, GuardsDegenerateVarianceAndHorizon) {
  const auto spec = unit_gaussian();
  EXPECT_THROW(donsker::gaussian_cond_density(spec, 1.0 - 1e-12, 0.0, 0.0),
               DegenerateVariance);
  EXPECT_THROW(donsker::gaussian_cond_density(spec, 1.0, 0.0, 0.0),
               HorizonViolation);
  EXPECT_THROW(donsker::gaussian_phi(spec, 1.5, 0.0, 0.0), HorizonViolation);
  EXPECT_THROW(donsker::gaussian_cond_density(spec, -0.1, 0.0, 0.0),
               InvalidArgument);
}

TEST(BpDensity, GaussianLimitWhenLambdaVanishes) {
  const auto bp = InsiderSpec::brownian_poisson(1.0, 1e-12, 1.0);
  const auto gauss = unit_gaussian();
  for (double t : {0.0, 0.4}) {
    for (double y : {-1.0, 0.0, 0.7}) {
      const double b_t = 0.2;
      const double m_bp = donsker::bp_cond_density(bp, t, y, BpState{b_t, 0.0});
      const double m_g = donsker::gaussian_cond_density(gauss, t, y, b_t);
      EXPECT_NEAR(m_bp / m_g, 1.0, 1e-6) << "t=" << t << " y=" << y;
      const double p_bp = donsker::bp_phi(bp, t, y, BpState{b_t, 0.0});
      const double p_g = donsker::gaussian_phi(gauss, t, y, b_t);
      EXPECT_NEAR(p_bp, p_g, 1e-5);
    }
  }
}

TEST(BpDensity, NormalizesOverDefaultGrid) {
  const auto bp = InsiderSpec::brownian_poisson(1.0, 1.0, 1.0);
  const auto grid = donsker::default_y_grid(bp);
  const double dy = grid[1] - grid[0];
  double total = 0.0;
  for (double y : grid) {
    total += donsker::bp_cond_density(bp, 0.0, y, BpState{}) * dy;
  }
  EXPECT_NEAR(total, 1.0, 1e-3);
}

TEST(BpDensity, MatchesKernelDensityOfDirectDraws) {
  const auto bp = InsiderSpec::brownian_poisson(1.0, 0.5, 1.0);
  const auto samples = oracles::draw_chaos_terminal(
      1.0, 1.0, {{1.0, 0.5}}, 200'000, 99u);
  const double h = oracles::kde_bandwidth(samples);
  auto density = [&](double u) {
    return donsker::bp_cond_density(bp, 0.0, u, BpState{});
  };
  for (double y : {-1.0, 0.0, 1.0}) {
    const auto kde = oracles::kde_at(samples, y, h);
    const double ref = oracles::smoothed_reference(density, y, h);
    EXPECT_NEAR(kde.value, ref, 3.0 * kde.se) << "y=" << y;
  }
}

TEST(BpPsi, MatchesMonteCarloBumpOracle) {
  // D_{t,1} phi(F) = phi(F + 1) - phi(F): the ratio Psi at t=0 equals
  // [density of Y+1 at y minus density of Y at y] / density of Y at y.
  const auto bp = InsiderSpec::brownian_poisson(1.0, 0.5, 1.0);
  const double y = 1.0;
  const double psi = donsker::bp_psi(bp, 0.0, y, BpState{});

  const auto samples = oracles::draw_chaos_terminal(
      1.0, 1.0, {{1.0, 0.5}}, 400'000, 17u);
  const double h = oracles::kde_bandwidth(samples);
  std::vector<double> bumped(samples.size()), base(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    bumped[i] = oracles::gauss_kernel(y - 1.0 - samples[i], h);
    base[i] = oracles::gauss_kernel(y - samples[i], h);
  }
  const auto ratio = oracles::paired_ratio(bumped, base);

  // Smooth the quadrature side with the same kernel so the comparison is
  // bias-free and purely statistical.
  auto density = [&](double u) {
    return donsker::bp_cond_density(bp, 0.0, u, BpState{});
  };
  const double ref_b = oracles::smoothed_reference(density, y - 1.0, h);
  const double ref = oracles::smoothed_reference(density, y, h);
  const double psi_smoothed = (ref_b - ref) / ref;
  EXPECT_NEAR(ratio.value, psi_smoothed, 3.0 * ratio.se);
  // The unsmoothed ratio should also be close on this scale.
  EXPECT_NEAR(psi, psi_smoothed, 0.02);
}

TEST(BpRatios, JumpChannelVanishesWhenPsiIsZero) {
  // psi == 0 removes the jump channel from Y; the jump-direction ratio is
  // exactly zero no matter the intensity.
  const auto spec = InsiderSpec::general(
      PiecewiseConstant::constant(1.0, 1.0), {Mark{1.0, 1e-12}},
      {PiecewiseConstant::constant(0.0, 1.0)}, 1.0);
  const double v =
      donsker::general_psi(spec, 0.2, 0.5, ChaosState{0.0, 0.1}, 0);
  EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(BpRatios, DensityFloorGuardsFarTail) {
  const auto bp = InsiderSpec::brownian_poisson(1.0, 0.5, 1.0);
  EXPECT_THROW(donsker::bp_phi(bp, 0.0, 60.0, BpState{}), DensityFloor);
  const auto st = donsker::evaluate(bp, 0.0, 60.0, donsker::PathPoint{});
  EXPECT_FALSE(st.phi.has_value());
  ASSERT_EQ(st.psi_ratio.size(), 1u);
  EXPECT_FALSE(st.psi_ratio[0].has_value());
}

TEST(GeneralChaos, SpecializesToBrownianPoissonBitForBit) {
  const double lambda = 0.7;
  const auto bp = InsiderSpec::brownian_poisson(1.0, lambda, 1.0);
  const auto gen = InsiderSpec::general(
      PiecewiseConstant::constant(1.0, 1.0), {Mark{1.0, lambda}},
      {PiecewiseConstant::constant(1.0, 1.0)}, 1.0);
  const ChaosState state{0.4, -0.3};
  std::mt19937 rng(12u);
  std::uniform_real_distribution<double> ux(-12.0, 12.0);
  for (int i = 0; i < 100; ++i) {
    const double x = ux(rng);
    const auto a = donsker::fourier_base_sample(bp, 0.3, 0.2, state, x);
    const auto b = donsker::fourier_base_sample(gen, 0.3, 0.2, state, x);
    EXPECT_EQ(a.real(), b.real());
    EXPECT_EQ(a.imag(), b.imag());
  }
}

TEST(GeneralChaos, MatchesBpOperations) {
  const double lambda = 0.7;
  const auto bp = InsiderSpec::brownian_poisson(1.0, lambda, 1.0);
  const auto gen = InsiderSpec::general(
      PiecewiseConstant::constant(1.0, 1.0), {Mark{1.0, lambda}},
      {PiecewiseConstant::constant(1.0, 1.0)}, 1.0);
  const BpState bst{-0.3, 0.4};  // brownian_phase = -0.3, jump phase 0.4
  const ChaosState cst{0.4, -0.3};
  const double t = 0.3, y = 0.2;
  EXPECT_NEAR(donsker::general_cond_density(gen, t, y, cst),
              donsker::bp_cond_density(bp, t, y, bst), 1e-8);
  EXPECT_NEAR(donsker::general_phi(gen, t, y, cst),
              donsker::bp_phi(bp, t, y, bst), 1e-8);
  EXPECT_NEAR(donsker::general_psi(gen, t, y, cst, 0),
              donsker::bp_psi(bp, t, y, bst), 1e-8);
}

TEST(GeneralChaos, TwoMarkMeasureNormalizesAndMatchesSimulation) {
  // Marks 1.0 at rate 0.3 and -0.5 at rate 0.2, psi(s, zeta) = zeta.
  const auto gen = InsiderSpec::general(
      PiecewiseConstant::constant(1.0, 1.0),
      {Mark{1.0, 0.3}, Mark{-0.5, 0.2}},
      {PiecewiseConstant::constant(1.0, 1.0),
       PiecewiseConstant::constant(-0.5, 1.0)},
      1.0);
  const auto grid = donsker::default_y_grid(gen);
  const double dy = grid[1] - grid[0];
  double total = 0.0;
  for (double y : grid) {
    total += donsker::general_cond_density(gen, 0.0, y, ChaosState{}) * dy;
  }
  EXPECT_NEAR(total, 1.0, 1e-3);

  const auto samples = oracles::draw_chaos_terminal(
      1.0, 1.0, {{1.0, 0.3}, {-0.5, 0.2}}, 200'000, 4u);
  const double h = oracles::kde_bandwidth(samples);
  auto density = [&](double u) {
    return donsker::general_cond_density(gen, 0.0, u, ChaosState{});
  };
  for (double y : {-0.8, 0.0, 1.2}) {
    const auto kde = oracles::kde_at(samples, y, h);
    const double ref = oracles::smoothed_reference(density, y, h);
    EXPECT_NEAR(kde.value, ref, 3.0 * kde.se) << "y=" << y;
  }
}

TEST(GeneralChaos, PsiRatioSatisfiesTheBumpIdentity) {
  // Adding a jump of mark zeta_k at time t shifts the accumulated jump phase
  // by psi(t, zeta_k), so Psi_k = m(bumped state)/m - 1.
  const auto gen = InsiderSpec::general(
      PiecewiseConstant::constant(1.0, 1.0),
      {Mark{1.0, 0.3}, Mark{-0.5, 0.2}},
      {PiecewiseConstant::constant(1.0, 1.0),
       PiecewiseConstant::constant(-0.5, 1.0)},
      1.0);
  const ChaosState state{0.2, -0.1};
  const double t = 0.3;
  for (double y : {-0.5, 0.4, 1.1}) {
    const double m = donsker::general_cond_density(gen, t, y, state);
    for (std::size_t k = 0; k < 2; ++k) {
      const ChaosState bumped{state.jump_phase + gen.psi_at(k, t),
                              state.brownian_phase};
      const double m_b = donsker::general_cond_density(gen, t, y, bumped);
      const double psi = donsker::general_psi(gen, t, y, state, k);
      EXPECT_NEAR(psi, m_b / m - 1.0, 1e-8) << "y=" << y << " k=" << k;
    }
  }
}

TEST(Martingale, PathAverageOfDensityIsConstantInTime) {
  // M(t, y) is a conditional expectation of a fixed random object, so its
  // path average equals the unconditional density at every t.
  const auto spec = unit_gaussian();
  market::PathSimulator sim(spec, 256, 2024u);
  const std::size_t n_paths = 4000;
  for (double y : {0.0, 1.0}) {
    const double m0 = donsker::gaussian_cond_density(spec, 0.0, y, 0.0);
    for (double t : {0.25, 0.5}) {
      const auto i = sim.grid_index(t);
      std::vector<double> vals(n_paths);
      market::PathBundle buf;
      for (std::size_t p = 0; p < n_paths; ++p) {
        sim.simulate_into(buf, p);
        vals[p] = donsker::gaussian_cond_density(spec, t, y, buf.Y[i]);
      }
      const auto ms = oracles::mean_se(vals);
      EXPECT_NEAR(ms.mean, m0, 3.0 * ms.se) << "t=" << t << " y=" << y;
    }
  }
}

TEST(ImagResidual, StaysBelowToleranceAcrossStatesAndPoints) {
  const auto bp = InsiderSpec::brownian_poisson(1.0, 0.8, 1.0);
  market::PathSimulator sim(bp, 128, 7u);
  market::PathBundle path;
  sim.simulate_into(path, 0);
  for (double t : {0.0, 0.25, 0.5}) {
    const auto i = sim.grid_index(t);
    for (double y : {-2.0, 0.0, 0.5, 2.0}) {
      const auto st = donsker::evaluate(bp, t, y, path.point(i));
      EXPECT_LT(st.imag_residual, 1e-6) << "t=" << t << " y=" << y;
    }
  }
}

TEST(BpBatch, MatchesSingleEvaluations) {
  const auto bp = InsiderSpec::brownian_poisson(1.0, 0.6, 1.0);
  std::vector<BpState> states;
  std::mt19937 rng(3u);
  std::normal_distribution<double> nb(0.0, 0.6);
  for (int i = 0; i < 40; ++i) {
    states.push_back(BpState{nb(rng), nb(rng)});
  }
  const double t = 0.25, y = 0.4;
  const auto batch = donsker::bp_cond_density_batch(bp, t, y, states);
  ASSERT_EQ(batch.size(), states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double single = donsker::bp_cond_density(bp, t, y, states[i]);
    EXPECT_NEAR(batch[i], single, 1e-9 * std::max(1.0, std::abs(single)))
        << "i=" << i;
  }
}

TEST(YGrid, DefaultCoversEightStandardDeviations) {
  const auto bp = InsiderSpec::brownian_poisson(1.0, 1.0, 1.0);
  const auto grid = donsker::default_y_grid(bp);
  ASSERT_EQ(grid.size(), 401u);
  const double sd = bp.unconditional_sd();
  EXPECT_NEAR(sd, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(grid.front(), -8.0 * sd, 1e-12);
  EXPECT_NEAR(grid.back(), 8.0 * sd, 1e-12);
  EXPECT_NEAR(grid[200], 0.0, 1e-12);
}

TEST(InsiderSpecValidation, RejectsBadShapes) {
  EXPECT_THROW(InsiderSpec::gaussian_const(1.0, 0.0), InvalidArgument);
  EXPECT_THROW(InsiderSpec::brownian_poisson(0.0, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(InsiderSpec::brownian_poisson(1.0, 0.0, 1.0), InvalidArgument);
  // Terminal beta cell of zero breaks the remaining-variance requirement.
  EXPECT_THROW(
      InsiderSpec::gaussian(PiecewiseConstant({1.0, 0.0}, 1.0), 1.0),
      InvalidArgument);
  // Mark list with all-zero intensities.
  EXPECT_THROW(
      InsiderSpec::general(PiecewiseConstant::constant(1.0, 1.0),
                           {Mark{1.0, 0.0}},
                           {PiecewiseConstant::constant(1.0, 1.0)}, 1.0),
      InvalidArgument);
}

}  // namespace
