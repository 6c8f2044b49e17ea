#include "insiderlab/portfolio.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace {

using namespace insiderlab;
using portfolio::FocMark;
using portfolio::PolicyResult;
using portfolio::SolveStatus;

// Dense scan + bisection, independent of the production solver.
double bisection_oracle(double b0, double sigma0,
                        const std::vector<FocMark>& marks, double phi,
                        double lo, double hi) {
  auto f = [&](double pi) {
    return portfolio::foc_value(b0, sigma0, marks, phi, pi);
  };
  const int n = 1'000'000;
  const double h = (hi - lo) / n;
  double a = lo, fa = f(a);
  double root = NAN;
  for (int i = 1; i <= n; ++i) {
    const double b = lo + i * h;
    const double fb = f(b);
    if ((fa < 0.0) != (fb < 0.0)) {
      double x0 = a, x1 = b, f0 = fa;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (x0 + x1);
        const double fm = f(mid);
        if ((f0 < 0.0) == (fm < 0.0)) {
          x0 = mid;
          f0 = fm;
        } else {
          x1 = mid;
        }
      }
      root = 0.5 * (x0 + x1);
      break;
    }
    a = b;
    fa = fb;
  }
  return root;
}

TEST(LogPolicy, MertonRatioWithoutInformation) {
  const auto r = portfolio::log_pi_brownian(0.08, 0.2, 0.0);
  EXPECT_DOUBLE_EQ(r.pi, 2.0);
  EXPECT_EQ(r.status, SolveStatus::Converged);
}

TEST(LogPolicy, InsiderTermAddsOnTop) {
  // b0/sigma0^2 + Phi/sigma0 with Y = B(T0), s = 0, B(T0) = 0.5:
  // 0.1/0.04 + 0.5/0.2 = 5.0.
  const double phi = (0.5 - 0.0) / 1.0;
  const auto r = portfolio::log_pi_brownian(0.1, 0.2, phi);
  EXPECT_DOUBLE_EQ(r.pi, 5.0);
}

TEST(LogPolicy, MaximizesLogGrowthObjective) {
  const double b0 = 0.1, s0 = 0.25, phi = 0.4;
  const auto r = portfolio::log_pi_brownian(b0, s0, phi);
  const int n = 10'000;
  const double lo = r.pi - 2.0, hi = r.pi + 2.0;
  double best = lo;
  double best_v = -1e300;
  for (int i = 0; i <= n; ++i) {
    const double pi = lo + (hi - lo) * i / n;
    const double v = portfolio::log_growth_objective(b0, s0, {}, phi, pi);
    if (v > best_v) {
      best_v = v;
      best = pi;
    }
  }
  EXPECT_NEAR(best, r.pi, (hi - lo) / n + 1e-12);
}

TEST(LogPolicy, RejectsDegenerateVolatility) {
  EXPECT_THROW(portfolio::log_pi_brownian(0.1, 0.0, 0.0), DegenerateVolatility);
  EXPECT_THROW(portfolio::log_pi_brownian(0.1, 1e-13, 0.0),
               DegenerateVolatility);
}

TEST(FocBrownianPoisson, ZeroIsRootWhenMarketIsFlat) {
  const auto r = portfolio::solve_foc_bp(0.0, 0.2, 0.3, 0.5, 0.0, 0.0);
  EXPECT_EQ(r.status, SolveStatus::Converged);
  EXPECT_NEAR(r.pi, 0.0, 1e-12);
  EXPECT_LT(r.foc_residual, 1e-10);
}

TEST(FocBrownianPoisson, TinyJumpMatchesBrownianClosedForm) {
  for (double phi : {0.0, 0.3, -0.2}) {
    const auto jump = portfolio::solve_foc_bp(0.05, 0.2, 1e-8, 0.1, phi, 0.0);
    const auto brown = portfolio::log_pi_brownian(0.05, 0.2, phi);
    EXPECT_NEAR(jump.pi, brown.pi, 1e-5) << "phi=" << phi;
  }
}

TEST(FocBrownianPoisson, MatchesBisectionOracle) {
  const double b0 = 0.05, s0 = 0.2, g0 = 0.3, lam = 0.1;
  const auto r = portfolio::solve_foc_bp(b0, s0, g0, lam, 0.0, 0.0);
  const double oracle = bisection_oracle(
      b0, s0, {FocMark{g0, lam, 0.0}}, 0.0, -1.0 / g0 + 1e-9, -1.0 / g0 + 20.0);
  EXPECT_NEAR(r.pi, oracle, 1e-8);
  EXPECT_LT(r.foc_residual, 1e-10);
  EXPECT_GT(r.admissibility_margin, 0.0);
}

TEST(FocBrownianPoisson, RandomParametersAgainstOracle) {
  std::mt19937 rng(2718u);
  std::uniform_real_distribution<double> ub(-0.1, 0.1), us(0.05, 0.4),
      ug(-0.5, 0.5), ul(0.05, 2.0), uphi(-0.5, 0.5), upsi(-0.3, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    const double b0 = ub(rng), s0 = us(rng), lam = ul(rng);
    double g0 = ug(rng);
    if (std::abs(g0) < 0.05) g0 = 0.05;
    const double phi = uphi(rng), psi = upsi(rng);
    const auto r = portfolio::solve_foc_bp(b0, s0, g0, lam, phi, psi);
    ASSERT_EQ(r.status, SolveStatus::Converged) << "trial " << trial;
    const double lo = g0 > 0.0 ? -1.0 / g0 + 1e-9 : -40.0;
    const double hi = g0 > 0.0 ? lo + 80.0 : -1.0 / g0 - 1e-9;
    const double oracle =
        bisection_oracle(b0, s0, {FocMark{g0, lam, psi}}, phi, lo, hi);
    ASSERT_FALSE(std::isnan(oracle)) << "trial " << trial;
    EXPECT_NEAR(r.pi, oracle, 1e-8) << "trial " << trial;
    EXPECT_LT(r.foc_residual, 1e-10);
  }
}

TEST(FocLevy, SingleMarkEqualsBrownianPoisson) {
  const auto a = portfolio::solve_foc_bp(0.03, 0.15, 0.2, 0.3, 0.1, 0.05);
  const auto b = portfolio::solve_foc_levy(0.03, 0.15,
                                           {FocMark{0.2, 0.3, 0.05}}, 0.1);
  EXPECT_DOUBLE_EQ(a.pi, b.pi);
}

TEST(FocLevy, AllZeroJumpCoefficientsReduceToBrownian) {
  const auto r = portfolio::solve_foc_levy(
      0.04, 0.2, {FocMark{0.0, 0.3, 0.0}, FocMark{0.0, 0.2, 0.0}}, 0.15);
  const auto brown = portfolio::log_pi_brownian(0.04, 0.2, 0.15);
  EXPECT_NEAR(r.pi, brown.pi, 1e-8);
}

TEST(FocLevy, TwoMarkMeasureMatchesBisectionOracle) {
  const std::vector<FocMark> marks{FocMark{0.2, 0.3, 0.0},
                                   FocMark{-0.1, 0.2, 0.0}};
  const auto r = portfolio::solve_foc_levy(0.03, 0.15, marks, 0.0);
  // Admissible bracket: (-1/0.2, 1/0.1) = (-5, 10).
  const double oracle = bisection_oracle(0.03, 0.15, marks, 0.0, -5.0 + 1e-9,
                                         10.0 - 1e-9);
  EXPECT_NEAR(r.pi, oracle, 1e-8);
}

TEST(FocLevy, RejectsFullyDegenerateMarket) {
  EXPECT_THROW(portfolio::solve_foc_levy(0.1, 0.0, {FocMark{0.0, 0.5, 0.0}}, 0.0),
               DegenerateMarket);
}

TEST(FocPoissonPure, ZeroDriftGivesZeroPolicy) {
  const auto r = portfolio::solve_foc_poisson_pure(0.0, 0.5, 2.0, 0.0);
  EXPECT_NEAR(r.pi, 0.0, 1e-12);
}

TEST(FocPoissonPure, MatchesBisectionOracle) {
  const auto r = portfolio::solve_foc_poisson_pure(0.2, 0.5, 2.0, 0.0);
  const double oracle = bisection_oracle(
      0.2, 0.0, {FocMark{0.5, 2.0, 0.0}}, 0.0, -2.0 + 1e-9, 18.0);
  EXPECT_NEAR(r.pi, oracle, 1e-8);
}

TEST(FocPoissonPure, PositiveInformationRaisesTheRoot) {
  const auto base = portfolio::solve_foc_poisson_pure(0.2, 0.5, 2.0, 0.0);
  const auto informed = portfolio::solve_foc_poisson_pure(0.2, 0.5, 2.0, 0.1);
  EXPECT_GT(informed.pi, base.pi);
}

TEST(FocPoissonPure, RejectsInvalidRegime) {
  EXPECT_THROW(portfolio::solve_foc_poisson_pure(1.5, 0.5, 2.0, 0.0),
               InvalidRegime);
  EXPECT_THROW(portfolio::solve_foc_poisson_pure(0.1, 0.0, 2.0, 0.0),
               DegenerateMarket);
}

TEST(FocSolver, ReportsNoSolutionWithProbes) {
  // 1 + Psi < 0 makes the boundary term diverge to -inf, so the decreasing
  // condition has no admissible root for a large drift.
  const auto r = portfolio::solve_foc_levy(-5.0, 0.0, {FocMark{0.5, 0.1, -2.0}},
                                           0.0);
  EXPECT_EQ(r.status, SolveStatus::NoSolution);
  ASSERT_TRUE(r.probe.has_value());
  EXPECT_LT(r.probe->f_lo, 0.0);
  EXPECT_LT(r.probe->f_hi, 0.0);
}

TEST(Hamiltonian, LinearFormAndGradient) {
  const auto insider = InsiderSpec::gaussian_const(1.0, 1.0);
  market::MarketSpec m;
  m.b0 = market::constant_field(0.1);
  m.sigma0 = market::constant_field(0.0);
  m.gamma0 = market::constant_jump_field(0.0);
  m.x0 = 1.0;
  m.T = 0.5;
  portfolio::AdjointState adj{1.0, 0.0, {}};
  donsker::DensityState density;
  for (double pi : {-1.0, 0.0, 0.7, 3.0}) {
    EXPECT_NEAR(portfolio::hamiltonian(0.1, 2.0, 0.0, pi, adj, m, insider,
                                       density),
                0.2 * pi, 1e-15);
  }
  EXPECT_NEAR(portfolio::hamiltonian_grad_pi(0.1, 2.0, 0.0, adj, m, insider),
              0.2, 1e-15);
}

TEST(Hamiltonian, BrownianAdjointRelationKillsTheGradient) {
  const auto insider = InsiderSpec::gaussian_const(1.0, 1.0);
  market::MarketSpec m;
  m.b0 = market::constant_field(0.12);
  m.sigma0 = market::constant_field(0.3);
  m.gamma0 = market::constant_jump_field(0.0);
  m.x0 = 1.0;
  m.T = 0.5;
  const auto adj = portfolio::stationary_adjoint(0.2, 0.1, 1.7, m, insider);
  EXPECT_NEAR(adj.q, -(0.12 / 0.3) * 1.7, 1e-15);
  EXPECT_LT(std::abs(portfolio::hamiltonian_grad_pi(0.2, 3.0, 0.1, adj, m,
                                                    insider)),
            1e-14);
}

TEST(Hamiltonian, PoissonAdjointRelationKillsTheGradient) {
  const auto insider = InsiderSpec::brownian_poisson(1.0, 2.0, 1.0);
  market::MarketSpec m;
  m.b0 = market::constant_field(0.12);
  m.sigma0 = market::constant_field(0.0);
  m.gamma0 = market::constant_jump_field(0.4);
  m.x0 = 1.0;
  m.T = 0.5;
  const auto adj = portfolio::stationary_adjoint(0.2, 0.1, 1.3, m, insider);
  // r = -(b0/(lambda gamma0)) p.
  EXPECT_NEAR(adj.r[0], -(0.12 / (2.0 * 0.4)) * 1.3, 1e-15);
  EXPECT_LT(std::abs(portfolio::hamiltonian_grad_pi(0.2, 3.0, 0.1, adj, m,
                                                    insider)),
            1e-14);
}

TEST(Stationarity, HoldsAtEveryFocSolution) {
  const auto insider = InsiderSpec::brownian_poisson(1.0, 0.5, 1.0);
  std::mt19937 rng(99u);
  std::uniform_real_distribution<double> ub(-0.1, 0.1), us(0.1, 0.4),
      ug(0.05, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const double b0 = ub(rng), s0 = us(rng), g0 = ug(rng);
    const auto r = portfolio::solve_foc_bp(b0, s0, g0, 0.5, 0.0, 0.0);
    ASSERT_EQ(r.status, SolveStatus::Converged);
    market::MarketSpec m;
    m.b0 = market::constant_field(b0);
    m.sigma0 = market::constant_field(s0);
    m.gamma0 = market::constant_jump_field(g0);
    m.x0 = 1.0;
    m.T = 0.5;
    const auto adj = portfolio::stationary_adjoint(0.1, 0.0, 1.0, m, insider);
    const double grad =
        portfolio::hamiltonian_grad_pi(0.1, 1.0, 0.0, adj, m, insider);
    EXPECT_LT(std::abs(grad), 1e-10) << "trial " << trial;
  }
}

TEST(Concavity, ObjectiveIsStrictlyConcaveOnAdmissibleRange) {
  std::mt19937 rng(7u);
  std::uniform_real_distribution<double> ub(-0.1, 0.1), us(0.0, 0.4),
      ug(-0.5, 0.5), ul(0.05, 2.0), upsi(-0.5, 0.5), upi(0.0, 1.0);
  for (int cse = 0; cse < 20; ++cse) {
    const double b0 = ub(rng), s0 = us(rng), lam = ul(rng);
    double g0 = ug(rng);
    if (std::abs(g0) < 0.05) g0 = 0.05;
    const double psi = upsi(rng);
    const std::vector<FocMark> marks{FocMark{g0, lam, psi}};
    if (s0 == 0.0 && g0 == 0.0) continue;
    const double lo = g0 > 0.0 ? -1.0 / g0 : -20.0;
    const double hi = g0 > 0.0 ? 20.0 : -1.0 / g0;
    for (int i = 0; i < 100; ++i) {
      const double u = upi(rng);
      const double pi = lo + (hi - lo) * (0.001 + 0.998 * u);
      const double second =
          portfolio::foc_second_derivative(b0, s0, marks, 0.0, pi);
      EXPECT_LT(second, 0.0) << "case " << cse << " pi " << pi;
    }
  }
}

TEST(Concavity, RootMatchesGridArgmax) {
  const double b0 = 0.05, s0 = 0.2, g0 = 0.3, lam = 0.4, psi = 0.1, phi = 0.2;
  const auto r = portfolio::solve_foc_bp(b0, s0, g0, lam, phi, psi);
  const std::vector<FocMark> marks{FocMark{g0, lam, psi}};
  const int n = 10'000;
  const double lo = -1.0 / g0 + 1e-6, hi = 12.0;
  double best = lo, best_v = -1e300;
  for (int i = 0; i <= n; ++i) {
    const double pi = lo + (hi - lo) * i / n;
    const double v = portfolio::log_growth_objective(b0, s0, marks, phi, pi);
    if (v > best_v) {
      best_v = v;
      best = pi;
    }
  }
  EXPECT_NEAR(best, r.pi, (hi - lo) / n + 1e-12);
}

TEST(MertonReduction, PolicyIsContinuousInTheInformationRatios) {
  const double b0 = 0.05, s0 = 0.2, g0 = 0.3, lam = 0.1;
  const double pi0 = portfolio::solve_foc_bp(b0, s0, g0, lam, 0.0, 0.0).pi;
  const double kC = 100.0;
  for (double eps : {1e-3, 1e-6}) {
    const double pi_eps =
        portfolio::solve_foc_bp(b0, s0, g0, lam, eps, eps).pi;
    EXPECT_LE(std::abs(pi_eps - pi0), kC * eps) << "eps=" << eps;
  }
}

TEST(ScaleInvariance, PolicyDoesNotDependOnInitialWealth) {
  const auto insider = InsiderSpec::brownian_poisson(1.0, 0.5, 1.0);
  market::MarketSpec m1;
  m1.b0 = market::constant_field(0.05);
  m1.sigma0 = market::constant_field(0.2);
  m1.gamma0 = market::constant_jump_field(0.2);
  m1.x0 = 1.0;
  m1.T = 0.5;
  market::MarketSpec m100 = m1;
  m100.x0 = 100.0;
  market::PathSimulator sim(insider, 128, 55u);
  const auto path = sim.simulate(0);
  const auto p1 = portfolio::make_insider_policy(insider, m1, path);
  const auto p100 = portfolio::make_insider_policy(insider, m100, path);
  for (double t : {0.0, 0.25, 0.4998}) {
    for (double y : {-1.0, 0.0, 1.5}) {
      EXPECT_EQ(p1(t, y), p100(t, y));
    }
  }
}

}  // namespace
