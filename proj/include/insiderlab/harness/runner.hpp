#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "insiderlab/adjoint.hpp"
#include "insiderlab/donsker.hpp"
#include "insiderlab/errors.hpp"
#include "insiderlab/harness/config.hpp"
#include "insiderlab/harness/io.hpp"
#include "insiderlab/market.hpp"
#include "insiderlab/portfolio.hpp"

namespace insiderlab::harness {

using ordered_json = nlohmann::ordered_json;

// Files produced by one experiment, built in memory first so that download
// determinism can be checked without touching the filesystem.
struct RunArtifacts {
  int exit_code = 0;
  std::vector<std::pair<std::string, std::string>> files;  // name -> content
};

inline void write_artifacts(const std::string& out_dir,
                            const RunArtifacts& artifacts) {
  std::filesystem::create_directories(out_dir);
  for (const auto& [name, content] : artifacts.files) {
    write_text_file(std::filesystem::path(out_dir) / name, content);
  }
}

namespace detail {

// Snaps t to the nearest grid node so that the evaluation time and the
// filtration state agree exactly.
inline std::size_t snapped_index(const market::PathBundle& path, double t) {
  auto i = static_cast<std::size_t>(std::llround(t / path.dt()));
  if (i >= path.B.size()) i = path.B.size() - 1;
  return i;
}

inline donsker::PathPoint state_at(const market::PathBundle& path, double t) {
  return path.point(snapped_index(path, t));
}

inline std::vector<double> time_grid(double T, std::size_t points) {
  if (points < 2) throw ConfigError("t_points must be >= 2");
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i) {
    out[i] = T * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return out;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  const auto n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  const double m = s / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, n > 1.5 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

// One row of the policy surface at a fixed filtration state.
inline portfolio::PolicyResult policy_at_state(const InsiderSpec& insider,
                                               const market::MarketSpec& mkt,
                                               double t, double y,
                                               const donsker::PathPoint& pt,
                                               const QuadratureConfig& quad) {
  const double phi = donsker::phi_at(insider, t, y, pt, quad);
  if (insider.marks.empty()) {
    return portfolio::log_pi_brownian(mkt.b0(t, y), mkt.sigma0(t, y), phi);
  }
  std::vector<portfolio::FocMark> fm(insider.marks.size());
  for (std::size_t k = 0; k < insider.marks.size(); ++k) {
    fm[k] = portfolio::FocMark{mkt.gamma0(t, y, insider.marks[k].zeta),
                               insider.marks[k].nu,
                               donsker::psi_at(insider, t, y, pt, k, quad)};
  }
  return portfolio::solve_foc_levy(mkt.b0(t, y), mkt.sigma0(t, y), fm, phi);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// density: tabulate (t, y) -> (m, Phi, Psi_k, imag residual) along the state
// of one seeded scenario.
// ---------------------------------------------------------------------------
inline RunArtifacts run_density(const ExperimentConfig& cfg) {
  const InsiderSpec& insider = cfg.require_insider();
  const MarketConstants& mc = cfg.require_market();
  const auto mkt = mc.build(insider);
  const std::uint64_t seed = cfg.require_seed();

  market::PathSimulator sim(insider, cfg.n_steps, seed);
  sim.grid_index(mkt.T);
  const market::PathBundle path = sim.simulate(0);

  const auto ts = detail::time_grid(mkt.T, cfg.t_points);
  const auto ys =
      donsker::default_y_grid(insider, cfg.y_points, cfg.y_halfwidth_sds);

  std::string csv;
  csv += "t,y,m,phi";
  for (std::size_t k = 0; k < insider.marks.size(); ++k) {
    csv += ",psi_" + std::to_string(k);
  }
  csv += ",imag_residual\n";
  for (double t_req : ts) {
    const auto i = detail::snapped_index(path, t_req);
    const double t = path.grid[i];
    const auto pt = path.point(i);
    for (double y : ys) {
      try {
        const auto st = donsker::evaluate(insider, t, y, pt, cfg.quad);
        csv += g17(t) + "," + g17(y) + "," + g17(st.m) + "," + g17(st.phi);
        for (const auto& psi : st.psi_ratio) csv += "," + g17(psi);
        csv += "," + g17(st.imag_residual) + "\n";
      } catch (const Error& e) {
        throw Error(std::string(e.what()) + " (at t=" + g17(t) +
                    ", y=" + g17(y) + ")");
      }
    }
  }

  RunArtifacts out;
  out.files.emplace_back("density.csv", std::move(csv));
  return out;
}

// ---------------------------------------------------------------------------
// policy: the pi(t, y) surface with diagnostics, at the zero state or along
// a seeded scenario.
// ---------------------------------------------------------------------------
inline RunArtifacts run_policy(const ExperimentConfig& cfg) {
  const InsiderSpec& insider = cfg.require_insider();
  const MarketConstants& mc = cfg.require_market();
  const auto mkt = mc.build(insider);

  market::PathBundle path;
  if (cfg.policy_state_from_path) {
    market::PathSimulator sim(insider, cfg.n_steps, cfg.require_seed());
    sim.grid_index(mkt.T);
    path = sim.simulate(0);
  }

  const auto ts = detail::time_grid(mkt.T, cfg.t_points);
  const auto ys =
      donsker::default_y_grid(insider, cfg.y_points, cfg.y_halfwidth_sds);

  std::string csv =
      "t,y,pi,foc_residual,admissibility_margin,hamiltonian_grad,status\n";
  for (double t_req : ts) {
    double t = t_req;
    donsker::PathPoint pt;
    if (cfg.policy_state_from_path) {
      const auto i = detail::snapped_index(path, t_req);
      t = path.grid[i];
      pt = path.point(i);
    }
    for (double y : ys) {
      std::string row = g17(t) + "," + g17(y) + ",";
      try {
        const auto r = detail::policy_at_state(insider, mkt, t, y, pt, cfg.quad);
        if (r.status == portfolio::SolveStatus::Converged) {
          const auto adj = portfolio::stationary_adjoint(t, y, 1.0, mkt, insider);
          const double grad =
              portfolio::hamiltonian_grad_pi(t, 1.0, y, adj, mkt, insider);
          row += g17(r.pi) + "," + g17(r.foc_residual) + "," +
                 g17(r.admissibility_margin) + "," + g17(grad) + ",converged";
        } else {
          row += "nan,nan,nan,nan,no_solution";
        }
      } catch (const DensityFloor&) {
        row += "nan,nan,nan,nan,density_floor";
      }
      csv += row + "\n";
    }
  }

  RunArtifacts out;
  out.files.emplace_back("policy.csv", std::move(csv));
  return out;
}

// ---------------------------------------------------------------------------
// simulate: insider vs honest-trader terminal wealth across seeded scenarios.
// ---------------------------------------------------------------------------
inline RunArtifacts run_simulate(const ExperimentConfig& cfg) {
  const InsiderSpec& insider = cfg.require_insider();
  const MarketConstants& mc = cfg.require_market();
  const auto mkt = mc.build(insider);
  const std::uint64_t seed = cfg.require_seed();

  market::PathSimulator sim(insider, cfg.n_steps, seed);
  sim.grid_index(mkt.T);
  const auto merton = portfolio::make_merton_policy(insider, mkt);

  std::string csv =
      "path,realized_Y,x_insider,x_merton,ln_x_insider,ln_x_merton\n";
  std::vector<double> ln_ins(cfg.n_paths), ln_mer(cfg.n_paths),
      diff(cfg.n_paths);
  market::PathBundle buf;
  for (std::size_t i = 0; i < cfg.n_paths; ++i) {
    sim.simulate_into(buf, i);
    try {
      const auto insider_policy =
          cfg.simulate_merton_insider
              ? merton
              : portfolio::make_insider_policy(insider, mkt, buf, cfg.quad);
      const double x_ins = market::insider_wealth(buf, insider, mkt, insider_policy);
      const double x_mer = market::insider_wealth(buf, insider, mkt, merton);
      ln_ins[i] = std::log(x_ins);
      ln_mer[i] = std::log(x_mer);
      diff[i] = ln_ins[i] - ln_mer[i];
      csv += std::to_string(i) + "," + g17(buf.realized_Y) + "," + g17(x_ins) +
             "," + g17(x_mer) + "," + g17(ln_ins[i]) + "," + g17(ln_mer[i]) +
             "\n";
    } catch (const AdmissibilityViolation& e) {
      throw AdmissibilityViolation(
          std::string(e.what()) + " (path " + std::to_string(i) + ")", e.time,
          e.mark);
    }
  }

  const auto mi = detail::mean_se(ln_ins);
  const auto mm = detail::mean_se(ln_mer);
  const auto md = detail::mean_se(diff);

  ordered_json summary;
  summary["schema_version"] = 1;
  summary["kind"] = "simulate";
  summary["n_paths"] = cfg.n_paths;
  summary["n_steps"] = cfg.n_steps;
  summary["seed"] = seed;
  summary["insider_policy"] =
      cfg.simulate_merton_insider ? "merton" : "optimal";
  summary["mean_ln_x_insider"] = mi.mean;
  summary["se_ln_x_insider"] = mi.se;
  summary["mean_ln_x_merton"] = mm.mean;
  summary["se_ln_x_merton"] = mm.se;
  summary["advantage"] = md.mean;
  summary["advantage_se"] = md.se;

  RunArtifacts out;
  out.files.emplace_back("simulate_paths.csv", std::move(csv));
  out.files.emplace_back("simulate_summary.json", summary.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// foc: solve one first-order condition from scalar inputs.
// ---------------------------------------------------------------------------
inline RunArtifacts run_foc(const ExperimentConfig& cfg) {
  if (!cfg.foc) throw ConfigError("foc experiment needs a [foc] section");
  const FocInputs& f = *cfg.foc;

  portfolio::PolicyResult r;
  std::vector<portfolio::FocMark> marks;
  double sigma0 = f.sigma0;
  switch (f.family) {
    case FocInputs::Family::Bp: {
      const double psi0 = f.psi.empty() ? 0.0 : f.psi[0];
      marks = {portfolio::FocMark{f.gamma0[0], f.lambda, psi0}};
      r = portfolio::solve_foc_bp(f.b0, f.sigma0, f.gamma0[0], f.lambda, f.phi,
                                  psi0);
      break;
    }
    case FocInputs::Family::Levy: {
      if (f.nu.size() != f.gamma0.size()) {
        throw ConfigError("[foc] levy needs nu with one rate per gamma0");
      }
      for (std::size_t k = 0; k < f.gamma0.size(); ++k) {
        marks.push_back(portfolio::FocMark{
            f.gamma0[k], f.nu[k], k < f.psi.size() ? f.psi[k] : 0.0});
      }
      r = portfolio::solve_foc_levy(f.b0, f.sigma0, marks, f.phi);
      break;
    }
    case FocInputs::Family::PoissonPure: {
      const double psi0 = f.psi.empty() ? 0.0 : f.psi[0];
      marks = {portfolio::FocMark{f.gamma0[0], f.lambda, psi0}};
      sigma0 = 0.0;
      r = portfolio::solve_foc_poisson_pure(f.b0, f.gamma0[0], f.lambda, psi0);
      break;
    }
  }

  ordered_json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "foc";
  doc["family"] = f.family == FocInputs::Family::Bp          ? "bp"
                  : f.family == FocInputs::Family::Levy      ? "levy"
                                                             : "poisson_pure";
  doc["b0"] = f.b0;
  doc["sigma0"] = sigma0;
  doc["phi"] = f.phi;
  doc["status"] = r.status == portfolio::SolveStatus::Converged
                      ? "converged"
                      : "no_solution";
  if (r.status == portfolio::SolveStatus::Converged) {
    doc["pi"] = r.pi;
    doc["foc_residual"] = r.foc_residual;
    doc["admissibility_margin"] = r.admissibility_margin;
    // dH/dpi with the stationarity adjoints (p = 1).
    double grad;
    if (std::abs(sigma0) >= floors::volatility) {
      grad = f.b0 + sigma0 * (-(f.b0 / sigma0));
    } else {
      double denom = 0.0;
      for (const auto& mk : marks) denom += mk.nu * mk.gamma;
      double jump = 0.0;
      for (const auto& mk : marks) jump += mk.nu * mk.gamma * (-f.b0 / denom);
      grad = f.b0 + jump;
    }
    doc["hamiltonian_grad"] = grad;
  } else {
    doc["probe"] = {{"lo", r.probe->lo},
                    {"hi", r.probe->hi},
                    {"f_lo", r.probe->f_lo},
                    {"f_hi", r.probe->f_hi}};
  }

  RunArtifacts out;
  out.files.emplace_back("foc.json", doc.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// solve-c: the initial-adjoint constant c = p(0, y) per requested y.
// ---------------------------------------------------------------------------
inline RunArtifacts run_solve_c(const ExperimentConfig& cfg) {
  const InsiderSpec& insider = cfg.require_insider();
  const MarketConstants& mc = cfg.require_market();
  const auto mkt = mc.build(insider);
  const std::uint64_t seed = cfg.require_seed();

  std::string csv = "y,c,budget_value,budget_se,iterations\n";
  ordered_json rows = ordered_json::array();
  for (double y : cfg.solve_c_y) {
    const auto res = adjoint::solve_c(insider, mkt, cfg.utility, y,
                                      cfg.n_paths, seed, cfg.n_steps, cfg.quad);
    csv += g17(y) + "," + g17(res.c) + "," + g17(res.budget_value) + "," +
           g17(res.budget_se) + "," + std::to_string(res.iterations) + "\n";
    rows.push_back({{"y", y}, {"c", res.c}});
  }

  ordered_json summary;
  summary["schema_version"] = 1;
  summary["kind"] = "solve-c";
  summary["utility"] =
      cfg.utility.kind == adjoint::UtilitySpec::Kind::Log ? "log" : "power";
  if (cfg.utility.kind == adjoint::UtilitySpec::Kind::Power) {
    summary["rho"] = cfg.utility.rho;
  }
  summary["x0"] = mc.x0;
  summary["n_paths"] = cfg.n_paths;
  summary["n_steps"] = cfg.n_steps;
  summary["seed"] = seed;
  summary["results"] = rows;

  RunArtifacts out;
  out.files.emplace_back("solve_c.csv", std::move(csv));
  out.files.emplace_back("solve_c_summary.json", summary.dump(2) + "\n");
  return out;
}

}  // namespace insiderlab::harness
