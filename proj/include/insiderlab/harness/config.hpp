#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "insiderlab/adjoint.hpp"
#include "insiderlab/errors.hpp"
#include "insiderlab/insider_spec.hpp"
#include "insiderlab/market.hpp"
#include "insiderlab/quadrature.hpp"

namespace insiderlab::harness {

enum class ExperimentKind { Density, Policy, Simulate, Foc, SolveC, Verify };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Density: return "density";
    case ExperimentKind::Policy: return "policy";
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::Foc: return "foc";
    case ExperimentKind::SolveC: return "solve-c";
    case ExperimentKind::Verify: return "verify";
  }
  return "?";
}

inline ExperimentKind kind_from_string(const std::string& s) {
  if (s == "density") return ExperimentKind::Density;
  if (s == "policy") return ExperimentKind::Policy;
  if (s == "simulate") return ExperimentKind::Simulate;
  if (s == "foc") return ExperimentKind::Foc;
  if (s == "solve-c" || s == "solve_c") return ExperimentKind::SolveC;
  if (s == "verify") return ExperimentKind::Verify;
  throw ConfigError("unknown experiment kind: " + s);
}

// Constant market coefficients as given in the config file. The library
// works with general (t, y) fields; the file format pins constants.
struct MarketConstants {
  double b0 = 0.0;
  double sigma0 = 0.0;
  std::vector<double> gamma0_by_mark;  // aligned with insider marks
  double x0 = 1.0;
  double T = 0.0;

  market::MarketSpec build(const InsiderSpec& insider) const {
    market::MarketSpec m;
    m.b0 = market::constant_field(b0);
    m.sigma0 = market::constant_field(sigma0);
    std::vector<std::pair<double, double>> table;
    for (std::size_t k = 0; k < insider.marks.size(); ++k) {
      table.emplace_back(insider.marks[k].zeta,
                         k < gamma0_by_mark.size() ? gamma0_by_mark[k] : 0.0);
    }
    m.gamma0 = [table](double, double, double zeta) {
      for (const auto& [z, g] : table) {
        if (std::abs(z - zeta) <= 1e-12 * std::max(1.0, std::abs(z))) return g;
      }
      return 0.0;
    };
    m.x0 = x0;
    m.T = T;
    m.validate(insider);
    return m;
  }
};

struct FocInputs {
  enum class Family { Bp, Levy, PoissonPure };
  Family family = Family::Bp;
  double b0 = 0.0;
  double sigma0 = 0.0;
  double lambda = 0.0;
  double phi = 0.0;
  std::vector<double> gamma0;
  std::vector<double> nu;
  std::vector<double> psi;
};

struct ExperimentConfig {
  std::optional<ExperimentKind> kind;
  std::optional<InsiderSpec> insider;
  std::optional<MarketConstants> market;
  adjoint::UtilitySpec utility = adjoint::UtilitySpec::log_utility();
  QuadratureConfig quad;

  std::size_t n_steps = 2048;
  std::size_t y_points = 401;
  double y_halfwidth_sds = 8.0;
  std::size_t t_points = 5;

  std::size_t n_paths = 2000;
  std::optional<std::uint64_t> seed;  // mandatory: no entropy default

  bool simulate_merton_insider = false;  // zero-edge override
  bool policy_state_from_path = false;
  std::optional<FocInputs> foc;
  std::vector<double> solve_c_y{0.0};

  std::string out_dir = "out";

  const InsiderSpec& require_insider() const {
    if (!insider) throw ConfigError("this experiment needs an [insider] section");
    return *insider;
  }
  const MarketConstants& require_market() const {
    if (!market) throw ConfigError("this experiment needs a [market] section");
    return *market;
  }
  std::uint64_t require_seed() const {
    if (!seed) throw ConfigError("a seed is mandatory: set [mc] seed or --seed");
    return *seed;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse number '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse integer '" + v + "'");
  }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    const std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline std::vector<double> to_list(const std::string& key,
                                   const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

// "zeta:nu, zeta:nu, ..."
inline std::vector<Mark> to_marks(const std::string& v) {
  std::vector<Mark> out;
  for (const auto& item : split(v, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) {
      throw ConfigError("marks: expected 'zeta:nu' pairs, got '" + item + "'");
    }
    out.push_back(Mark{to_double("marks", parts[0]), to_double("marks", parts[1])});
  }
  return out;
}

}  // namespace detail

// Plain-text nested key-value config: [section] headers, key = value lines,
// '#' comments. Unknown sections or keys are hard errors.
struct RawConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static RawConfig parse_string(const std::string& text) {
    RawConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw ConfigError("line " + std::to_string(line_no) +
                            ": unterminated section header");
        }
        section = detail::trim(line.substr(1, line.size() - 2));
        if (section.empty()) {
          throw ConfigError("line " + std::to_string(line_no) +
                            ": empty section name");
        }
        cfg.sections[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": expected 'key = value'");
      }
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      }
      auto& sec = cfg.sections[section];
      if (sec.count(key)) {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": duplicate key '" + key + "'");
      }
      sec[key] = value;
    }
    return cfg;
  }

  static RawConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
  }
};

namespace detail {

inline void check_known_keys(const RawConfig& raw) {
  static const std::map<std::string, std::set<std::string>> known = {
      {"", {"schema_version"}},
      {"run", {"kind"}},
      {"insider", {"kind", "T0", "beta", "lambda", "marks", "psi"}},
      {"market", {"b0", "sigma0", "gamma0", "x0", "T"}},
      {"utility", {"kind", "rho"}},
      {"grids",
       {"n_steps", "y_points", "y_halfwidth_sds", "t_points", "quad_rel_tol",
        "quad_abs_tol", "quad_max_panels", "quad_truncation_eps"}},
      {"mc", {"n_paths", "seed"}},
      {"simulate", {"insider_policy"}},
      {"policy", {"state"}},
      {"foc",
       {"family", "b0", "sigma0", "gamma0", "lambda", "phi", "psi", "nu"}},
      {"solve_c", {"y_values"}},
      {"output", {"dir"}},
  };
  for (const auto& [section, keys] : raw.sections) {
    const auto it = known.find(section);
    if (it == known.end()) {
      throw ConfigError("unknown config section [" + section + "]");
    }
    for (const auto& [key, value] : keys) {
      if (it->second.count(key)) continue;
      // per-mark psi tables: psi_0, psi_1, ...
      if (section == "insider" && key.rfind("psi_", 0) == 0) continue;
      throw ConfigError("unknown key '" + key + "' in section [" + section +
                        "]");
    }
  }
}

inline InsiderSpec build_insider(
    const std::map<std::string, std::string>& sec) {
  const auto get = [&](const std::string& k) -> const std::string& {
    const auto it = sec.find(k);
    if (it == sec.end()) {
      throw ConfigError("[insider] missing required key '" + k + "'");
    }
    return it->second;
  };
  const std::string kind = get("kind");
  const double T0 = to_double("T0", get("T0"));
  const auto beta_vals = to_list("beta", get("beta"));
  if (kind == "gaussian") {
    return InsiderSpec::gaussian(PiecewiseConstant(beta_vals, T0), T0);
  }
  if (kind == "brownian_poisson") {
    if (beta_vals.size() != 1) {
      throw ConfigError("[insider] brownian_poisson needs a constant beta");
    }
    return InsiderSpec::brownian_poisson(beta_vals[0],
                                         to_double("lambda", get("lambda")), T0);
  }
  if (kind == "general_chaos") {
    const auto marks = to_marks(get("marks"));
    std::vector<PiecewiseConstant> psi;
    for (std::size_t k = 0; k < marks.size(); ++k) {
      const std::string per_mark = "psi_" + std::to_string(k);
      if (sec.count(per_mark)) {
        psi.emplace_back(to_list(per_mark, sec.at(per_mark)), T0);
      } else if (sec.count("psi")) {
        psi.emplace_back(to_list("psi", sec.at("psi")), T0);
      } else {
        throw ConfigError("[insider] general_chaos needs 'psi' or 'psi_k'");
      }
    }
    return InsiderSpec::general(PiecewiseConstant(beta_vals, T0), marks,
                                std::move(psi), T0);
  }
  throw ConfigError("[insider] unknown kind '" + kind + "'");
}

}  // namespace detail

inline ExperimentConfig build_experiment(const RawConfig& raw) {
  detail::check_known_keys(raw);

  const auto top = raw.sections.find("");
  if (top == raw.sections.end() || !top->second.count("schema_version")) {
    throw ConfigError("config must declare schema_version = 1 at the top");
  }
  if (detail::to_u64("schema_version", top->second.at("schema_version")) != 1) {
    throw ConfigError("unsupported schema_version (expected 1)");
  }

  ExperimentConfig cfg;
  const auto sec = [&](const std::string& name)
      -> const std::map<std::string, std::string>* {
    const auto it = raw.sections.find(name);
    return it == raw.sections.end() ? nullptr : &it->second;
  };

  if (const auto* run = sec("run"); run && run->count("kind")) {
    cfg.kind = kind_from_string(run->at("kind"));
  }
  if (const auto* ins = sec("insider")) {
    cfg.insider = detail::build_insider(*ins);
  }
  if (const auto* mkt = sec("market")) {
    MarketConstants m;
    const auto get = [&](const char* k) -> const std::string& {
      const auto it = mkt->find(k);
      if (it == mkt->end()) {
        throw ConfigError(std::string("[market] missing required key '") + k +
                          "'");
      }
      return it->second;
    };
    m.b0 = detail::to_double("b0", get("b0"));
    m.sigma0 = detail::to_double("sigma0", get("sigma0"));
    m.x0 = detail::to_double("x0", get("x0"));
    m.T = detail::to_double("T", get("T"));
    if (mkt->count("gamma0")) {
      m.gamma0_by_mark = detail::to_list("gamma0", mkt->at("gamma0"));
    }
    if (cfg.insider) {
      const std::size_t n_marks = cfg.insider->marks.size();
      if (n_marks == 0) {
        m.gamma0_by_mark.clear();  // no jump channel to couple to
      } else if (m.gamma0_by_mark.empty()) {
        m.gamma0_by_mark.assign(n_marks, 0.0);
      } else if (m.gamma0_by_mark.size() == 1 && n_marks > 1) {
        m.gamma0_by_mark.assign(n_marks, m.gamma0_by_mark[0]);
      } else if (m.gamma0_by_mark.size() != n_marks) {
        throw ConfigError("[market] gamma0 list must match the insider marks");
      }
    }
    cfg.market = m;
  }
  if (const auto* ut = sec("utility")) {
    const std::string kind = ut->count("kind") ? ut->at("kind") : "log";
    if (kind == "log") {
      cfg.utility = adjoint::UtilitySpec::log_utility();
    } else if (kind == "power") {
      if (!ut->count("rho")) throw ConfigError("[utility] power needs rho");
      cfg.utility =
          adjoint::UtilitySpec::power(detail::to_double("rho", ut->at("rho")));
    } else {
      throw ConfigError("[utility] unknown kind '" + kind + "'");
    }
  }
  if (const auto* g = sec("grids")) {
    if (g->count("n_steps"))
      cfg.n_steps = detail::to_u64("n_steps", g->at("n_steps"));
    if (g->count("y_points"))
      cfg.y_points = detail::to_u64("y_points", g->at("y_points"));
    if (g->count("y_halfwidth_sds"))
      cfg.y_halfwidth_sds =
          detail::to_double("y_halfwidth_sds", g->at("y_halfwidth_sds"));
    if (g->count("t_points"))
      cfg.t_points = detail::to_u64("t_points", g->at("t_points"));
    if (g->count("quad_rel_tol"))
      cfg.quad.rel_tol = detail::to_double("quad_rel_tol", g->at("quad_rel_tol"));
    if (g->count("quad_abs_tol"))
      cfg.quad.abs_tol = detail::to_double("quad_abs_tol", g->at("quad_abs_tol"));
    if (g->count("quad_max_panels"))
      cfg.quad.max_panels = static_cast<int>(
          detail::to_u64("quad_max_panels", g->at("quad_max_panels")));
    if (g->count("quad_truncation_eps"))
      cfg.quad.truncation_eps =
          detail::to_double("quad_truncation_eps", g->at("quad_truncation_eps"));
    cfg.quad.validate();
  }
  if (const auto* mc = sec("mc")) {
    if (mc->count("n_paths"))
      cfg.n_paths = detail::to_u64("n_paths", mc->at("n_paths"));
    if (mc->count("seed")) cfg.seed = detail::to_u64("seed", mc->at("seed"));
  }
  if (const auto* sim = sec("simulate")) {
    if (sim->count("insider_policy")) {
      const std::string v = sim->at("insider_policy");
      if (v == "merton") cfg.simulate_merton_insider = true;
      else if (v == "optimal") cfg.simulate_merton_insider = false;
      else throw ConfigError("[simulate] insider_policy must be optimal|merton");
    }
  }
  if (const auto* pol = sec("policy")) {
    if (pol->count("state")) {
      const std::string v = pol->at("state");
      if (v == "path") cfg.policy_state_from_path = true;
      else if (v == "zero") cfg.policy_state_from_path = false;
      else throw ConfigError("[policy] state must be zero|path");
    }
  }
  if (const auto* foc = sec("foc")) {
    FocInputs f;
    const auto get = [&](const char* k) -> const std::string& {
      const auto it = foc->find(k);
      if (it == foc->end()) {
        throw ConfigError(std::string("[foc] missing required key '") + k + "'");
      }
      return it->second;
    };
    const std::string family = get("family");
    if (family == "bp") f.family = FocInputs::Family::Bp;
    else if (family == "levy") f.family = FocInputs::Family::Levy;
    else if (family == "poisson_pure") f.family = FocInputs::Family::PoissonPure;
    else throw ConfigError("[foc] family must be bp|levy|poisson_pure");
    f.b0 = detail::to_double("b0", get("b0"));
    if (foc->count("sigma0"))
      f.sigma0 = detail::to_double("sigma0", foc->at("sigma0"));
    if (foc->count("lambda"))
      f.lambda = detail::to_double("lambda", foc->at("lambda"));
    if (foc->count("phi")) f.phi = detail::to_double("phi", foc->at("phi"));
    f.gamma0 = detail::to_list("gamma0", get("gamma0"));
    if (foc->count("psi")) f.psi = detail::to_list("psi", foc->at("psi"));
    if (foc->count("nu")) f.nu = detail::to_list("nu", foc->at("nu"));
    cfg.foc = f;
  }
  if (const auto* sc = sec("solve_c")) {
    if (sc->count("y_values"))
      cfg.solve_c_y = detail::to_list("y_values", sc->at("y_values"));
  }
  if (const auto* out = sec("output")) {
    if (out->count("dir")) cfg.out_dir = out->at("dir");
  }
  return cfg;
}

}  // namespace insiderlab::harness
