// insiderlab command line: seeded, file-driven experiments around the
// insider-portfolio library. Every subcommand reads one config file and
// writes CSV/JSON artifacts into the output directory.
//
// Exit codes: 0 success, 1 invariant failure (verify), 2 configuration
// error, 3 numerical error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "insiderlab/harness/config.hpp"
#include "insiderlab/harness/runner.hpp"
#include "insiderlab/harness/verify.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<std::string> out_dir;
};

int run(insiderlab::harness::ExperimentKind kind, const CliOptions& opt) {
  using namespace insiderlab;
  using namespace insiderlab::harness;
  try {
    const RawConfig raw = RawConfig::parse_file(opt.config_path);
    ExperimentConfig cfg = build_experiment(raw);
    if (cfg.kind && *cfg.kind != kind) {
      throw ConfigError(std::string("config declares kind '") +
                        to_string(*cfg.kind) + "' but subcommand is '" +
                        to_string(kind) + "'");
    }
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.paths) cfg.n_paths = *opt.paths;
    if (opt.out_dir) cfg.out_dir = *opt.out_dir;

    const RunArtifacts artifacts = run_experiment(kind, cfg);
    write_artifacts(cfg.out_dir, artifacts);
    for (const auto& [name, content] : artifacts.files) {
      std::cout << "wrote " << cfg.out_dir << "/" << name << " ("
                << content.size() << " bytes)\n";
    }
    return artifacts.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "insiderlab: conditional densities, optimal insider portfolios, and "
      "seeded jump-diffusion experiments"};
  app.require_subcommand(1);

  CliOptions opt;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "experiment config file")
        ->required();
    sub->add_option("--seed", opt.seed, "override [mc] seed");
    sub->add_option("--paths", opt.paths, "override [mc] n_paths");
    sub->add_option("--out", opt.out_dir, "override [output] dir");
  };

  using insiderlab::harness::ExperimentKind;
  struct SubDef {
    const char* name;
    const char* help;
    ExperimentKind kind;
  };
  const SubDef defs[] = {
      {"density", "tabulate the conditional density surface", ExperimentKind::Density},
      {"policy", "tabulate the optimal policy surface", ExperimentKind::Policy},
      {"simulate", "insider vs honest-trader wealth Monte Carlo", ExperimentKind::Simulate},
      {"foc", "solve one first-order condition", ExperimentKind::Foc},
      {"solve-c", "solve the budget constraint for c = p(0,y)", ExperimentKind::SolveC},
      {"verify", "run the invariant suite", ExperimentKind::Verify},
  };
  for (const auto& def : defs) {
    add_common(app.add_subcommand(def.name, def.help));
  }

  CLI11_PARSE(app, argc, argv);

  for (const auto& def : defs) {
    if (app.get_subcommand(def.name)->parsed()) return run(def.kind, opt);
  }
  return 2;
}
