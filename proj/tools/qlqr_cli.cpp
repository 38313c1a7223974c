#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qlqr/errors.hpp"
#include "qlqr/experiment.hpp"

using namespace qlqr;

namespace {

int load(const std::string& path, const std::optional<std::uint64_t>& seed,
         const std::string& out, ExperimentConfig& cfg) {
  try {
    cfg = load_config(path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  }
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.output_dir = out;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-free LQR by Q-learning with a convex quadratic network"};
  app.require_subcommand(1);

  std::string config_path, out_dir, artifact_dir;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "learn from every initial policy in the config");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_dir, "override the output directory");

  auto* oracle = app.add_subcommand("oracle", "model-based reference gain and value");
  oracle->add_option("config", config_path, "experiment config (JSON)")->required();
  oracle->add_option("--out", out_dir, "override the output directory");

  auto* plots = app.add_subcommand("plots", "emit plot tables from a run directory");
  plots->add_option("dir", artifact_dir, "artifact directory of a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*plots) {
      emit_plot_data(artifact_dir);
      std::cout << "plot data written to " << artifact_dir << "/plots\n";
      return kExitOk;
    }
    ExperimentConfig cfg;
    if (int rc = load(config_path, seed, out_dir, cfg); rc != kExitOk) return rc;
    if (*oracle) return run_oracle(cfg, std::cout);
    return run_experiment(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
