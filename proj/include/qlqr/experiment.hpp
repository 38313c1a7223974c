#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlqr/lti.hpp"
#include "qlqr/qlearn.hpp"
#include "qlqr/qnn.hpp"

namespace qlqr {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

struct ExperimentConfig {
  std::optional<ContinuousStateSpace> continuous;
  std::optional<Mat> discrete_A, discrete_B;
  double sample_time = 1.0;  // used for time axes; equals T when continuous

  Mat Q, R;
  double gamma = 1.0;

  double beta = 0.005;
  SolverConfig solver;
  bool least_squares_backend = false;

  EvalConfig eval;
  PiConfig pi;

  std::vector<Mat> initial_policies;
  Vec rollout_x0;
  int rollout_steps = 150;

  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Checks dimensions, cost definiteness and that every initial policy is
/// stabilizing. Throws ConfigError naming the offending field.
void validate(const ExperimentConfig& cfg);

StateSpace plant_of(const ExperimentConfig& cfg);
CostParams cost_of(const ExperimentConfig& cfg);

/// Per-run seeds derived from the experiment seed.
EvalConfig eval_for_run(const ExperimentConfig& cfg, int run);
PiConfig pi_for_run(const ExperimentConfig& cfg, int run);

struct RunOutcome {
  int index = 0;
  bool converged = false;
  std::string error;
  PiTrace trace;
  double wall_seconds = 0.0;
};

/// Learns from every initial policy (in parallel) and writes
/// <out>/run_<i>/{trace,eval_inner,rollout}.csv, run summaries and
/// <out>/summary.json. Returns kExitOk iff every run converged.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log,
                   std::vector<RunOutcome>* outcomes = nullptr);

/// Model-based reference: K*, P* and the model-based policy iteration from
/// every initial policy. Writes <out>/oracle.json.
int run_oracle(const ExperimentConfig& cfg, std::ostream& log);

/// Per-run plot tables in <dir>/plots: convergence_run_<i>.csv
/// (iteration, k1..kp) and trajectory_run_<i>.csv (t_seconds, x1, x2).
void emit_plot_data(const std::filesystem::path& artifact_dir);

void write_trace_csv(const PiTrace& trace, const std::filesystem::path& path);
void write_inner_csv(const PiTrace& trace, const std::filesystem::path& path);

}  // namespace qlqr
