#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "qlqr/csv.hpp"
#include "qlqr/errors.hpp"
#include "qlqr/experiment.hpp"
#include "qlqr/oracle.hpp"

using namespace qlqr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigs = QLQR_CONFIG_DIR;

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("qlqr_test_" + name);
  fs::remove_all(d);
  return d;
}

std::string field_of(const json& j) {
  try {
    validate(ExperimentConfig::from_json(j));
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

// Single-policy quadrotor config started at the Riccati gain; converges in
// one evaluation.
ExperimentConfig quadrotor_from_optimum(const fs::path& out) {
  ExperimentConfig cfg = load_config(kConfigs / "quadrotor.json");
  cfg.initial_policies = {riccati_lqr(plant_of(cfg), cost_of(cfg)).policy.K};
  cfg.output_dir = out;
  return cfg;
}

}  // namespace

TEST(Config, BundledQuadrotor) {
  const ExperimentConfig cfg = load_config(kConfigs / "quadrotor.json");
  EXPECT_NO_THROW(validate(cfg));
  ASSERT_TRUE(cfg.continuous.has_value());
  EXPECT_EQ(cfg.continuous->T, 0.1);
  EXPECT_EQ(cfg.R(0, 0), 100.0);
  EXPECT_EQ(cfg.Q(3, 3), 10.0);
  EXPECT_EQ(cfg.gamma, 1.0);
  EXPECT_EQ(cfg.beta, 0.005);
  EXPECT_EQ(cfg.eval.N, 100);
  ASSERT_EQ(cfg.initial_policies.size(), 5u);
  const auto rows = fx::table_gains();
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(cfg.initial_policies[i], rows[i]);
  EXPECT_EQ(cfg.rollout_x0, (Vec(4) << -10, 0, 0, 0).finished());
  EXPECT_LT((plant_of(cfg).A() - fx::quadrotor().A()).norm(), 1e-15);
}

TEST(Config, BundledScalarAndR1) {
  EXPECT_NO_THROW(validate(load_config(kConfigs / "scalar.json")));
  const ExperimentConfig r1 = load_config(kConfigs / "quadrotor_r1.json");
  EXPECT_NO_THROW(validate(r1));
  EXPECT_EQ(r1.R(0, 0), 1.0);
}

TEST(Config, ErrorsNameTheField) {
  const json base = read_json(kConfigs / "scalar.json");
  EXPECT_EQ(field_of(base), "");

  json j = base;
  j.erase("plant");
  EXPECT_EQ(field_of(j), "/plant");

  j = base;
  j["plant"]["continuous"] = {{"A", 1}, {"B", 1}, {"T", 0.1}};
  EXPECT_EQ(field_of(j), "/plant");

  j = base;
  j["cost"]["Q"] = json::array({json::array({1, 0}), json::array({0})});
  EXPECT_EQ(field_of(j).rfind("/cost/Q", 0), 0u);

  j = base;
  j["cost"]["Q"] = json::array({json::array({1, 0}), json::array({0, 1})});
  EXPECT_EQ(field_of(j), "/cost/Q");

  j = base;
  j["cost"]["R"] = -1;
  EXPECT_EQ(field_of(j), "/cost");

  j = base;
  j["pi"]["probing"]["kind"] = "pink";
  EXPECT_EQ(field_of(j), "/pi/probing/kind");

  j = base;
  j["eval"]["N"] = 2;
  EXPECT_EQ(field_of(j), "/eval/N");

  j = base;
  j["eval"]["epsilon"] = 0;
  EXPECT_EQ(field_of(j), "/eval/epsilon");

  j = base;
  j["qnn"]["backend"] = "magic";
  EXPECT_EQ(field_of(j), "/qnn/backend");

  j = base;
  j["seed"] = -3;
  EXPECT_EQ(field_of(j), "/seed");

  j = base;
  j["initial_policies"] = json::array();
  EXPECT_EQ(field_of(j), "/initial_policies");

  j = base;
  j["initial_policies"][1] = json::array({0.1, 0.2});
  EXPECT_EQ(field_of(j), "/initial_policies/1");
}

TEST(Config, UnstablePolicyStopsBeforeLearning) {
  json j = read_json(kConfigs / "scalar.json");
  // a - bK = 0.5 - 2 = -1.5.
  j["initial_policies"][1] = json::array({2.0});
  const fs::path out = scratch("unstable");
  j["output_dir"] = out.string();
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  try {
    validate(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "/initial_policies/1");
    EXPECT_NE(std::string(e.what()).find("not stabilizing"), std::string::npos);
  }
  std::ostringstream log;
  EXPECT_EQ(run_experiment(cfg, log), kExitValidation);
  EXPECT_NE(log.str().find("/initial_policies/1"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(run_oracle(cfg, log), kExitValidation);
}

TEST(Config, UnreadableFile) {
  EXPECT_THROW(load_config(kConfigs / "does_not_exist.json"), ConfigError);
  const fs::path bad = scratch("bad.json");
  std::ofstream(bad) << "{ \"plant\": ";
  EXPECT_THROW(load_config(bad), ConfigError);
  fs::remove(bad);
}

TEST(Config, EchoRoundTrip) {
  for (const char* name : {"quadrotor.json", "scalar.json", "quadrotor_r1.json"}) {
    const ExperimentConfig cfg = load_config(kConfigs / name);
    const json echo = cfg.to_json();
    const ExperimentConfig back = ExperimentConfig::from_json(echo);
    EXPECT_NO_THROW(validate(back)) << name;
    EXPECT_EQ(back.to_json(), echo) << name;
    EXPECT_EQ(back.Q, cfg.Q);
    EXPECT_EQ(back.seed, cfg.seed);
    EXPECT_EQ(back.pi.probing.amplitude, cfg.pi.probing.amplitude);
  }
}

TEST(Config, PerRunSeedsDiffer) {
  const ExperimentConfig cfg = load_config(kConfigs / "quadrotor.json");
  EXPECT_NE(pi_for_run(cfg, 0).probing.seed, pi_for_run(cfg, 1).probing.seed);
  EXPECT_NE(pi_for_run(cfg, 0).x0_policy.seed, pi_for_run(cfg, 0).probing.seed);
  EXPECT_EQ(pi_for_run(cfg, 2).probing.seed, pi_for_run(cfg, 2).probing.seed);
  EXPECT_NE(eval_for_run(cfg, 0).h0_seed, eval_for_run(cfg, 1).h0_seed);
}

TEST(Experiment, ScalarEndToEnd) {
  ExperimentConfig cfg = load_config(kConfigs / "scalar.json");
  cfg.output_dir = scratch("scalar");
  std::ostringstream log;
  std::vector<RunOutcome> outcomes;
  ASSERT_EQ(run_experiment(cfg, log, &outcomes), kExitOk) << log.str();
  ASSERT_EQ(outcomes.size(), 2u);
  // Positive root of P^2 - P/4 - 1 = 0, K = P / (2 (1 + P)).
  const double P = (0.25 + std::sqrt(0.0625 + 4.0)) / 2.0;
  const double kstar = P / (2.0 * (1.0 + P));
  for (const auto& r : outcomes) {
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.trace.final_gain()(0, 0), 0.2656, 1e-3);
    EXPECT_NEAR(r.trace.final_gain()(0, 0), kstar, 1e-6);
  }
  const json summary = read_json(cfg.output_dir / "summary.json");
  EXPECT_TRUE(summary["all_converged"].get<bool>());
  EXPECT_LT(summary["max_gain_error"].get<double>(), 1e-6);
  EXPECT_NEAR(summary["oracle"]["P"][0][0].get<double>(), P, 1e-10);
  EXPECT_NO_THROW(validate(ExperimentConfig::from_json(summary["config"])));
  for (int i = 0; i < 2; ++i) {
    const fs::path d = cfg.output_dir / ("run_" + std::to_string(i));
    for (const char* f : {"trace.csv", "eval_inner.csv", "rollout.csv", "summary.json"})
      EXPECT_TRUE(fs::exists(d / f)) << d / f;
    const csv::Table trace = csv::read(d / "trace.csv");
    EXPECT_EQ(trace[0], (std::vector<std::string>{"iteration", "k1", "inner_iterations",
                                                  "inner_residual", "gain_error", "stabilizing"}));
    EXPECT_EQ(trace.size(), outcomes[static_cast<std::size_t>(i)].trace.iterations.size() + 1);
    for (std::size_t r = 1; r < trace.size(); ++r) EXPECT_EQ(trace[r][5], "1");
    const csv::Table roll = csv::read(d / "rollout.csv");
    ASSERT_EQ(roll.size(), 22u);
    EXPECT_EQ(roll[1][1], "0");
    EXPECT_EQ(roll[1][2], "1");
    EXPECT_EQ(roll[21][3], "");
  }
}

TEST(Experiment, EchoedConfigReproducesRun) {
  ExperimentConfig cfg = load_config(kConfigs / "scalar.json");
  cfg.output_dir = scratch("echo_a");
  std::ostringstream log;
  ASSERT_EQ(run_experiment(cfg, log), kExitOk);
  ExperimentConfig again =
      ExperimentConfig::from_json(read_json(cfg.output_dir / "summary.json")["config"]);
  again.output_dir = scratch("echo_b");
  ASSERT_EQ(run_experiment(again, log), kExitOk);
  for (int i = 0; i < 2; ++i) {
    const std::string run = "run_" + std::to_string(i);
    EXPECT_EQ(slurp(cfg.output_dir / run / "trace.csv"), slurp(again.output_dir / run / "trace.csv"));
  }
}

TEST(Experiment, DeterministicArtifacts) {
  ExperimentConfig cfg = load_config(kConfigs / "scalar.json");
  std::ostringstream log;
  cfg.output_dir = scratch("det_a");
  ASSERT_EQ(run_experiment(cfg, log), kExitOk);
  const fs::path a = cfg.output_dir;
  cfg.output_dir = scratch("det_b");
  ASSERT_EQ(run_experiment(cfg, log), kExitOk);
  const fs::path b = cfg.output_dir;
  for (int i = 0; i < 2; ++i)
    for (const char* f : {"trace.csv", "eval_inner.csv", "rollout.csv"}) {
      const fs::path rel = fs::path("run_" + std::to_string(i)) / f;
      EXPECT_EQ(slurp(a / rel), slurp(b / rel)) << rel;
      EXPECT_FALSE(slurp(a / rel).empty());
    }
  cfg.seed += 1;
  cfg.output_dir = scratch("det_c");
  ASSERT_EQ(run_experiment(cfg, log), kExitOk);
  EXPECT_NE(slurp(a / "run_0" / "eval_inner.csv"), slurp(cfg.output_dir / "run_0" / "eval_inner.csv"));
}

TEST(Oracle, ScalarValue) {
  ExperimentConfig cfg = load_config(kConfigs / "scalar.json");
  cfg.output_dir = scratch("oracle_scalar");
  std::ostringstream log;
  ASSERT_EQ(run_oracle(cfg, log), kExitOk);
  const json j = read_json(cfg.output_dir / "oracle.json");
  EXPECT_NEAR(j["P"][0][0].get<double>(), 1.13278, 1e-5);
  EXPECT_NEAR(j["gain"][0][0].get<double>(), 0.26556, 1e-5);
  EXPECT_EQ(j["policy_iteration"].size(), 2u);
  EXPECT_LT(j["policy_iteration"][0]["max_gain_error"].get<double>(), 1e-8);
  EXPECT_NE(log.str().find("K* (3 decimals): 0.266"), std::string::npos) << log.str();
}

TEST(Oracle, DiscountedScalarMatchesValueIteration) {
  ExperimentConfig cfg = load_config(kConfigs / "scalar.json");
  cfg.gamma = 0.9;
  cfg.output_dir = scratch("oracle_g09");
  std::ostringstream log;
  ASSERT_EQ(run_oracle(cfg, log), kExitOk);
  const json j = read_json(cfg.output_dir / "oracle.json");
  // p <- q + g a^2 p - (g a b p)^2 / (r + g b^2 p)
  const double a = 0.5, b = 1.0, g = 0.9;
  double p = 0.0;
  for (int i = 0; i < 10000; ++i) p = 1.0 + g * a * a * p - std::pow(g * a * b * p, 2) / (1.0 + g * b * b * p);
  EXPECT_NEAR(j["P"][0][0].get<double>(), p, 1e-10);
  EXPECT_NEAR(j["gain"][0][0].get<double>(), g * a * b * p / (1.0 + g * b * b * p), 1e-10);
}

TEST(Oracle, QuadrotorMatchesRiccati) {
  ExperimentConfig cfg = load_config(kConfigs / "quadrotor.json");
  cfg.output_dir = scratch("oracle_quad");
  std::ostringstream log;
  ASSERT_EQ(run_oracle(cfg, log), kExitOk);
  const json j = read_json(cfg.output_dir / "oracle.json");
  const Mat K = riccati_lqr(fx::quadrotor(), fx::quadrotor_cost()).policy.K;
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(j["gain"][0][i].get<double>(), K(0, i), 1e-12);
  EXPECT_EQ(j["policy_iteration"].size(), 5u);
  for (const auto& run : j["policy_iteration"]) EXPECT_LT(run["max_gain_error"].get<double>(), 1e-8);
}

TEST(Plots, QuadrotorTrajectoryStartsAtInitialState) {
  const fs::path out = scratch("plots_quad");
  const ExperimentConfig cfg = quadrotor_from_optimum(out);
  std::ostringstream log;
  ASSERT_EQ(run_experiment(cfg, log), kExitOk) << log.str();
  emit_plot_data(out);
  const csv::Table traj = csv::read(out / "plots" / "trajectory_run_0.csv");
  EXPECT_EQ(traj[0], (std::vector<std::string>{"t_seconds", "x1", "x2"}));
  ASSERT_EQ(traj.size(), 152u);
  EXPECT_EQ(traj[1], (std::vector<std::string>{"0", "-10", "0"}));
  EXPECT_EQ(std::stod(traj[151][0]), 15.0);
  const csv::Table conv = csv::read(out / "plots" / "convergence_run_0.csv");
  EXPECT_EQ(conv[0], (std::vector<std::string>{"iteration", "k1", "k2", "k3", "k4"}));
  const csv::Table trace = csv::read(out / "run_0" / "trace.csv");
  ASSERT_EQ(conv.size(), trace.size());
  for (std::size_t r = 1; r < conv.size(); ++r)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(conv[r][c], trace[r][c]);
}

TEST(Plots, EmptyTraceGivesHeaderOnly) {
  const fs::path out = scratch("plots_empty");
  fs::create_directories(out / "run_0");
  write_trace_csv(PiTrace{}, out / "run_0" / "trace.csv");
  emit_plot_data(out);
  const csv::Table conv = csv::read(out / "plots" / "convergence_run_0.csv");
  ASSERT_EQ(conv.size(), 1u);
  EXPECT_EQ(conv[0][0], "iteration");
  const csv::Table traj = csv::read(out / "plots" / "trajectory_run_0.csv");
  EXPECT_EQ(traj.size(), 1u);
}

TEST(Plots, MissingArtifactsAreReported) {
  const fs::path out = scratch("plots_missing");
  try {
    emit_plot_data(out);
    FAIL() << "expected Error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("file not found"), std::string::npos);
  }
  fs::create_directories(out);
  EXPECT_THROW(emit_plot_data(out), Error);
}

TEST(Csv, ShortestRoundTrip) {
  EXPECT_EQ(csv::format(0.5), "0.5");
  EXPECT_EQ(csv::format(0.1), "0.1");
  EXPECT_EQ(csv::format(-10.0), "-10");
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> ex(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(mant(rng), ex(rng));
    const std::string s = csv::format(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
    EXPECT_LE(s.size(), 24u);
  }
}

TEST(Csv, WriteReadRoundTrip) {
  const fs::path p = scratch("table.csv");
  {
    csv::Writer w(p, {"a", "b", "c"});
    w.add(1.25).add(static_cast<long long>(7)).add_empty().end_row();
    w.add(-0.0).add(std::string("x")).add(1e-300).end_row();
    w.close();
  }
  const csv::Table t = csv::read(p);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[1], (std::vector<std::string>{"1.25", "7", ""}));
  EXPECT_EQ(t[2][1], "x");
  EXPECT_EQ(std::stod(t[2][2]), 1e-300);
  fs::remove(p);
}

TEST(Cli, ExitCodes) {
  const std::string cli = QLQR_CLI;
  json j = read_json(kConfigs / "scalar.json");
  j["initial_policies"][0] = json::array({2.0});
  const fs::path bad = scratch("cli_unstable.json");
  std::ofstream(bad) << j.dump(2);
  auto code = [](const std::string& cmd) {
    const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  EXPECT_EQ(code(cli + " run " + bad.string()), 1);
  EXPECT_EQ(code(cli + " oracle " + bad.string()), 1);
  EXPECT_EQ(code(cli + " run " + (kConfigs / "nope.json").string()), 1);
  EXPECT_EQ(code(cli + " plots " + scratch("cli_nothing").string()), 2);
  const fs::path out = scratch("cli_scalar");
  EXPECT_EQ(code(cli + " run " + (kConfigs / "scalar.json").string() + " --seed 3 --out " + out.string()), 0);
  EXPECT_EQ(read_json(out / "summary.json")["seed"].get<std::uint64_t>(), 3u);
  EXPECT_EQ(code(cli + " plots " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "plots" / "convergence_run_1.csv"));
  fs::remove(bad);
}
