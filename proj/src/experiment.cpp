#include "qlqr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "qlqr/csv.hpp"
#include "qlqr/errors.hpp"
#include "qlqr/oracle.hpp"

namespace qlqr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---- JSON <-> Eigen -------------------------------------------------------

double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
  return v;
}

// Nested row-major arrays; a bare number is a 1x1 matrix. With
// `flat_is_row`, a flat array is read as a single row.
Mat matrix_at(const json& j, const std::string& path, bool flat_is_row = false) {
  if (j.is_number()) {
    Mat m(1, 1);
    m(0, 0) = number_at(j, path);
    return m;
  }
  if (!j.is_array() || j.empty())
    throw ConfigError(path, "expected a non-empty array of rows");
  if (j.front().is_number()) {
    if (!flat_is_row) throw ConfigError(path, "expected nested rows");
    Mat m(1, static_cast<Eigen::Index>(j.size()));
    for (std::size_t c = 0; c < j.size(); ++c)
      m(0, static_cast<Eigen::Index>(c)) =
          number_at(j[c], path + "/" + std::to_string(c));
    return m;
  }
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw ConfigError(path, "rows must be non-empty arrays");
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string rp = path + "/" + std::to_string(r);
    if (!j[r].is_array() || j[r].size() != cols)
      throw ConfigError(rp, "ragged matrix row");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number_at(j[r][c], rp + "/" + std::to_string(c));
  }
  return m;
}

Vec vector_at(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw ConfigError(path, "expected a non-empty array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = number_at(j[i], path + "/" + std::to_string(i));
  return v;
}

json matrix_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <class T>
T get_or(const json& j, const char* key, const std::string& path, T fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  try {
    return v->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "/" + key, "wrong type");
  }
}

ProbeKind probe_kind(const std::string& s, const std::string& path) {
  if (s == "gaussian") return ProbeKind::gaussian;
  if (s == "uniform") return ProbeKind::uniform;
  if (s == "sinusoid_mix" || s == "sinusoid-mix") return ProbeKind::sinusoid_mix;
  throw ConfigError(path, "unknown probing kind '" + s + "'");
}

const char* probe_kind_name(ProbeKind k) {
  switch (k) {
    case ProbeKind::gaussian:
      return "gaussian";
    case ProbeKind::uniform:
      return "uniform";
    case ProbeKind::sinusoid_mix:
      return "sinusoid_mix";
  }
  return "gaussian";
}

std::string gain_label(int i) { return "k" + std::to_string(i + 1); }

std::vector<double> flatten(const Mat& K) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index j = 0; j < K.cols(); ++j) v.push_back(K(i, j));
  return v;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

// ---- config ---------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  ExperimentConfig c;

  const json* plant = find(j, "plant");
  if (!plant || !plant->is_object())
    throw ConfigError("/plant", "missing plant section");
  const json* cont = find(*plant, "continuous");
  const json* disc = find(*plant, "discrete");
  if ((cont != nullptr) == (disc != nullptr))
    throw ConfigError("/plant",
                      "exactly one of 'continuous' or 'discrete' is required");
  if (cont) {
    ContinuousStateSpace cs;
    if (!find(*cont, "A") || !find(*cont, "B") || !find(*cont, "T"))
      throw ConfigError("/plant/continuous", "A, B and T are required");
    cs.Ac = matrix_at((*cont)["A"], "/plant/continuous/A");
    cs.Bc = matrix_at((*cont)["B"], "/plant/continuous/B");
    cs.T = number_at((*cont)["T"], "/plant/continuous/T");
    c.sample_time = cs.T;
    c.continuous = std::move(cs);
  } else {
    if (!find(*disc, "A") || !find(*disc, "B"))
      throw ConfigError("/plant/discrete", "A and B are required");
    c.discrete_A = matrix_at((*disc)["A"], "/plant/discrete/A");
    c.discrete_B = matrix_at((*disc)["B"], "/plant/discrete/B");
    if (const json* T = find(*disc, "T"))
      c.sample_time = number_at(*T, "/plant/discrete/T");
  }

  const json* cost = find(j, "cost");
  if (!cost || !find(*cost, "Q") || !find(*cost, "R"))
    throw ConfigError("/cost", "Q and R are required");
  c.Q = matrix_at((*cost)["Q"], "/cost/Q");
  c.R = matrix_at((*cost)["R"], "/cost/R");
  c.gamma = find(*cost, "gamma") ? number_at((*cost)["gamma"], "/cost/gamma") : 1.0;

  if (const json* q = find(j, "qnn")) {
    c.beta = get_or<double>(*q, "beta", "/qnn", c.beta);
    c.solver.tol = get_or<double>(*q, "tol", "/qnn", c.solver.tol);
    c.solver.max_iter = get_or<int>(*q, "max_iter", "/qnn", c.solver.max_iter);
    const std::string backend = get_or<std::string>(*q, "backend", "/qnn", "sdp");
    if (backend == "least_squares") c.least_squares_backend = true;
    else if (backend != "sdp")
      throw ConfigError("/qnn/backend", "expected 'sdp' or 'least_squares'");
  }

  if (const json* e = find(j, "eval")) {
    c.eval.epsilon = get_or<double>(*e, "epsilon", "/eval", c.eval.epsilon);
    c.eval.N = get_or<int>(*e, "N", "/eval", c.eval.N);
    c.eval.max_inner = get_or<int>(*e, "max_inner", "/eval", c.eval.max_inner);
    c.eval.episode_length =
        get_or<int>(*e, "episode_length", "/eval", c.eval.episode_length);
    const std::string h0 = get_or<std::string>(*e, "h0_init", "/eval", "zero");
    if (h0 == "zero") c.eval.h0_init = H0Init::zero;
    else if (h0 == "random_psd") c.eval.h0_init = H0Init::random_psd;
    else throw ConfigError("/eval/h0_init", "expected 'zero' or 'random_psd'");
    const std::string rs =
        get_or<std::string>(*e, "resample", "/eval", "fresh_each_sweep");
    if (rs == "fresh_each_sweep") c.eval.resample = Resample::fresh_each_sweep;
    else if (rs == "fixed_dataset") c.eval.resample = Resample::fixed_dataset;
    else
      throw ConfigError("/eval/resample",
                        "expected 'fresh_each_sweep' or 'fixed_dataset'");
  }

  bool amplitude_given = false;
  if (const json* p = find(j, "pi")) {
    c.pi.outer_epsilon = get_or<double>(*p, "outer_epsilon", "/pi", c.pi.outer_epsilon);
    c.pi.max_outer = get_or<int>(*p, "max_outer", "/pi", c.pi.max_outer);
    c.pi.divergence_horizon =
        get_or<int>(*p, "divergence_horizon", "/pi", c.pi.divergence_horizon);
    if (const json* pr = find(*p, "probing")) {
      if (const json* a = find(*pr, "amplitude")) {
        c.pi.probing.amplitude = number_at(*a, "/pi/probing/amplitude");
        amplitude_given = true;
      }
      c.pi.probing.kind = probe_kind(
          get_or<std::string>(*pr, "kind", "/pi/probing", "gaussian"),
          "/pi/probing/kind");
    }
    if (const json* x0 = find(*p, "x0_policy")) {
      const std::string kind =
          get_or<std::string>(*x0, "kind", "/pi/x0_policy", "random_ball");
      if (kind == "random_ball") {
        c.pi.x0_policy.kind = InitialStatePolicy::Kind::random_ball;
        c.pi.x0_policy.radius =
            get_or<double>(*x0, "radius", "/pi/x0_policy", 1.0);
      } else if (kind == "fixed") {
        c.pi.x0_policy.kind = InitialStatePolicy::Kind::fixed;
        if (!find(*x0, "x0"))
          throw ConfigError("/pi/x0_policy/x0", "required for kind 'fixed'");
        c.pi.x0_policy.x0 = vector_at((*x0)["x0"], "/pi/x0_policy/x0");
        c.pi.x0_policy.radius = c.pi.x0_policy.x0.norm();
      } else {
        throw ConfigError("/pi/x0_policy/kind",
                          "expected 'random_ball' or 'fixed'");
      }
    }
  }
  if (!amplitude_given)
    c.pi.probing.amplitude = 1e-2 * c.pi.x0_policy.radius;

  const json* pols = find(j, "initial_policies");
  if (!pols || !pols->is_array() || pols->empty())
    throw ConfigError("/initial_policies", "at least one gain is required");
  for (std::size_t i = 0; i < pols->size(); ++i)
    c.initial_policies.push_back(matrix_at(
        (*pols)[i], "/initial_policies/" + std::to_string(i), true));

  if (const json* r = find(j, "rollout")) {
    if (const json* x0 = find(*r, "x0")) c.rollout_x0 = vector_at(*x0, "/rollout/x0");
    c.rollout_steps = get_or<int>(*r, "steps", "/rollout", c.rollout_steps);
  }

  if (const json* s = find(j, "seed")) {
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0))
      throw ConfigError("/seed", "expected a non-negative integer");
    c.seed = s->get<std::uint64_t>();
  }
  c.output_dir = get_or<std::string>(j, "output_dir", "", "out");
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  if (continuous) {
    j["plant"]["continuous"] = {{"A", matrix_json(continuous->Ac)},
                                {"B", matrix_json(continuous->Bc)},
                                {"T", continuous->T}};
  } else {
    j["plant"]["discrete"] = {{"A", matrix_json(*discrete_A)},
                              {"B", matrix_json(*discrete_B)},
                              {"T", sample_time}};
  }
  j["cost"] = {{"Q", matrix_json(Q)}, {"R", matrix_json(R)}, {"gamma", gamma}};
  j["qnn"] = {{"beta", beta},
              {"tol", solver.tol},
              {"max_iter", solver.max_iter},
              {"backend", least_squares_backend ? "least_squares" : "sdp"}};
  j["eval"] = {{"epsilon", eval.epsilon},
               {"N", eval.N},
               {"max_inner", eval.max_inner},
               {"episode_length", eval.episode_length},
               {"h0_init", eval.h0_init == H0Init::zero ? "zero" : "random_psd"},
               {"resample", eval.resample == Resample::fresh_each_sweep
                                ? "fresh_each_sweep"
                                : "fixed_dataset"}};
  json x0;
  if (pi.x0_policy.kind == InitialStatePolicy::Kind::fixed)
    x0 = {{"kind", "fixed"}, {"x0", vector_json(pi.x0_policy.x0)}};
  else
    x0 = {{"kind", "random_ball"}, {"radius", pi.x0_policy.radius}};
  j["pi"] = {{"outer_epsilon", pi.outer_epsilon},
             {"max_outer", pi.max_outer},
             {"divergence_horizon", pi.divergence_horizon},
             {"probing",
              {{"amplitude", pi.probing.amplitude},
               {"kind", probe_kind_name(pi.probing.kind)}}},
             {"x0_policy", x0}};
  j["initial_policies"] = json::array();
  for (const auto& K : initial_policies)
    j["initial_policies"].push_back(matrix_json(K));
  j["rollout"]["steps"] = rollout_steps;
  if (rollout_x0.size()) j["rollout"]["x0"] = vector_json(rollout_x0);
  j["seed"] = seed;
  j["output_dir"] = output_dir.string();
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("parse error: ") + e.what());
  }
  return ExperimentConfig::from_json(j);
}

StateSpace plant_of(const ExperimentConfig& cfg) {
  try {
    if (cfg.continuous) return tustin_discretize(*cfg.continuous);
    return StateSpace(*cfg.discrete_A, *cfg.discrete_B);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("/plant", e.what());
  }
}

CostParams cost_of(const ExperimentConfig& cfg) {
  try {
    return CostParams(cfg.Q, cfg.R, cfg.gamma);
  } catch (const Error& e) {
    throw ConfigError("/cost", e.what());
  }
}

void validate(const ExperimentConfig& cfg) {
  const StateSpace ss = plant_of(cfg);
  if (cfg.Q.rows() != ss.nx() || cfg.Q.cols() != ss.nx())
    throw ConfigError("/cost/Q", "must be nx x nx");
  if (cfg.R.rows() != ss.nu() || cfg.R.cols() != ss.nu())
    throw ConfigError("/cost/R", "must be nu x nu");
  cost_of(cfg);
  if (!(cfg.sample_time > 0.0))
    throw ConfigError("/plant", "sample time must be > 0");
  if (!(cfg.beta >= 0.0)) throw ConfigError("/qnn/beta", "must be >= 0");
  if (!(cfg.solver.tol > 0.0)) throw ConfigError("/qnn/tol", "must be > 0");
  if (cfg.solver.max_iter < 1) throw ConfigError("/qnn/max_iter", "must be >= 1");
  if (!(cfg.eval.epsilon > 0.0)) throw ConfigError("/eval/epsilon", "must be > 0");
  if (cfg.eval.max_inner < 1) throw ConfigError("/eval/max_inner", "must be >= 1");
  if (cfg.eval.episode_length < 1)
    throw ConfigError("/eval/episode_length", "must be >= 1");
  const int M = required_samples(ss.nx(), ss.nu());
  if (cfg.eval.N < M)
    throw ConfigError("/eval/N", "must be at least M = " + std::to_string(M));
  if (!(cfg.pi.outer_epsilon > 0.0))
    throw ConfigError("/pi/outer_epsilon", "must be > 0");
  if (cfg.pi.max_outer < 1) throw ConfigError("/pi/max_outer", "must be >= 1");
  if (!(cfg.pi.probing.amplitude >= 0.0))
    throw ConfigError("/pi/probing/amplitude", "must be >= 0");
  if (cfg.pi.x0_policy.kind == InitialStatePolicy::Kind::fixed) {
    if (cfg.pi.x0_policy.x0.size() != ss.nx())
      throw ConfigError("/pi/x0_policy/x0", "must have nx entries");
  } else if (!(cfg.pi.x0_policy.radius > 0.0)) {
    throw ConfigError("/pi/x0_policy/radius", "must be > 0");
  }
  if (cfg.rollout_x0.size() && cfg.rollout_x0.size() != ss.nx())
    throw ConfigError("/rollout/x0", "must have nx entries");
  if (cfg.rollout_steps < 1) throw ConfigError("/rollout/steps", "must be >= 1");
  for (std::size_t i = 0; i < cfg.initial_policies.size(); ++i) {
    const std::string path = "/initial_policies/" + std::to_string(i);
    const Mat& K = cfg.initial_policies[i];
    if (K.rows() != ss.nu() || K.cols() != ss.nx())
      throw ConfigError(path, "gain must be nu x nx");
    const LinearPolicy pol{K};
    if (!is_stabilizing(ss, pol))
      throw ConfigError(path, "initial policy is not stabilizing (closed-loop "
                              "spectral radius " +
                                  csv::format(closed_loop_radius(ss, pol)) + ")");
  }
}

EvalConfig eval_for_run(const ExperimentConfig& cfg, int run) {
  EvalConfig e = cfg.eval;
  e.h0_seed = mix_seed(cfg.seed, 3 * static_cast<std::uint64_t>(run) + 3);
  return e;
}

PiConfig pi_for_run(const ExperimentConfig& cfg, int run) {
  PiConfig p = cfg.pi;
  p.probing.seed = mix_seed(cfg.seed, 3 * static_cast<std::uint64_t>(run) + 1);
  p.x0_policy.seed = mix_seed(cfg.seed, 3 * static_cast<std::uint64_t>(run) + 2);
  return p;
}

// ---- artifacts --------------------------------------------------------------

void write_trace_csv(const PiTrace& trace, const fs::path& path) {
  int p = 0;
  if (!trace.iterations.empty())
    p = static_cast<int>(trace.iterations.front().K.size());
  std::vector<std::string> header{"iteration"};
  for (int i = 0; i < p; ++i) header.push_back(gain_label(i));
  for (const char* h : {"inner_iterations", "inner_residual", "gain_error", "stabilizing"})
    header.emplace_back(h);
  csv::Writer w(path, header);
  for (const auto& row : trace.iterations) {
    w.add(static_cast<long long>(row.index));
    for (double k : flatten(row.K)) w.add(k);
    w.add(static_cast<long long>(row.inner_iterations));
    if (row.inner_residuals.empty()) w.add_empty();
    else w.add(row.inner_residuals.back());
    if (row.gain_error) w.add(*row.gain_error);
    else w.add_empty();
    if (row.stabilizing) w.add(static_cast<long long>(*row.stabilizing ? 1 : 0));
    else w.add_empty();
    w.end_row();
  }
  w.close();
}

void write_inner_csv(const PiTrace& trace, const fs::path& path) {
  csv::Writer w(path, {"outer_iteration", "inner_iteration", "residual"});
  for (const auto& row : trace.iterations)
    for (std::size_t i = 0; i < row.inner_residuals.size(); ++i)
      w.add(static_cast<long long>(row.index))
          .add(static_cast<long long>(i + 1))
          .add(row.inner_residuals[i])
          .end_row();
  w.close();
}

namespace {

Vec rollout_start(const ExperimentConfig& cfg, int nx) {
  if (cfg.rollout_x0.size() == nx) return cfg.rollout_x0;
  Vec x = Vec::Zero(nx);
  x(0) = cfg.pi.x0_policy.radius;
  return x;
}

void write_rollout_csv(const StateSpace& ss, const Mat& K,
                       const ExperimentConfig& cfg, const fs::path& path) {
  const Trajectory tr =
      rollout(ss, LinearPolicy{K}, rollout_start(cfg, ss.nx()), cfg.rollout_steps);
  std::vector<std::string> header{"k", "t_seconds"};
  for (int i = 0; i < ss.nx(); ++i) header.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < ss.nu(); ++i) header.push_back("u" + std::to_string(i + 1));
  csv::Writer w(path, header);
  for (std::size_t k = 0; k <= tr.size(); ++k) {
    const bool last = k == tr.size();
    const Vec& x = last ? tr.back().x_next : tr[k].x;
    w.add(static_cast<long long>(k)).add(static_cast<double>(k) * cfg.sample_time);
    for (Eigen::Index i = 0; i < x.size(); ++i) w.add(x(i));
    for (int i = 0; i < ss.nu(); ++i) {
      if (last) w.add_empty();
      else w.add(tr[k].u(i));
    }
    w.end_row();
  }
  w.close();
}

json run_summary_json(const RunOutcome& r, const Mat& Kstar,
                      const ExperimentConfig& cfg) {
  json j;
  j["run"] = r.index;
  j["converged"] = r.converged;
  j["seed"] = cfg.seed;
  if (!r.error.empty()) j["error"] = r.error;
  j["initial_gain"] = matrix_json(cfg.initial_policies[static_cast<std::size_t>(r.index)]);
  j["outer_iterations"] =
      r.trace.iterations.empty() ? 0 : static_cast<int>(r.trace.iterations.size()) - 1;
  int inner = 0;
  for (const auto& row : r.trace.iterations) inner += row.inner_iterations;
  j["inner_iterations_total"] = inner;
  j["wall_seconds"] = r.wall_seconds;
  if (!r.trace.iterations.empty()) {
    const Mat& K = r.trace.final_gain();
    j["final_gain"] = matrix_json(K);
    j["oracle_gain"] = matrix_json(Kstar);
    const Mat err = (K - Kstar).cwiseAbs();
    j["gain_error"] = matrix_json(err);
    j["max_gain_error"] = err.maxCoeff();
  }
  return j;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, std::ostream& log,
                   std::vector<RunOutcome>* outcomes) {
  try {
    validate(cfg);
  } catch (const ConfigError& e) {
    log << "validation failed: " << e.what() << "\n";
    return kExitValidation;
  }
  const StateSpace ss = plant_of(cfg);
  const CostParams cp = cost_of(cfg);
  LqrSolution star;
  try {
    star = riccati_lqr(ss, cp);
  } catch (const Error& e) {
    log << "oracle failed: " << e.what() << "\n";
    return kExitRuntime;
  }
  const Mat Kstar = star.policy.K;

  fs::create_directories(cfg.output_dir);
  const int runs = static_cast<int>(cfg.initial_policies.size());
  std::vector<RunOutcome> results(static_cast<std::size_t>(runs));
  std::vector<std::string> io_errors(static_cast<std::size_t>(runs));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < runs; ++i) {
    RunOutcome& out = results[static_cast<std::size_t>(i)];
    out.index = i;
    const auto t0 = std::chrono::steady_clock::now();
    const SimulatedPlant plant(ss);
    std::unique_ptr<QFunctionTrainer> trainer;
    if (cfg.least_squares_backend) trainer = std::make_unique<LeastSquaresTrainer>();
    else trainer = std::make_unique<SdpTrainer>(cfg.beta, cfg.solver);
    const TraceAnnotator annotate = [&](PiIteration& row) {
      row.gain_error = (row.K - Kstar).cwiseAbs().maxCoeff();
      row.stabilizing = is_stabilizing(ss, LinearPolicy{row.K});
    };
    try {
      out.trace = run_policy_iteration(
          plant, LinearPolicy{cfg.initial_policies[static_cast<std::size_t>(i)]},
          cp, eval_for_run(cfg, i), pi_for_run(cfg, i), *trainer, annotate);
      out.converged = out.trace.converged;
      if (!out.converged) out.error = "outer iteration cap reached";
    } catch (const PolicyIterationError& e) {
      out.trace = e.partial_trace();
      out.error = e.what();
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    try {
      const fs::path dir = cfg.output_dir / ("run_" + std::to_string(i));
      fs::create_directories(dir);
      write_trace_csv(out.trace, dir / "trace.csv");
      write_inner_csv(out.trace, dir / "eval_inner.csv");
      if (!out.trace.iterations.empty())
        write_rollout_csv(ss, out.trace.final_gain(), cfg, dir / "rollout.csv");
      write_json(dir / "summary.json", run_summary_json(out, Kstar, cfg));
    } catch (const std::exception& e) {
      io_errors[static_cast<std::size_t>(i)] = e.what();
    }
  }

  bool all_ok = true;
  double worst = 0.0;
  json summary;
  summary["config"] = cfg.to_json();
  summary["seed"] = cfg.seed;
  summary["oracle"] = {{"gain", matrix_json(Kstar)}, {"P", matrix_json(star.value.P)}};
  summary["runs"] = json::array();
  for (const auto& r : results) {
    const bool ok = r.converged && io_errors[static_cast<std::size_t>(r.index)].empty();
    all_ok = all_ok && ok;
    json rj = run_summary_json(r, Kstar, cfg);
    if (!io_errors[static_cast<std::size_t>(r.index)].empty())
      rj["io_error"] = io_errors[static_cast<std::size_t>(r.index)];
    if (rj.contains("max_gain_error"))
      worst = std::max(worst, rj["max_gain_error"].get<double>());
    summary["runs"].push_back(std::move(rj));
    log << "run " << r.index << ": " << (ok ? "converged" : "FAILED");
    if (!r.trace.iterations.empty()) {
      log << " after " << r.trace.iterations.size() - 1 << " outer iterations, K =";
      for (double k : flatten(r.trace.final_gain())) log << " " << csv::format(k);
      log << ", max |K - K*| = "
          << csv::format((r.trace.final_gain() - Kstar).cwiseAbs().maxCoeff());
    }
    if (!r.error.empty()) log << " (" << r.error << ")";
    log << "\n";
  }
  summary["max_gain_error"] = worst;
  summary["all_converged"] = all_ok;
  write_json(cfg.output_dir / "summary.json", summary);
  if (outcomes) *outcomes = std::move(results);
  return all_ok ? kExitOk : kExitRuntime;
}

int run_oracle(const ExperimentConfig& cfg, std::ostream& log) {
  try {
    validate(cfg);
  } catch (const ConfigError& e) {
    log << "validation failed: " << e.what() << "\n";
    return kExitValidation;
  }
  const StateSpace ss = plant_of(cfg);
  const CostParams cp = cost_of(cfg);
  try {
    const LqrSolution star = riccati_lqr(ss, cp);
    json j;
    j["A"] = matrix_json(ss.A());
    j["B"] = matrix_json(ss.B());
    j["gain"] = matrix_json(star.policy.K);
    j["P"] = matrix_json(star.value.P);
    j["riccati_iterations"] = star.iterations;
    j["policy_iteration"] = json::array();
    std::ostringstream gain3;
    gain3 << std::fixed << std::setprecision(3);
    for (double k : flatten(star.policy.K)) gain3 << " " << k;
    log << "K* (3 decimals):" << gain3.str() << "\n";
    log << "K* =";
    for (double k : flatten(star.policy.K)) log << " " << csv::format(k);
    log << "\n";
    for (std::size_t i = 0; i < cfg.initial_policies.size(); ++i) {
      const auto seq = model_policy_iteration(
          ss, cp, LinearPolicy{cfg.initial_policies[i]}, cfg.pi.max_outer,
          cfg.pi.outer_epsilon);
      json runs = json::array();
      for (const auto& pol : seq) runs.push_back(matrix_json(pol.K));
      const double err = (seq.back().K - star.policy.K).cwiseAbs().maxCoeff();
      j["policy_iteration"].push_back(
          {{"initial_policy", static_cast<int>(i)},
           {"gains", runs},
           {"max_gain_error", err}});
      log << "policy " << i << ": " << seq.size() - 1
          << " model-based iterations, max |K - K*| = " << csv::format(err) << "\n";
    }
    fs::create_directories(cfg.output_dir);
    write_json(cfg.output_dir / "oracle.json", j);
  } catch (const Error& e) {
    log << "oracle failed: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

void emit_plot_data(const fs::path& artifact_dir) {
  if (!fs::is_directory(artifact_dir))
    throw Error("file not found: " + artifact_dir.string());
  std::vector<std::pair<int, fs::path>> runs;
  for (const auto& entry : fs::directory_iterator(artifact_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && name.rfind("run_", 0) == 0) {
      try {
        runs.emplace_back(std::stoi(name.substr(4)), entry.path());
      } catch (const std::exception&) {
      }
    }
  }
  if (runs.empty())
    throw Error("file not found: no run_<i> directories in " + artifact_dir.string());
  std::sort(runs.begin(), runs.end());
  const fs::path plots = artifact_dir / "plots";
  fs::create_directories(plots);
  for (const auto& [index, dir] : runs) {
    const csv::Table trace = csv::read(dir / "trace.csv");
    if (trace.empty()) throw Error("empty trace file in " + dir.string());
    std::vector<std::string> header{"iteration"};
    std::vector<std::size_t> cols{0};
    for (std::size_t c = 0; c < trace[0].size(); ++c)
      if (trace[0][c].size() > 1 && trace[0][c][0] == 'k' &&
          std::all_of(trace[0][c].begin() + 1, trace[0][c].end(),
                      [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
        header.push_back(trace[0][c]);
        cols.push_back(c);
      }
    csv::Writer conv(plots / ("convergence_run_" + std::to_string(index) + ".csv"), header);
    for (std::size_t r = 1; r < trace.size(); ++r) {
      for (std::size_t c : cols) conv.add(trace[r].at(c));
      conv.end_row();
    }
    conv.close();

    const fs::path rollout_path = dir / "rollout.csv";
    if (!fs::exists(rollout_path)) {
      // A run with an empty trace has no rollout; emit header only.
      csv::Writer traj(plots / ("trajectory_run_" + std::to_string(index) + ".csv"),
                       {"t_seconds", "x1", "x2"});
      traj.close();
      continue;
    }
    const csv::Table roll = csv::read(rollout_path);
    std::vector<std::string> theader{"t_seconds"};
    std::vector<std::size_t> tcols;
    for (const char* name : {"t_seconds", "x1", "x2"}) {
      auto it = std::find(roll[0].begin(), roll[0].end(), name);
      if (it == roll[0].end()) continue;
      tcols.push_back(static_cast<std::size_t>(it - roll[0].begin()));
      if (std::string(name) != "t_seconds") theader.push_back(name);
    }
    csv::Writer traj(plots / ("trajectory_run_" + std::to_string(index) + ".csv"), theader);
    for (std::size_t r = 1; r < roll.size(); ++r) {
      for (std::size_t c : tcols) traj.add(roll[r].at(c));
      traj.end_row();
    }
    traj.close();
  }
}

}  // namespace qlqr
