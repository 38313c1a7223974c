#include "qlqr/qlearn.hpp"

#include <cmath>
#include <random>
#include <string>

#include "qlqr/kernels.hpp"
#include "qlqr/oracle.hpp"

namespace qlqr {

Mat SdpTrainer::fit(const TrainingSet& data) {
  if (!warm_) warm_.emplace();
  TrainResult r = train(RegressionData{data.X, data.Y}, ActivationCoeffs{},
                        beta_, Loss::squared, cfg_, &*warm_);
  ++solves_;
  if (r.solution.status != SdpStatus::optimal) ++capped_;
  last_ = std::move(r.solution);
  return r.model.core();
}

Mat LeastSquaresTrainer::fit(const TrainingSet& data) {
  return fit_least_squares(RegressionData{data.X, data.Y});
}

namespace {

Mat stacked_inputs(const Trajectory& data) {
  if (data.empty()) return Mat(0, 0);
  const Eigen::Index nx = data.front().x.size();
  const Eigen::Index nu = data.front().u.size();
  Mat X(static_cast<Eigen::Index>(data.size()), nx + nu);
  for (std::size_t k = 0; k < data.size(); ++k) {
    X.row(static_cast<Eigen::Index>(k)).head(nx) = data[k].x.transpose();
    X.row(static_cast<Eigen::Index>(k)).tail(nu) = data[k].u.transpose();
  }
  return X;
}

Vec ball_sample(std::mt19937_64& rng, int n, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec d(n);
  for (int i = 0; i < n; ++i) d(i) = normal(rng);
  const double len = d.norm();
  if (len == 0.0) return Vec::Zero(n);
  return d / len * (radius * std::pow(unit(rng), 1.0 / n));
}

}  // namespace

int excitation_rank(const Trajectory& data) {
  if (data.empty()) return 0;
  return numerical_rank(kernels::omp::quadratic_design(stacked_inputs(data)));
}

Trajectory collect_data(const Plant& plant, const LinearPolicy& pol,
                        const EvalConfig& cfg, const ProbingConfig& probing,
                        const InitialStatePolicy& x0, std::uint64_t sweep) {
  if (cfg.N < 1) throw ContractError("collect_data: N must be >= 1");
  if (cfg.episode_length < 1)
    throw ContractError("collect_data: episode_length must be >= 1");
  const int nx = plant.nx();
  if (x0.kind == InitialStatePolicy::Kind::fixed)
    require_size(x0.x0, nx, "collect_data: x0");

  std::mt19937_64 rng(mix_seed(x0.seed, sweep));
  Trajectory data;
  data.reserve(static_cast<std::size_t>(cfg.N));
  for (std::uint64_t episode = 0; static_cast<int>(data.size()) < cfg.N;
       ++episode) {
    const Vec start = x0.kind == InitialStatePolicy::Kind::fixed
                          ? x0.x0
                          : ball_sample(rng, nx, x0.radius);
    const int steps =
        std::min(cfg.episode_length, cfg.N - static_cast<int>(data.size()));
    ProbingConfig probe = probing;
    probe.seed = mix_seed(mix_seed(probing.seed, sweep), episode);
    Trajectory part = plant.rollout(pol, start, steps, probe);
    for (auto& tr : part) {
      if (!tr.x_next.allFinite())
        throw DivergenceError("collect_data: state became non-finite");
      data.push_back(std::move(tr));
    }
  }
  const int M = required_samples(nx, plant.nu());
  const int rank = excitation_rank(data);
  if (rank < M)
    throw ExcitationError("collect_data: excitation rank " +
                              std::to_string(rank) + " < M = " +
                              std::to_string(M) +
                              "; increase the probing amplitude or N",
                          rank, M);
  return data;
}

TrainingSet make_labels(const Trajectory& data, const LinearPolicy& pol,
                        const CostParams& cp, const QuadraticForm& Hi) {
  const int nx = cp.nx();
  const int nu = cp.nu();
  require_shape(pol.K, nu, nx, "make_labels: K");
  if (Hi.nx() != nx || Hi.nu() != nu)
    throw ContractError("make_labels: H partition does not match the cost");
  TrainingSet ts;
  ts.X = stacked_inputs(data);
  if (data.empty()) {
    ts.X.resize(0, nx + nu);
    ts.Y.resize(0);
    return ts;
  }
  if (ts.X.cols() != nx + nu)
    throw ContractError("make_labels: sample dimensions do not match the cost");
  Mat Znext(ts.X.rows(), nx + nu);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    Znext.row(r).head(nx) = data[k].x_next.transpose();
    Znext.row(r).tail(nu) = pol.act(data[k].x_next).transpose();
  }
  ts.Y = kernels::omp::bellman_labels(
      {ts.X, Znext, cp.Q(), cp.R(), cp.gamma(), Hi.H()});
  return ts;
}

QuadraticForm initial_h(int nx, int nu, const EvalConfig& cfg,
                        std::uint64_t stream) {
  if (cfg.h0_init == H0Init::zero) return QuadraticForm::zero(nx, nu);
  const int n = nx + nu;
  std::mt19937_64 rng(mix_seed(cfg.h0_seed, stream));
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = normal(rng);
  return QuadraticForm(G * G.transpose() / n, nx, nu);
}

EvaluationResult evaluate_on_data(const Trajectory& data,
                                  const LinearPolicy& pol,
                                  const CostParams& cp, const EvalConfig& cfg,
                                  QFunctionTrainer& trainer,
                                  const QuadraticForm& H0,
                                  const InnerObserver& observer) {
  if (!(cfg.epsilon > 0.0))
    throw ContractError("policy evaluation: epsilon must be > 0");
  trainer.reset();
  EvaluationResult res{H0, 0, {}};
  for (int i = 1; i <= cfg.max_inner; ++i) {
    TrainingSet ts = make_labels(data, pol, cp, res.H);
    ts.h_iteration = i - 1;
    QuadraticForm next(symmetrize(trainer.fit(ts)), cp.nx(), cp.nu());
    const double change = (next.H() - res.H.H()).norm();
    res.H = std::move(next);
    res.iterations = i;
    res.residuals.push_back(change);
    if (observer) observer(i, res.H);
    if (!std::isfinite(change))
      throw EvaluationError("policy evaluation: non-finite iterate",
                            res.residuals);
    if (change < cfg.epsilon) return res;
  }
  throw EvaluationError("policy evaluation: no convergence in " +
                            std::to_string(cfg.max_inner) +
                            " inner iterations (last change " +
                            std::to_string(res.residuals.back()) + ")",
                        res.residuals);
}

EvaluationResult policy_evaluation(const Plant& plant, const LinearPolicy& pol,
                                   const CostParams& cp, const EvalConfig& cfg,
                                   const PiConfig& pi,
                                   QFunctionTrainer& trainer,
                                   std::uint64_t sweep) {
  const Trajectory data =
      collect_data(plant, pol, cfg, pi.probing, pi.x0_policy, sweep);
  EvaluationResult res = evaluate_on_data(
      data, pol, cp, cfg, trainer, initial_h(cp.nx(), cp.nu(), cfg, sweep));
  if (min_eigenvalue(res.H.Huu()) <= 0.0)
    throw ImprovementError(
        "policy evaluation: learned H_uu is not positive definite");
  return res;
}

LinearPolicy policy_improvement(const QuadraticForm& H) {
  return improved_gain(H);
}

namespace {

Vec probe_state(const PiConfig& pi, int nx) {
  if (pi.x0_policy.kind == InitialStatePolicy::Kind::fixed &&
      pi.x0_policy.x0.norm() > 0.0)
    return pi.x0_policy.x0;
  return Vec::Constant(nx, pi.x0_policy.radius / std::sqrt(nx));
}

// Noise-free rollout of a candidate gain; a destabilizing gain shows up as
// growth between the first and last tenth of the horizon.
bool rollout_diverges(const Plant& plant, const LinearPolicy& pol,
                      const PiConfig& pi) {
  const int horizon = std::max(20, pi.divergence_horizon);
  const Trajectory tr =
      plant.rollout(pol, probe_state(pi, plant.nx()), horizon, std::nullopt);
  const int tenth = horizon / 10;
  double head = 0.0, tail = 0.0;
  for (int k = 0; k < horizon; ++k) {
    const double nrm = tr[static_cast<std::size_t>(k)].x_next.norm();
    if (!std::isfinite(nrm)) return true;
    if (k < tenth) head = std::max(head, nrm);
    if (k >= horizon - tenth) tail = std::max(tail, nrm);
  }
  return tail > head;
}

}  // namespace

PiTrace run_policy_iteration(const Plant& plant, const LinearPolicy& pi0,
                             const CostParams& cp, const EvalConfig& eval,
                             const PiConfig& pi, QFunctionTrainer& trainer,
                             const TraceAnnotator& annotate) {
  if (cp.definiteness() != Definiteness::positive)
    throw ContractError("run_policy_iteration: Q and R must be positive definite");
  if (!(pi.outer_epsilon > 0.0))
    throw ContractError("run_policy_iteration: outer_epsilon must be > 0");
  if (pi.max_outer < 1)
    throw ContractError("run_policy_iteration: max_outer must be >= 1");
  require_shape(pi0.K, plant.nu(), plant.nx(), "run_policy_iteration: K0");

  PiTrace trace;
  LinearPolicy K = pi0;
  auto push_final = [&](int index) {
    PiIteration row;
    row.index = index;
    row.K = K.K;
    if (annotate) annotate(row);
    trace.iterations.push_back(std::move(row));
  };

  for (int j = 0; j < pi.max_outer; ++j) {
    const std::uint64_t sweep =
        eval.resample == Resample::fresh_each_sweep ? static_cast<std::uint64_t>(j) : 0;
    EvaluationResult res{QuadraticForm::zero(plant.nx(), plant.nu()), 0, {}};
    try {
      res = policy_evaluation(plant, K, cp, eval, pi, trainer, sweep);
    } catch (const EvaluationError& e) {
      PiIteration row;
      row.index = j;
      row.K = K.K;
      row.inner_iterations = static_cast<int>(e.residuals().size());
      row.inner_residuals = e.residuals();
      if (annotate) annotate(row);
      trace.iterations.push_back(std::move(row));
      throw PolicyIterationError(e.what(), trace);
    } catch (const Error& e) {
      push_final(j);
      throw PolicyIterationError(e.what(), trace);
    }

    PiIteration row;
    row.index = j;
    row.K = K.K;
    row.H = res.H.H();
    row.inner_iterations = res.iterations;
    row.inner_residuals = res.residuals;
    if (annotate) annotate(row);
    trace.iterations.push_back(std::move(row));

    LinearPolicy next;
    try {
      next = policy_improvement(res.H);
    } catch (const Error& e) {
      throw PolicyIterationError(e.what(), trace);
    }
    const double change = (next.K - K.K).norm();
    K = std::move(next);
    if (rollout_diverges(plant, K, pi)) {
      push_final(j + 1);
      throw PolicyIterationError(
          "run_policy_iteration: improved gain diverges in rollout", trace);
    }
    if (change < pi.outer_epsilon) {
      trace.converged = true;
      push_final(j + 1);
      return trace;
    }
  }
  push_final(pi.max_outer);
  return trace;
}

}  // namespace qlqr
