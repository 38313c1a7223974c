#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "qlqr/errors.hpp"
#include "qlqr/lti.hpp"
#include "qlqr/qnn.hpp"
#include "qlqr/quadratic_form.hpp"

namespace qlqr {

enum class H0Init { zero, random_psd };
enum class Resample { fresh_each_sweep, fixed_dataset };

struct EvalConfig {
  double epsilon = 1e-6;
  int max_inner = 500;
  int N = 100;
  H0Init h0_init = H0Init::zero;
  std::uint64_t h0_seed = 0;
  Resample resample = Resample::fresh_each_sweep;
  // Transitions per episode; each episode starts from a fresh initial state.
  int episode_length = 1;
};

struct InitialStatePolicy {
  enum class Kind { fixed, random_ball };
  Kind kind = Kind::random_ball;
  Vec x0;              // fixed
  double radius = 1.0;  // random_ball
  std::uint64_t seed = 0;
};

struct PiConfig {
  double outer_epsilon = 1e-4;
  int max_outer = 50;
  ProbingConfig probing;
  InitialStatePolicy x0_policy;
  // Steps of the noise-free rollout used to detect a destabilizing gain.
  int divergence_horizon = 1000;
};

/// M = n(n+1)/2 with n = nx + nu.
constexpr int required_samples(int nx, int nu) { return svec_size(nx + nu); }

struct TrainingSet {
  Mat X;  // N x (nx + nu), rows [x_k; u_k]
  Vec Y;
  int h_iteration = 0;
};

/// Fits a symmetric H with X_k' H X_k ~ Y_k. Implementations may keep warm
/// state between calls; `reset` is called at the start of every evaluation.
class QFunctionTrainer {
 public:
  virtual ~QFunctionTrainer() = default;
  virtual Mat fit(const TrainingSet& data) = 0;
  virtual void reset() {}
};

/// The QNN trained through the dual SDP with a = 1, b = c = 0.
class SdpTrainer final : public QFunctionTrainer {
 public:
  SdpTrainer(double beta, SolverConfig cfg = {}) : beta_(beta), cfg_(cfg) {}

  Mat fit(const TrainingSet& data) override;
  void reset() override { warm_.reset(); }

  const SdpSolution& last_solution() const { return last_; }
  int solves() const { return solves_; }
  int capped_solves() const { return capped_; }

 private:
  double beta_;
  SolverConfig cfg_;
  std::optional<SdpWarmStart> warm_;
  SdpSolution last_;
  int solves_ = 0;
  int capped_ = 0;
};

class LeastSquaresTrainer final : public QFunctionTrainer {
 public:
  Mat fit(const TrainingSet& data) override;
};

/// Rank of the svec design over the stacked [x_k; u_k].
int excitation_rank(const Trajectory& data);

/// N transitions under u = -Kx + n with restarts per `x0`; throws
/// ExcitationError when the design rank is below M.
Trajectory collect_data(const Plant& plant, const LinearPolicy& pol,
                        const EvalConfig& cfg, const ProbingConfig& probing,
                        const InitialStatePolicy& x0,
                        std::uint64_t sweep = 0);

/// Y_k = c(x_k, u_k) + gamma [x_{k+1}; -K x_{k+1}]' H_i [x_{k+1}; -K x_{k+1}].
TrainingSet make_labels(const Trajectory& data, const LinearPolicy& pol,
                        const CostParams& cp, const QuadraticForm& Hi);

struct EvaluationResult {
  QuadraticForm H;
  int iterations = 0;
  std::vector<double> residuals;  // ||H_i - H_{i-1}||_F
};

/// Optional hook called with each inner iterate (tests use it to measure the
/// distance to the oracle H).
using InnerObserver = std::function<void(int, const QuadraticForm&)>;

/// Inner fixed point on a fixed dataset, starting from H0.
EvaluationResult evaluate_on_data(const Trajectory& data,
                                  const LinearPolicy& pol,
                                  const CostParams& cp, const EvalConfig& cfg,
                                  QFunctionTrainer& trainer,
                                  const QuadraticForm& H0,
                                  const InnerObserver& observer = {});

QuadraticForm initial_h(int nx, int nu, const EvalConfig& cfg,
                        std::uint64_t stream = 0);

/// Collects a dataset and runs the inner fixed point. Throws ImprovementError
/// when the returned H_uu is not positive definite.
EvaluationResult policy_evaluation(const Plant& plant, const LinearPolicy& pol,
                                   const CostParams& cp, const EvalConfig& cfg,
                                   const PiConfig& pi,
                                   QFunctionTrainer& trainer,
                                   std::uint64_t sweep = 0);

LinearPolicy policy_improvement(const QuadraticForm& H);

struct PiIteration {
  int index = 0;
  Mat K;                    // policy evaluated at this iteration
  std::optional<Mat> H;     // learned H^{pi_j}; absent on the final row
  int inner_iterations = 0;
  std::vector<double> inner_residuals;
  std::optional<double> gain_error;   // max-abs vs oracle K*
  std::optional<bool> stabilizing;    // oracle check
};

struct PiTrace {
  std::vector<PiIteration> iterations;
  bool converged = false;

  const Mat& final_gain() const { return iterations.back().K; }
};

/// Oracle-side annotation applied to each trace row (gain error, stability).
using TraceAnnotator = std::function<void(PiIteration&)>;

class PolicyIterationError : public Error {
 public:
  PolicyIterationError(const std::string& what, PiTrace partial)
      : Error(what), trace_(std::move(partial)) {}
  const PiTrace& partial_trace() const { return trace_; }

 private:
  PiTrace trace_;
};

PiTrace run_policy_iteration(const Plant& plant, const LinearPolicy& pi0,
                             const CostParams& cp, const EvalConfig& eval,
                             const PiConfig& pi, QFunctionTrainer& trainer,
                             const TraceAnnotator& annotate = {});

}  // namespace qlqr
