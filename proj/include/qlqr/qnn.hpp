#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "qlqr/linalg.hpp"

namespace qlqr {

/// f(z) = a z^2 + b z + c.
struct ActivationCoeffs {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
};

/// Rows of `inputs` are the samples X_i.
struct RegressionData {
  Mat inputs;
  Vec labels;

  int size() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

enum class Loss { squared };

enum class SdpStatus { optimal, max_iter, infeasible };

const char* to_string(SdpStatus s);

struct SolverConfig {
  double tol = 1e-8;
  int max_iter = 50000;
  // Initial penalty relative to the data curvature.
  double rho_scale = 1.0;
  int adapt_interval = 25;
  bool polish = true;
  bool record_history = false;
};

struct ResidualRecord {
  int iteration;
  double primal_residual;
  double dual_residual;
  double objective;
};

struct SdpSolution {
  Mat Z1p, Z1m;
  Vec Z2p, Z2m;
  double objective = 0.0;
  SdpStatus status = SdpStatus::max_iter;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  bool polished = false;
  std::vector<ResidualRecord> history;

  /// [[Z1, Z2], [Z2', trace(Z1)]].
  Mat lifted_plus() const;
  Mat lifted_minus() const;
};

/// Opaque ADMM state carried between solves of problems with the same design.
struct SdpWarmStart {
  Mat S_plus, S_minus;  // normalized-scale cone iterates
  Mat U_plus, U_minus;  // scaled duals
  double rho = 0.0;
  double label_scale = 1.0;
};

/// Eq. (7) data: prediction y_i = <Z+ - Z-, W_i>, linear term <T, Z+ + Z->,
/// structure <C, Z> = 0 on each lifted cone variable.
struct ConeProgram {
  Mat X;  // N x n
  Vec y;
  ActivationCoeffs coeffs;
  double beta = 0.0;
};

SdpSolution solve_sdp(const ConeProgram& problem, const SolverConfig& cfg = {},
                      SdpWarmStart* warm = nullptr);

/// Hfull = [[a Z1, 0.5 b Z2], [0.5 b Z2', c trace(Z1)]].
struct QnnModel {
  Mat Hfull;
  ActivationCoeffs coeffs;
  double beta = 0.0;

  int input_dim() const { return static_cast<int>(Hfull.rows()) - 1; }
  /// Leading n x n block.
  Mat core() const { return Hfull.topLeftCorner(input_dim(), input_dim()); }
};

QnnModel model_from_solution(const SdpSolution& sol,
                             const ActivationCoeffs& coeffs, double beta);

struct TrainResult {
  SdpSolution solution;
  QnnModel model;
};

TrainResult train(const RegressionData& data, const ActivationCoeffs& coeffs,
                  double beta, Loss loss = Loss::squared,
                  const SolverConfig& cfg = {}, SdpWarmStart* warm = nullptr);

/// [x; 1]' Hfull [x; 1].
double predict(const QnnModel& model, const Vec& x);

struct Neuron {
  Vec W;  // unit norm
  double rho;
};

/// Eigen-decomposition of the core block; one neuron per eigenvalue with
/// |lambda| > tol * max |lambda|. Requires b = c = 0.
std::vector<Neuron> extract_neurons(const QnnModel& model, double tol = 1e-6);

/// sum_j rho_j f(x' W_j).
double neuron_output(const std::vector<Neuron>& neurons,
                     const ActivationCoeffs& coeffs, const Vec& x);

/// Direct symmetric least squares X_i' H X_i ~ y_i over svec(H), no PSD split.
/// Throws ExcitationError when the design has rank below n(n+1)/2.
Mat fit_least_squares(const RegressionData& data);

/// Writes <stem>.csv (iteration,primal_residual,dual_residual,objective) and
/// <stem>.json (matrices, status, residuals).
void dump_solution(const SdpSolution& sol, const std::filesystem::path& stem);

}  // namespace qlqr
