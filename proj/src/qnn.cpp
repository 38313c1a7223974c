#include "qlqr/qnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "qlqr/csv.hpp"
#include "qlqr/errors.hpp"
#include "qlqr/kernels.hpp"

namespace qlqr {

namespace {

void validate(const RegressionData& data) {
  if (data.size() < 1) throw ContractError("train: no samples");
  if (data.labels.size() != data.size())
    throw ContractError("train: label count does not match inputs");
  if (!data.inputs.allFinite() || !data.labels.allFinite())
    throw ContractError("train: non-finite samples");
}

nlohmann::json to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

QnnModel model_from_solution(const SdpSolution& sol,
                             const ActivationCoeffs& coeffs, double beta) {
  const Eigen::Index n = sol.Z1p.rows();
  const Mat Z1 = sol.Z1p - sol.Z1m;
  const Vec Z2 = sol.Z2p - sol.Z2m;
  QnnModel model;
  model.coeffs = coeffs;
  model.beta = beta;
  model.Hfull = Mat::Zero(n + 1, n + 1);
  model.Hfull.topLeftCorner(n, n) = coeffs.a * symmetrize(Z1);
  model.Hfull.topRightCorner(n, 1) = 0.5 * coeffs.b * Z2;
  model.Hfull.bottomLeftCorner(1, n) = 0.5 * coeffs.b * Z2.transpose();
  model.Hfull(n, n) = coeffs.c * Z1.trace();
  return model;
}

TrainResult train(const RegressionData& data, const ActivationCoeffs& coeffs,
                  double beta, Loss loss, const SolverConfig& cfg,
                  SdpWarmStart* warm) {
  validate(data);
  if (loss != Loss::squared) throw ContractError("train: unsupported loss");
  if (!(beta >= 0.0)) throw ContractError("train: beta must be >= 0");
  if (coeffs.a == 0.0) throw ContractError("train: a must be nonzero");
  ConeProgram problem{data.inputs, data.labels, coeffs, beta};
  TrainResult r;
  r.solution = solve_sdp(problem, cfg, warm);
  r.model = model_from_solution(r.solution, coeffs, beta);
  return r;
}

double predict(const QnnModel& model, const Vec& x) {
  require_size(x, model.input_dim(), "predict: x");
  Vec z(x.size() + 1);
  z << x, 1.0;
  return z.dot(model.Hfull * z);
}

std::vector<Neuron> extract_neurons(const QnnModel& model, double tol) {
  if (model.coeffs.b != 0.0 || model.coeffs.c != 0.0)
    throw ContractError(
        "extract_neurons: only defined for the pure quadratic activation "
        "(b = c = 0)");
  if (!(tol > 0.0)) throw ContractError("extract_neurons: tol must be > 0");
  const Mat Z1 = model.core() / model.coeffs.a;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(Z1));
  const Vec& lam = es.eigenvalues();
  std::vector<Neuron> out;
  if (lam.size() == 0) return out;
  const double big = lam.cwiseAbs().maxCoeff();
  if (big == 0.0) return out;
  // Largest magnitude first.
  std::vector<int> order(static_cast<std::size_t>(lam.size()));
  for (int i = 0; i < lam.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(lam(a)) > std::abs(lam(b));
  });
  for (int i : order) {
    if (std::abs(lam(i)) <= tol * big) continue;
    Vec w = es.eigenvectors().col(i);
    w.normalize();
    out.push_back({w, lam(i)});
  }
  return out;
}

double neuron_output(const std::vector<Neuron>& neurons,
                     const ActivationCoeffs& coeffs, const Vec& x) {
  double y = 0.0;
  for (const auto& nr : neurons) {
    const double z = x.dot(nr.W);
    y += (coeffs.a * z * z + coeffs.b * z + coeffs.c) * nr.rho;
  }
  return y;
}

Mat fit_least_squares(const RegressionData& data) {
  validate(data);
  const int n = data.dim();
  const Mat F = kernels::omp::quadratic_design(data.inputs);
  const int M = svec_size(n);
  Eigen::ColPivHouseholderQR<Mat> qr(F);
  qr.setThreshold(1e-12 * std::max<double>(F.rows(), F.cols()));
  if (qr.rank() < M)
    throw ExcitationError("fit_least_squares: design rank " +
                              std::to_string(qr.rank()) + " < " +
                              std::to_string(M),
                          static_cast<int>(qr.rank()), M);
  const Vec h = qr.solve(data.labels);
  return smat(h, n);
}

void dump_solution(const SdpSolution& sol, const std::filesystem::path& stem) {
  {
    csv::Writer w(stem.string() + ".csv",
                  {"iteration", "primal_residual", "dual_residual", "objective"});
    for (const auto& r : sol.history)
      w.add(static_cast<long long>(r.iteration))
          .add(r.primal_residual)
          .add(r.dual_residual)
          .add(r.objective)
          .end_row();
    w.close();
  }
  nlohmann::json j;
  j["status"] = to_string(sol.status);
  j["objective"] = sol.objective;
  j["iterations"] = sol.iterations;
  j["polished"] = sol.polished;
  j["primal_residual"] = sol.primal_residual;
  j["dual_residual"] = sol.dual_residual;
  j["Z1p"] = to_json(sol.Z1p);
  j["Z1m"] = to_json(sol.Z1m);
  j["Z2p"] = to_json(sol.Z2p);
  j["Z2m"] = to_json(sol.Z2m);
  std::ofstream out(stem.string() + ".json");
  if (!out) throw Error("dump_solution: cannot write " + stem.string() + ".json");
  out << j.dump(2) << "\n";
}

}  // namespace qlqr
