#include "qlqr/lti.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qlqr/errors.hpp"

namespace qlqr {

namespace {

bool all_finite(const Mat& m) { return m.allFinite(); }

bool definite_enough(const Mat& m, Definiteness d) {
  if ((m - m.transpose()).norm() > 1e-10 * std::max(1.0, m.norm()))
    return false;
  const double lo = min_eigenvalue(m);
  return d == Definiteness::positive ? lo > 0.0
                                     : lo >= -1e-12 * std::max(1.0, m.norm());
}

}  // namespace

StateSpace::StateSpace(Mat A, Mat B) : A_(std::move(A)), B_(std::move(B)) {
  if (A_.rows() == 0 || A_.rows() != A_.cols())
    throw ContractError("StateSpace: A must be square and non-empty");
  if (B_.rows() != A_.rows() || B_.cols() == 0)
    throw ContractError("StateSpace: B must have nx rows and nu >= 1 columns");
  if (!all_finite(A_) || !all_finite(B_))
    throw ContractError("StateSpace: non-finite entries");
  const int rank = controllability_rank(A_, B_);
  if (rank < nx())
    throw ControllabilityError("StateSpace: controllability matrix has rank " +
                               std::to_string(rank) + " < " +
                               std::to_string(nx()));
}

CostParams::CostParams(Mat Q, Mat R, double gamma, Definiteness d)
    : Q_(std::move(Q)), R_(std::move(R)), gamma_(gamma), definiteness_(d) {
  if (Q_.rows() == 0 || Q_.rows() != Q_.cols())
    throw ContractError("CostParams: Q must be square");
  if (R_.rows() == 0 || R_.rows() != R_.cols())
    throw ContractError("CostParams: R must be square");
  const char* kind = d == Definiteness::positive ? "positive definite"
                                                 : "positive semidefinite";
  if (!definite_enough(Q_, d))
    throw ContractError(std::string("CostParams: Q must be symmetric ") + kind);
  if (!definite_enough(R_, d))
    throw ContractError(std::string("CostParams: R must be symmetric ") + kind);
  if (!(gamma_ > 0.0 && gamma_ <= 1.0))
    throw ContractError("CostParams: gamma must lie in (0, 1]");
  Q_ = symmetrize(Q_);
  R_ = symmetrize(R_);
}

ProbeGenerator::ProbeGenerator(const ProbingConfig& cfg, int nu, int nx)
    : cfg_(cfg), nu_(nu), rng_(cfg.seed) {
  if (cfg.amplitude < 0.0 || !std::isfinite(cfg.amplitude))
    throw ContractError("ProbingConfig: amplitude must be finite and >= 0");
  if (cfg_.kind == ProbeKind::sinusoid_mix) {
    static constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                      31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
    const int count = std::min<int>(2 * nx, std::size(kPrimes));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (int j = 0; j < count; ++j)
      freqs_.push_back(0.3 * std::sqrt(static_cast<double>(kPrimes[j])));
    phases_.resize(nu_, count);
    for (int c = 0; c < nu_; ++c)
      for (int j = 0; j < count; ++j) phases_(c, j) = phase(rng_);
  }
}

Vec ProbeGenerator::next() {
  Vec n = Vec::Zero(nu_);
  if (cfg_.amplitude == 0.0) {
    ++k_;
    return n;
  }
  switch (cfg_.kind) {
    case ProbeKind::gaussian: {
      std::normal_distribution<double> d(0.0, 1.0);
      for (int c = 0; c < nu_; ++c) n(c) = cfg_.amplitude * d(rng_);
      break;
    }
    case ProbeKind::uniform: {
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      for (int c = 0; c < nu_; ++c) n(c) = cfg_.amplitude * d(rng_);
      break;
    }
    case ProbeKind::sinusoid_mix: {
      const double norm = 1.0 / std::sqrt(static_cast<double>(freqs_.size()));
      for (int c = 0; c < nu_; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < freqs_.size(); ++j)
          s += std::sin(freqs_[j] * static_cast<double>(k_) + phases_(c, j));
        n(c) = cfg_.amplitude * norm * s;
      }
      break;
    }
  }
  ++k_;
  return n;
}

StateSpace tustin_discretize(const ContinuousStateSpace& cs) {
  if (!(cs.T > 0.0) || !std::isfinite(cs.T))
    throw DiscretizationError("tustin_discretize: sample time must be > 0");
  if (cs.Ac.rows() == 0 || cs.Ac.rows() != cs.Ac.cols() ||
      cs.Bc.rows() != cs.Ac.rows())
    throw ContractError("tustin_discretize: inconsistent Ac/Bc shapes");
  const Eigen::Index n = cs.Ac.rows();
  const Mat I = Mat::Identity(n, n);
  const Mat left = I - 0.5 * cs.T * cs.Ac;
  Eigen::FullPivLU<Mat> lu(left);
  if (!lu.isInvertible() || lu.rcond() < 1e-14)
    throw DiscretizationError(
        "tustin_discretize: I - (T/2) Ac is singular");
  Mat A = lu.solve(I + 0.5 * cs.T * cs.Ac);
  Mat B = lu.solve(cs.T * cs.Bc);
  return StateSpace(std::move(A), std::move(B));
}

Vec step(const StateSpace& ss, const Vec& x, const Vec& u) {
  require_size(x, ss.nx(), "step: x");
  require_size(u, ss.nu(), "step: u");
  return ss.A() * x + ss.B() * u;
}

double local_cost(const CostParams& cp, const Vec& x, const Vec& u) {
  require_size(x, cp.nx(), "local_cost: x");
  require_size(u, cp.nu(), "local_cost: u");
  return x.dot(cp.Q() * x) + u.dot(cp.R() * u);
}

Trajectory rollout(const StateSpace& ss, const LinearPolicy& pol,
                   const Vec& x0, int steps,
                   const std::optional<ProbingConfig>& probe) {
  if (steps < 1) throw ContractError("rollout: steps must be >= 1");
  require_shape(pol.K, ss.nu(), ss.nx(), "rollout: K");
  require_size(x0, ss.nx(), "rollout: x0");
  std::optional<ProbeGenerator> gen;
  if (probe) gen.emplace(*probe, ss.nu(), ss.nx());
  Trajectory traj;
  traj.reserve(static_cast<std::size_t>(steps));
  Vec x = x0;
  for (int k = 0; k < steps; ++k) {
    Vec u = pol.act(x);
    if (gen) u += gen->next();
    Vec xn = ss.A() * x + ss.B() * u;
    traj.push_back({x, u, xn});
    x = std::move(xn);
  }
  return traj;
}

int controllability_rank(const Mat& A, const Mat& B) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Mat C(n, n * m);
  Mat block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    C.middleCols(k * m, m) = block;
    block = A * block;
  }
  // Threshold max(nx, nu) * sigma_max * 1e-12.
  Eigen::JacobiSVD<Mat> svd(C);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double thresh = static_cast<double>(std::max(n, m)) * s(0) * 1e-12;
  return static_cast<int>((s.array() > thresh).count());
}

double closed_loop_radius(const StateSpace& ss, const LinearPolicy& pol) {
  require_shape(pol.K, ss.nu(), ss.nx(), "closed_loop_radius: K");
  return spectral_radius(ss.A() - ss.B() * pol.K);
}

bool is_stabilizing(const StateSpace& ss, const LinearPolicy& pol,
                    double margin) {
  return closed_loop_radius(ss, pol) < 1.0 - margin;
}

}  // namespace qlqr
