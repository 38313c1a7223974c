#include "qlqr/oracle.hpp"

#include <cmath>
#include <string>

#include "qlqr/errors.hpp"

namespace qlqr {

namespace {

void require_consistent(const StateSpace& ss, const CostParams& cp) {
  if (cp.nx() != ss.nx() || cp.nu() != ss.nu())
    throw ContractError("cost dimensions do not match the plant");
}

// Direct solve of vec(P) = vec(W) + g (Acl' kron Acl') vec(P).
Mat lyapunov_direct(const Mat& Acl, const Mat& W, double gamma) {
  const Eigen::Index n = Acl.rows();
  const Mat At = Acl.transpose();
  Mat kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      kron.block(i * n, j * n, n, n) = At(i, j) * At;
  const Mat lhs = Mat::Identity(n * n, n * n) - gamma * kron;
  const Vec w = Eigen::Map<const Vec>(W.data(), n * n);
  const Vec p = lhs.fullPivLu().solve(w);
  return symmetrize(Eigen::Map<const Mat>(p.data(), n, n));
}

}  // namespace

ValueMatrix solve_policy_value(const StateSpace& ss, const CostParams& cp,
                               const LinearPolicy& pol,
                               const LyapunovOptions& opts) {
  require_consistent(ss, cp);
  require_shape(pol.K, ss.nu(), ss.nx(), "solve_policy_value: K");
  const Mat Acl = ss.A() - ss.B() * pol.K;
  const double radius = std::sqrt(cp.gamma()) * spectral_radius(Acl);
  if (!(radius < 1.0))
    throw DivergenceError(
        "solve_policy_value: policy is not stabilizing (discounted radius " +
        std::to_string(radius) + ")");
  const Mat W = cp.Q() + pol.K.transpose() * cp.R() * pol.K;
  const double g = cp.gamma();

  Mat P = W;
  bool converged = false;
  double last_change = INFINITY;
  for (int it = 0; it < opts.max_iter; ++it) {
    Mat next = symmetrize(W + g * Acl.transpose() * P * Acl);
    const double change = (next - P).norm();
    P = std::move(next);
    if (!P.allFinite()) break;
    if (change <= opts.rel_tol * P.norm()) {
      converged = true;
      break;
    }
    // A change that keeps growing after the transient means no fixed point.
    if (it > 1000 && change > 10.0 * last_change)
      throw DivergenceError("solve_policy_value: iteration residual grows");
    last_change = change;
  }
  if (!converged) P = lyapunov_direct(Acl, W, g);
  if (!P.allFinite())
    throw DivergenceError("solve_policy_value: non-finite value matrix");
  return {P};
}

double lyapunov_residual(const StateSpace& ss, const CostParams& cp,
                         const LinearPolicy& pol, const Mat& P) {
  const Mat Acl = ss.A() - ss.B() * pol.K;
  return (P - cp.Q() - pol.K.transpose() * cp.R() * pol.K -
          cp.gamma() * Acl.transpose() * P * Acl)
      .norm();
}

QuadraticForm build_h(const StateSpace& ss, const CostParams& cp,
                      const ValueMatrix& value) {
  require_consistent(ss, cp);
  const Mat& P = value.P;
  require_shape(P, ss.nx(), ss.nx(), "build_h: P");
  const Mat& A = ss.A();
  const Mat& B = ss.B();
  const double g = cp.gamma();
  const int nx = ss.nx();
  const int nu = ss.nu();
  Mat H(nx + nu, nx + nu);
  H.topLeftCorner(nx, nx) = cp.Q() + g * A.transpose() * P * A;
  H.topRightCorner(nx, nu) = g * A.transpose() * P * B;
  H.bottomLeftCorner(nu, nx) = g * B.transpose() * P * A;
  H.bottomRightCorner(nu, nu) = cp.R() + g * B.transpose() * P * B;
  return QuadraticForm(symmetrize(H), nx, nu);
}

LinearPolicy improved_gain(const QuadraticForm& q) {
  const Mat Huu = q.Huu();
  Eigen::LLT<Mat> llt(Huu);
  if (llt.info() != Eigen::Success || min_eigenvalue(Huu) <= 0.0)
    throw ImprovementError("improved_gain: H_uu is not positive definite");
  return {llt.solve(q.Hxu().transpose())};
}

namespace {

Mat riccati_step(const Mat& A, const Mat& B, const CostParams& cp,
                 const Mat& P) {
  const double g = cp.gamma();
  const Mat BtPA = B.transpose() * P * A;
  const Mat S = cp.R() + g * B.transpose() * P * B;
  return symmetrize(cp.Q() + g * A.transpose() * P * A -
                    g * g * BtPA.transpose() * S.llt().solve(BtPA));
}

Mat riccati_gain(const Mat& A, const Mat& B, const CostParams& cp,
                 const Mat& P) {
  const double g = cp.gamma();
  const Mat S = cp.R() + g * B.transpose() * P * B;
  return g * S.llt().solve(B.transpose() * P * A);
}

}  // namespace

LqrSolution riccati_lqr(const StateSpace& ss, const CostParams& cp,
                        const RiccatiOptions& opts) {
  require_consistent(ss, cp);
  if (cp.definiteness() != Definiteness::positive)
    throw ContractError("riccati_lqr: Q and R must be positive definite");
  const Mat& A = ss.A();
  const Mat& B = ss.B();
  Mat P = cp.Q();
  int it = 0;
  bool converged = false;
  for (; it < opts.max_iter; ++it) {
    Mat next = riccati_step(A, B, cp, P);
    const double change = (next - P).norm();
    P = std::move(next);
    if (!P.allFinite()) break;
    if (change <= opts.rel_tol * std::max(1.0, P.norm())) {
      converged = true;
      ++it;
      break;
    }
  }
  if (!converged)
    throw NumericalError("riccati_lqr: value iteration did not converge in " +
                         std::to_string(opts.max_iter) + " iterations");

  LinearPolicy pol{riccati_gain(A, B, cp, P)};
  // One Kleinman step: evaluate the current gain exactly and re-improve.
  // Kept only if it lowers the Riccati residual.
  try {
    const ValueMatrix pv = solve_policy_value(ss, cp, pol);
    const Mat Kp = riccati_gain(A, B, cp, pv.P);
    const double r_old = (riccati_step(A, B, cp, P) - P).norm();
    const double r_new = (riccati_step(A, B, cp, pv.P) - pv.P).norm();
    if (r_new < r_old) {
      P = pv.P;
      pol.K = Kp;
    }
  } catch (const DivergenceError&) {
  }
  const double radius =
      std::sqrt(cp.gamma()) * spectral_radius(A - B * pol.K);
  if (!(radius < 1.0))
    throw NumericalError("riccati_lqr: resulting gain is not stabilizing");
  return {pol, {P}, it};
}

std::vector<LinearPolicy> model_policy_iteration(const StateSpace& ss,
                                                 const CostParams& cp,
                                                 const LinearPolicy& pi0,
                                                 int max_iter, double tol) {
  std::vector<LinearPolicy> seq{pi0};
  for (int j = 0; j < max_iter; ++j) {
    const ValueMatrix v = solve_policy_value(ss, cp, seq.back());
    LinearPolicy next = improved_gain(build_h(ss, cp, v));
    const double change = (next.K - seq.back().K).norm();
    seq.push_back(std::move(next));
    if (change < tol) break;
  }
  return seq;
}

}  // namespace qlqr
