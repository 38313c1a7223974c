#pragma once

#include <vector>

#include "qlqr/lti.hpp"
#include "qlqr/quadratic_form.hpp"

namespace qlqr {

/// V(x) = x' P x.
struct ValueMatrix {
  Mat P;
};

struct LyapunovOptions {
  double rel_tol = 1e-12;
  int max_iter = 100000;
};

/// Solves P = Q + K'RK + gamma (A-BK)' P (A-BK) for a stabilizing policy.
/// Throws DivergenceError if sqrt(gamma)(A-BK) is not Schur.
ValueMatrix solve_policy_value(const StateSpace& ss, const CostParams& cp,
                               const LinearPolicy& pol,
                               const LyapunovOptions& opts = {});

/// Frobenius norm of the discounted Lyapunov residual.
double lyapunov_residual(const StateSpace& ss, const CostParams& cp,
                         const LinearPolicy& pol, const Mat& P);

/// H = [[Q + g A'PA, g A'PB], [g B'PA, R + g B'PB]].
QuadraticForm build_h(const StateSpace& ss, const CostParams& cp,
                      const ValueMatrix& value);

struct LqrSolution {
  LinearPolicy policy;
  ValueMatrix value;
  int iterations = 0;
};

struct RiccatiOptions {
  double rel_tol = 1e-12;
  int max_iter = 1000000;
};

/// Discounted discrete Riccati equation by value iteration followed by one
/// Kleinman (Newton) polish step.
LqrSolution riccati_lqr(const StateSpace& ss, const CostParams& cp,
                        const RiccatiOptions& opts = {});

/// K' = H_uu^-1 H_xu'. Throws ImprovementError unless H_uu is positive
/// definite.
LinearPolicy improved_gain(const QuadraticForm& q);

/// Model-based policy iteration; element 0 is pi0. Used to produce reference
/// gain sequences.
std::vector<LinearPolicy> model_policy_iteration(const StateSpace& ss,
                                                 const CostParams& cp,
                                                 const LinearPolicy& pi0,
                                                 int max_iter, double tol);

}  // namespace qlqr
