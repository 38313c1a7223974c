#pragma once

#include "qlqr/linalg.hpp"

// Data-parallel inner loops of the learner. Every kernel has a serial
// reference and an OpenMP version with the same per-entry summation order, so
// the two agree bit for bit regardless of thread count.

namespace qlqr::kernels {

/// Rows of Z are samples. Returns Y with
/// Y_k = x_k'Q x_k + u_k'R u_k + gamma * z_k' H z_k, where X_k = [x_k; u_k].
struct LabelInputs {
  const Mat& X;      // N x (nx + nu)
  const Mat& Znext;  // N x (nx + nu), [x_{k+1}; pi(x_{k+1})]
  const Mat& Q;
  const Mat& R;
  double gamma;
  const Mat& H;
};

namespace serial {
Mat quadratic_design(const Mat& X);
Vec bellman_labels(const LabelInputs& in);
Mat gram(const Mat& F);
Vec gram_rhs(const Mat& F, const Vec& y);
}  // namespace serial

namespace omp {
Mat quadratic_design(const Mat& X);
Vec bellman_labels(const LabelInputs& in);
Mat gram(const Mat& F);
Vec gram_rhs(const Mat& F, const Vec& y);
}  // namespace omp

}  // namespace qlqr::kernels
