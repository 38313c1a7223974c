#include "qlqr/kernels.hpp"

#include "qlqr/errors.hpp"

namespace qlqr::kernels {

namespace {

// Shared per-entry bodies; serial and OpenMP paths differ only in how the
// outer index is scheduled.

inline void design_row(const Mat& X, Eigen::Index k, Mat& F) {
  const Eigen::Index n = X.cols();
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      F(k, c++) = (i == j ? 1.0 : 2.0) * X(k, i) * X(k, j);
}

inline double quad(const Mat& M, const Mat& Z, Eigen::Index k,
                   Eigen::Index offset, Eigen::Index n) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) row += M(i, j) * Z(k, offset + j);
    s += Z(k, offset + i) * row;
  }
  return s;
}

inline double label(const LabelInputs& in, Eigen::Index k) {
  const Eigen::Index nx = in.Q.rows();
  const Eigen::Index nu = in.R.rows();
  const double cost = quad(in.Q, in.X, k, 0, nx) + quad(in.R, in.X, k, nx, nu);
  return cost + in.gamma * quad(in.H, in.Znext, k, 0, nx + nu);
}

inline double column_dot(const Mat& F, Eigen::Index a, Eigen::Index b) {
  const double* pa = F.col(a).data();
  const double* pb = F.col(b).data();
  double s = 0.0;
  for (Eigen::Index k = 0; k < F.rows(); ++k) s += pa[k] * pb[k];
  return s;
}

inline double column_dot(const Mat& F, Eigen::Index a, const Vec& y) {
  const double* pa = F.col(a).data();
  double s = 0.0;
  for (Eigen::Index k = 0; k < F.rows(); ++k) s += pa[k] * y(k);
  return s;
}

void check_labels(const LabelInputs& in) {
  const Eigen::Index n = in.Q.rows() + in.R.rows();
  if (in.X.cols() != n || in.Znext.cols() != n || in.Znext.rows() != in.X.rows())
    throw ContractError("bellman_labels: sample shapes do not match Q/R");
  require_shape(in.H, n, n, "bellman_labels: H");
}

}  // namespace

namespace serial {

Mat quadratic_design(const Mat& X) {
  Mat F(X.rows(), svec_size(static_cast<int>(X.cols())));
  for (Eigen::Index k = 0; k < X.rows(); ++k) design_row(X, k, F);
  return F;
}

Vec bellman_labels(const LabelInputs& in) {
  check_labels(in);
  Vec y(in.X.rows());
  for (Eigen::Index k = 0; k < in.X.rows(); ++k) y(k) = label(in, k);
  return y;
}

Mat gram(const Mat& F) {
  const Eigen::Index p = F.cols();
  Mat G(p, p);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = a; b < p; ++b) {
      G(a, b) = column_dot(F, a, b);
      G(b, a) = G(a, b);
    }
  return G;
}

Vec gram_rhs(const Mat& F, const Vec& y) {
  require_size(y, F.rows(), "gram_rhs: y");
  Vec r(F.cols());
  for (Eigen::Index a = 0; a < F.cols(); ++a) r(a) = column_dot(F, a, y);
  return r;
}

}  // namespace serial

namespace omp {

Mat quadratic_design(const Mat& X) {
  Mat F(X.rows(), svec_size(static_cast<int>(X.cols())));
  const long long N = X.rows();
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < N; ++k) design_row(X, k, F);
  return F;
}

Vec bellman_labels(const LabelInputs& in) {
  check_labels(in);
  Vec y(in.X.rows());
  const long long N = in.X.rows();
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < N; ++k) y(k) = label(in, k);
  return y;
}

Mat gram(const Mat& F) {
  const long long p = F.cols();
  Mat G(p, p);
  // Parallel over output entries: each entry keeps the serial summation order.
#pragma omp parallel for schedule(dynamic)
  for (long long a = 0; a < p; ++a)
    for (long long b = a; b < p; ++b) G(a, b) = column_dot(F, a, b);
  for (long long a = 0; a < p; ++a)
    for (long long b = a + 1; b < p; ++b) G(b, a) = G(a, b);
  return G;
}

Vec gram_rhs(const Mat& F, const Vec& y) {
  require_size(y, F.rows(), "gram_rhs: y");
  Vec r(F.cols());
  const long long p = F.cols();
#pragma omp parallel for schedule(static)
  for (long long a = 0; a < p; ++a) r(a) = column_dot(F, a, y);
  return r;
}

}  // namespace omp

}  // namespace qlqr::kernels
