#include "qlqr/linalg.hpp"

#include <algorithm>
#include <string>

#include "qlqr/errors.hpp"

namespace qlqr {

double spectral_radius(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double min_eigenvalue(const Mat& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(symmetric),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_abs_eigenvalue(const Mat& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(symmetric),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

int numerical_rank(const Mat& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double thresh =
      static_cast<double>(std::max(m.rows(), m.cols())) * s(0) * rel_tol;
  return static_cast<int>((s.array() > thresh).count());
}

Vec svec(const Mat& symmetric) {
  const int n = static_cast<int>(symmetric.rows());
  Vec v(svec_size(n));
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) v(k++) = symmetric(i, j);
  return v;
}

Mat smat(const Vec& v, int n) {
  if (v.size() != svec_size(n))
    throw ContractError("smat: expected " + std::to_string(svec_size(n)) +
                        " entries, got " + std::to_string(v.size()));
  Mat m(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  return m;
}

Vec quadratic_features(const Vec& x) {
  const int n = static_cast<int>(x.size());
  Vec f(svec_size(n));
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) f(k++) = (i == j ? 1.0 : 2.0) * x(i) * x(j);
  return f;
}

void require_shape(const Mat& m, Eigen::Index rows, Eigen::Index cols,
                   const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw ContractError(std::string(what) + ": expected " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        ", got " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()));
}

void require_size(const Vec& v, Eigen::Index size, const char* what) {
  if (v.size() != size)
    throw ContractError(std::string(what) + ": expected length " +
                        std::to_string(size) + ", got " +
                        std::to_string(v.size()));
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace qlqr
