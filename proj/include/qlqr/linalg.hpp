#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace qlqr {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

double spectral_radius(const Mat& m);
double min_eigenvalue(const Mat& symmetric);
double max_abs_eigenvalue(const Mat& symmetric);

/// Numerical rank from singular values with threshold
/// max(rows, cols) * sigma_max * rel_tol.
int numerical_rank(const Mat& m, double rel_tol = 1e-12);

/// Number of independent entries of an n x n symmetric matrix.
constexpr int svec_size(int n) { return n * (n + 1) / 2; }

/// Upper-triangular row-major enumeration (i <= j) of a symmetric matrix.
/// These are raw entries, not sqrt(2)-scaled.
Vec svec(const Mat& symmetric);
Mat smat(const Vec& v, int n);

/// Row of the quadratic design: features(x) . svec(H) == x' H x.
Vec quadratic_features(const Vec& x);

/// Throws ContractError if m is not rows x cols.
void require_shape(const Mat& m, Eigen::Index rows, Eigen::Index cols,
                   const char* what);
void require_size(const Vec& v, Eigen::Index size, const char* what);

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace qlqr
