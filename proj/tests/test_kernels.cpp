#include <gtest/gtest.h>

#include <omp.h>

#include <random>

#include "fixtures.hpp"
#include "qlqr/kernels.hpp"

using namespace qlqr;

namespace {

struct Data {
  Mat X, Z, Q, R, H, F;
  Vec y;
};

Data make(std::mt19937_64& rng, int N, int nx, int nu) {
  const int n = nx + nu;
  Data d;
  d.X = fx::gaussian(rng, N, n);
  d.Z = fx::gaussian(rng, N, n);
  d.Q = fx::random_pd(rng, nx);
  d.R = fx::random_pd(rng, nu);
  d.H = fx::random_pd(rng, n);
  d.F = kernels::serial::quadratic_design(d.X);
  d.y = fx::gaussian(rng, N, 1);
  return d;
}

}  // namespace

TEST(Kernels, DesignRowsReproduceQuadraticForm) {
  std::mt19937_64 rng(51);
  const Data d = make(rng, 20, 3, 2);
  const Vec h = svec(d.H);
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    const Vec x = d.X.row(i).transpose();
    EXPECT_NEAR(d.F.row(i).dot(h), x.dot(d.H * x), 1e-12 * (1 + std::abs(x.dot(d.H * x))));
    EXPECT_EQ(Vec(d.F.row(i).transpose()), quadratic_features(x));
  }
}

TEST(Kernels, LabelsMatchDefinition) {
  std::mt19937_64 rng(52);
  const Data d = make(rng, 15, 3, 1);
  const Vec y = kernels::serial::bellman_labels({d.X, d.Z, d.Q, d.R, 0.9, d.H});
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    const Vec x = d.X.row(i).head(3).transpose(), u = d.X.row(i).tail(1).transpose();
    const Vec z = d.Z.row(i).transpose();
    const double ref = x.dot(d.Q * x) + u.dot(d.R * u) + 0.9 * z.dot(d.H * z);
    EXPECT_NEAR(y(i), ref, 1e-12 * std::abs(ref));
  }
}

TEST(Kernels, GramMatchesEigen) {
  std::mt19937_64 rng(53);
  const Data d = make(rng, 50, 4, 1);
  const Mat G = kernels::serial::gram(d.F);
  EXPECT_LT(fx::rel(G, d.F.transpose() * d.F), 1e-13);
  EXPECT_LT((kernels::serial::gram_rhs(d.F, d.y) - d.F.transpose() * d.y).norm(),
            1e-12 * (d.F.transpose() * d.y).norm());
}

TEST(Kernels, OpenMpBitIdenticalAcrossThreadCounts) {
  std::mt19937_64 rng(54);
  for (auto [N, nx, nu] : {std::tuple{100, 4, 1}, std::tuple{2000, 6, 2}, std::tuple{7, 1, 1}}) {
    const Data d = make(rng, N, nx, nu);
    const kernels::LabelInputs in{d.X, d.Z, d.Q, d.R, 0.95, d.H};
    const Mat F = kernels::serial::quadratic_design(d.X);
    const Vec y = kernels::serial::bellman_labels(in);
    const Mat G = kernels::serial::gram(F);
    const Vec g = kernels::serial::gram_rhs(F, d.y);
    for (int threads : {1, 2, 3, 8}) {
      omp_set_num_threads(threads);
      EXPECT_EQ(kernels::omp::quadratic_design(d.X), F) << threads;
      EXPECT_EQ(kernels::omp::bellman_labels(in), y) << threads;
      EXPECT_EQ(kernels::omp::gram(F), G) << threads;
      EXPECT_EQ(kernels::omp::gram_rhs(F, d.y), g) << threads;
    }
  }
}
