#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "qlqr/errors.hpp"
#include "qlqr/lti.hpp"

using namespace qlqr;

namespace {

// Truncated exponential series, 20 terms.
Mat expm_series(const Mat& M) {
  Mat term = Mat::Identity(M.rows(), M.cols());
  Mat sum = term;
  for (int k = 1; k < 20; ++k) {
    term = term * M / k;
    sum += term;
  }
  return sum;
}

}  // namespace

TEST(Tustin, QuadrotorMatchesPrintedMatrices) {
  const StateSpace ss = fx::quadrotor();
  Mat A(4, 4), B(4, 1);
  A << 1, 0.1, 0.05, 0.003, 0, 0.99, 0.99, 0.05, 0, 0, 1, 0.1, 0, 0, 0, 1;
  B << 0.001, 0.011, 0.022, 0.435;
  // One unit in the last printed place (some entries are truncated, e.g.
  // 0.99502 printed as 0.99).
  Mat Atol = Mat::Constant(4, 4, 1e-2);
  Atol(0, 3) = 1e-3;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(ss.A()(i, j), A(i, j), Atol(i, j)) << i << j;
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(ss.B()(i, 0), B(i, 0), 1e-3) << i;
  // Exact bilinear values.
  EXPECT_NEAR(ss.A()(1, 1), 0.995 / 1.005, 1e-15);
  EXPECT_NEAR(ss.B()(3, 0), 0.435, 1e-15);
}

TEST(Tustin, ZeroDynamics) {
  const StateSpace ss = tustin_discretize({fx::scalar(0.0), fx::scalar(1.0), 0.1});
  EXPECT_DOUBLE_EQ(ss.A()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(ss.B()(0, 0), 0.1);
}

TEST(Tustin, AgreesWithMatrixExponentialAtSmallStep) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Mat Ac = fx::gaussian(rng, 3, 3);
    // Shift to Hurwitz.
    Ac -= (Eigen::EigenSolver<Mat>(Ac).eigenvalues().real().maxCoeff() + 0.5) *
          Mat::Identity(3, 3);
    const Mat Bc = fx::gaussian(rng, 3, 1);
    const StateSpace ss = tustin_discretize({Ac, Bc, 0.01});
    const Mat E = expm_series(Ac * 0.01);
    EXPECT_LT((ss.A() - E).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(Tustin, HurwitzMapsToSchur) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> Tdist(0.01, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Mat Ac = fx::gaussian(rng, 4, 4);
    Ac -= (Eigen::EigenSolver<Mat>(Ac).eigenvalues().real().maxCoeff() + 0.05) *
          Mat::Identity(4, 4);
    Mat Bc = fx::gaussian(rng, 4, 2);
    const StateSpace ss = tustin_discretize({Ac, Bc, Tdist(rng)});
    EXPECT_LT(spectral_radius(ss.A()), 1.0);
  }
}

TEST(Tustin, SingularTransformRejected) {
  // I - T/2 Ac singular for Ac = 2/T.
  EXPECT_THROW(tustin_discretize({fx::scalar(20.0), fx::scalar(1.0), 0.1}),
               DiscretizationError);
}

TEST(StateSpace, RejectsUncontrollable) {
  EXPECT_THROW(StateSpace(fx::scalar(0.5), fx::scalar(0.0)), ControllabilityError);
  Mat A = Mat::Identity(2, 2);
  Mat B(2, 1);
  B << 1, 0;
  EXPECT_THROW(StateSpace(A, B), ControllabilityError);
}

TEST(StateSpace, RejectsBadShapes) {
  EXPECT_THROW(StateSpace(Mat::Identity(2, 3), Mat::Ones(2, 1)), ContractError);
  EXPECT_THROW(StateSpace(Mat::Identity(2, 2), Mat::Ones(3, 1)), ContractError);
}

TEST(Step, QuadrotorFirstColumnIdentity) {
  const StateSpace ss = fx::quadrotor();
  Vec x(4);
  x << -10, 0, 0, 0;
  const Vec next = step(ss, x, Vec::Zero(1));
  EXPECT_EQ(next, x);
}

TEST(Step, DimensionMismatch) {
  const StateSpace ss = fx::quadrotor();
  EXPECT_THROW(step(ss, Vec::Zero(3), Vec::Zero(1)), ContractError);
  EXPECT_THROW(step(ss, Vec::Zero(4), Vec::Zero(2)), ContractError);
}

TEST(Step, Linearity) {
  std::mt19937_64 rng(3);
  const auto c = fx::random_case(rng, 4, 2);
  const Vec x1 = fx::gaussian(rng, 4, 1), x2 = fx::gaussian(rng, 4, 1);
  const Vec u1 = fx::gaussian(rng, 2, 1), u2 = fx::gaussian(rng, 2, 1);
  const double a = 1.7, b = -0.3;
  const Vec lhs = step(c.ss, a * x1 + b * x2, a * u1 + b * u2);
  const Vec rhs = a * step(c.ss, x1, u1) + b * step(c.ss, x2, u2);
  EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
}

TEST(LocalCost, PositiveDefiniteAndEven) {
  std::mt19937_64 rng(4);
  const CostParams cp(fx::random_pd(rng, 3), fx::random_pd(rng, 2), 1.0);
  EXPECT_EQ(local_cost(cp, Vec::Zero(3), Vec::Zero(2)), 0.0);
  for (int i = 0; i < 20; ++i) {
    const Vec x = fx::gaussian(rng, 3, 1), u = fx::gaussian(rng, 2, 1);
    EXPECT_GT(local_cost(cp, x, u), 0.0);
    EXPECT_DOUBLE_EQ(local_cost(cp, -x, -u), local_cost(cp, x, u));
  }
}

TEST(CostParams, Validation) {
  EXPECT_THROW(CostParams(fx::scalar(-1.0), fx::scalar(1.0), 1.0), ContractError);
  EXPECT_THROW(CostParams(fx::scalar(1.0), fx::scalar(0.0), 1.0), ContractError);
  EXPECT_THROW(CostParams(fx::scalar(1.0), fx::scalar(1.0), 0.0), ContractError);
  EXPECT_THROW(CostParams(fx::scalar(1.0), fx::scalar(1.0), 1.5), ContractError);
  EXPECT_NO_THROW(CostParams(fx::scalar(1.0), fx::scalar(1.0), 1.0));
}

TEST(Rollout, ScalarNoInput) {
  const StateSpace ss(fx::scalar(0.5), fx::scalar(1.0));
  const Trajectory tr = rollout(ss, {fx::scalar(0.0)}, Vec::Ones(1), 3);
  ASSERT_EQ(tr.size(), 3u);
  EXPECT_EQ(tr[0].x(0), 1.0);
  EXPECT_EQ(tr[1].x(0), 0.5);
  EXPECT_EQ(tr[2].x(0), 0.25);
  for (const auto& t : tr) EXPECT_EQ(t.u(0), 0.0);
}

TEST(Rollout, ProbedDeterministic) {
  const StateSpace ss = fx::quadrotor();
  const LinearPolicy pol{fx::table_gains()[0]};
  Vec x0(4);
  x0 << 1, 2, 3, 4;
  for (auto kind : {ProbeKind::gaussian, ProbeKind::uniform, ProbeKind::sinusoid_mix}) {
    const ProbingConfig pc{0.3, kind, 99};
    const Trajectory a = rollout(ss, pol, x0, 50, pc);
    const Trajectory b = rollout(ss, pol, x0, 50, pc);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].u, b[k].u);
      EXPECT_EQ(a[k].x_next, b[k].x_next);
    }
    // Noise is really there.
    EXPECT_NE(a[5].u(0), pol.act(a[5].x)(0));
  }
}

TEST(Rollout, ProbeAmplitudeBounds) {
  ProbeGenerator uni({0.2, ProbeKind::uniform, 5}, 2, 4);
  ProbeGenerator sin({0.2, ProbeKind::sinusoid_mix, 5}, 2, 4);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_LE(uni.next().cwiseAbs().maxCoeff(), 0.2);
    // Normalized by 1/sqrt(#sinusoids): |n| <= amplitude * sqrt(2 nx).
    EXPECT_LE(sin.next().cwiseAbs().maxCoeff(), 0.2 * std::sqrt(8.0) + 1e-12);
  }
}

TEST(Rollout, StabilizingPolicyDecays) {
  const StateSpace ss = fx::quadrotor();
  for (const Mat& K : fx::table_gains()) {
    const LinearPolicy pol{K};
    const double r = closed_loop_radius(ss, pol);
    ASSERT_LT(r, 1.0);
    Vec x0(4);
    x0 << -10, 1, -1, 2;
    // Generous horizon from the measured radius (transient allowance 1e6).
    const int horizon = static_cast<int>(std::log(1e-6 / 1e6 / x0.norm()) / std::log(r)) + 1;
    const Trajectory tr = rollout(ss, pol, x0, horizon);
    EXPECT_LT(tr.back().x_next.norm(), 1e-6);
  }
}

TEST(IsStabilizing, Scalar) {
  const StateSpace ss(fx::scalar(1.0), fx::scalar(1.0));
  EXPECT_TRUE(is_stabilizing(ss, {fx::scalar(0.5)}));
  EXPECT_FALSE(is_stabilizing(ss, {fx::scalar(0.0)}));
}

TEST(IsStabilizing, TableGains) {
  const StateSpace ss = fx::quadrotor();
  const auto gains = fx::table_gains();
  EXPECT_TRUE(is_stabilizing(ss, {gains[0]}));
  for (const Mat& K : gains) EXPECT_TRUE(is_stabilizing(ss, {K}));
  EXPECT_FALSE(is_stabilizing(ss, {Mat::Zero(1, 4)}));
}
