#pragma once

#include <random>
#include <vector>

#include "qlqr/lti.hpp"
#include "qlqr/oracle.hpp"

namespace fx {

using qlqr::Mat;
using qlqr::Vec;

inline qlqr::ContinuousStateSpace quadrotor_continuous() {
  qlqr::ContinuousStateSpace cs;
  cs.Ac = Mat::Zero(4, 4);
  cs.Ac(0, 1) = 1.0;
  cs.Ac(1, 1) = -0.1;
  cs.Ac(1, 2) = 10.0;
  cs.Ac(2, 3) = 1.0;
  cs.Bc = Mat::Zero(4, 1);
  cs.Bc(3, 0) = 4.35;
  cs.T = 0.1;
  return cs;
}

inline qlqr::StateSpace quadrotor() {
  return qlqr::tustin_discretize(quadrotor_continuous());
}

inline qlqr::CostParams quadrotor_cost(double R = 100.0) {
  Mat Q = Mat::Zero(4, 4);
  Q.diagonal() << 0.01, 1.0, 1.0, 10.0;
  return {Q, Mat::Constant(1, 1, R), 1.0};
}

inline std::vector<Mat> table_gains() {
  const double rows[5][4] = {{0.082, 0.169, 1.592, 0.838},
                             {0.236, 0.420, 2.978, 1.156},
                             {0.626, 0.998, 5.578, 1.660},
                             {1.851, 1.709, 7.491, 1.858},
                             {0.701, 0.781, 4.380, 1.379}};
  std::vector<Mat> out;
  for (const auto& r : rows) {
    Mat K(1, 4);
    K << r[0], r[1], r[2], r[3];
    out.push_back(K);
  }
  return out;
}

inline Mat scalar(double v) { return Mat::Constant(1, 1, v); }

inline qlqr::StateSpace scalar_plant(double a = 0.5, double b = 1.0) {
  return {scalar(a), scalar(b)};
}

inline qlqr::CostParams scalar_cost(double gamma = 1.0) {
  return {scalar(1.0), scalar(1.0), gamma};
}

inline Mat gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g;
  return Mat::NullaryExpr(r, c, [&] { return g(rng); });
}

inline Mat random_pd(std::mt19937_64& rng, int n, double floor = 0.1) {
  const Mat S = gaussian(rng, n, n);
  return S * S.transpose() / n + floor * Mat::Identity(n, n);
}

struct Case {
  qlqr::StateSpace ss;
  qlqr::CostParams cp;
  qlqr::LinearPolicy pol;
};

// Random controllable plant (not necessarily open-loop stable) with a random
// stabilizing gain: the LQR gain for unrelated random weights, perturbed.
inline Case random_case(std::mt19937_64& rng, int nx, int nu, double gamma = 1.0) {
  for (;;) {
    Mat A = gaussian(rng, nx, nx);
    A *= 1.2 / std::max(qlqr::spectral_radius(A), 1e-3);
    const Mat B = gaussian(rng, nx, nu);
    if (qlqr::controllability_rank(A, B) < nx) continue;
    const qlqr::StateSpace ss(A, B);
    const qlqr::CostParams design(random_pd(rng, nx), random_pd(rng, nu), 1.0);
    Mat K = qlqr::riccati_lqr(ss, design).policy.K;
    K += 0.05 * gaussian(rng, nu, nx);
    const qlqr::LinearPolicy pol{K};
    if (std::sqrt(gamma) * qlqr::closed_loop_radius(ss, pol) > 0.95) continue;
    return {ss, qlqr::CostParams(random_pd(rng, nx), random_pd(rng, nu), gamma), pol};
  }
}

inline double rel(const Mat& a, const Mat& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace fx
