#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "qlqr/linalg.hpp"

namespace qlqr {

/// Discrete-time plant x_{k+1} = A x_k + B u_k. Construction checks shapes and
/// controllability, so every StateSpace in the program is a valid LQR plant.
class StateSpace {
 public:
  StateSpace(Mat A, Mat B);

  const Mat& A() const { return A_; }
  const Mat& B() const { return B_; }
  int nx() const { return static_cast<int>(A_.rows()); }
  int nu() const { return static_cast<int>(B_.cols()); }

 private:
  Mat A_;
  Mat B_;
};

struct ContinuousStateSpace {
  Mat Ac;
  Mat Bc;
  double T = 0.0;  // seconds
};

/// Learning and Riccati need Q, R > 0. Evaluating a given policy only needs
/// Q, R >= 0, which callers request explicitly.
enum class Definiteness { positive, semidefinite };

class CostParams {
 public:
  CostParams(Mat Q, Mat R, double gamma,
             Definiteness d = Definiteness::positive);

  const Mat& Q() const { return Q_; }
  const Mat& R() const { return R_; }
  double gamma() const { return gamma_; }
  int nx() const { return static_cast<int>(Q_.rows()); }
  int nu() const { return static_cast<int>(R_.rows()); }
  Definiteness definiteness() const { return definiteness_; }

 private:
  Mat Q_;
  Mat R_;
  double gamma_;
  Definiteness definiteness_;
};

/// u = -K x.
struct LinearPolicy {
  Mat K;

  Vec act(const Vec& x) const { return -(K * x); }
};

enum class ProbeKind { gaussian, uniform, sinusoid_mix };

struct ProbingConfig {
  double amplitude = 0.0;
  ProbeKind kind = ProbeKind::gaussian;
  std::uint64_t seed = 0;
};

/// Deterministic probing-noise stream. gaussian: amplitude * N(0, 1);
/// uniform: amplitude * U(-1, 1); sinusoid_mix: amplitude times a normalized
/// sum of 2*nx sinusoids with incommensurate frequencies and seeded phases.
class ProbeGenerator {
 public:
  ProbeGenerator(const ProbingConfig& cfg, int nu, int nx);

  Vec next();

 private:
  ProbingConfig cfg_;
  int nu_;
  std::mt19937_64 rng_;
  std::vector<double> freqs_;
  Mat phases_;  // nu x freqs
  std::int64_t k_ = 0;
};

struct Transition {
  Vec x;
  Vec u;
  Vec x_next;
};

using Trajectory = std::vector<Transition>;

/// Bilinear transform: A = (I - T/2 Ac)^-1 (I + T/2 Ac), B = (I - T/2 Ac)^-1 T Bc.
StateSpace tustin_discretize(const ContinuousStateSpace& cs);

Vec step(const StateSpace& ss, const Vec& x, const Vec& u);

/// x' Q x + u' R u.
double local_cost(const CostParams& cp, const Vec& x, const Vec& u);

Trajectory rollout(const StateSpace& ss, const LinearPolicy& pol,
                   const Vec& x0, int steps,
                   const std::optional<ProbingConfig>& probe = std::nullopt);

int controllability_rank(const Mat& A, const Mat& B);

inline constexpr double kStabilityMargin = 1e-9;

/// Oracle-side: spectral radius of A - BK below 1 - margin.
bool is_stabilizing(const StateSpace& ss, const LinearPolicy& pol,
                    double margin = kStabilityMargin);

double closed_loop_radius(const StateSpace& ss, const LinearPolicy& pol);

/// What the learner is allowed to see of a plant: dimensions and rollouts.
class Plant {
 public:
  virtual ~Plant() = default;
  virtual int nx() const = 0;
  virtual int nu() const = 0;
  virtual Trajectory rollout(
      const LinearPolicy& pol, const Vec& x0, int steps,
      const std::optional<ProbingConfig>& probe) const = 0;
};

class SimulatedPlant final : public Plant {
 public:
  explicit SimulatedPlant(StateSpace ss) : ss_(std::move(ss)) {}

  int nx() const override { return ss_.nx(); }
  int nu() const override { return ss_.nu(); }
  Trajectory rollout(const LinearPolicy& pol, const Vec& x0, int steps,
                     const std::optional<ProbingConfig>& probe) const override {
    return qlqr::rollout(ss_, pol, x0, steps, probe);
  }

 private:
  StateSpace ss_;
};

}  // namespace qlqr
