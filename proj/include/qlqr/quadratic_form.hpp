#pragma once

#include "qlqr/linalg.hpp"

namespace qlqr {

/// Q(x, u) = [x; u]' H [x; u] with H partitioned as
/// [[H_xx, H_xu], [H_xu', H_uu]].
class QuadraticForm {
 public:
  QuadraticForm(Mat H, int nx, int nu);

  static QuadraticForm zero(int nx, int nu) {
    return QuadraticForm(Mat::Zero(nx + nu, nx + nu), nx, nu);
  }

  const Mat& H() const { return H_; }
  int nx() const { return nx_; }
  int nu() const { return nu_; }

  Mat Hxx() const { return H_.topLeftCorner(nx_, nx_); }
  Mat Hxu() const { return H_.topRightCorner(nx_, nu_); }
  Mat Huu() const { return H_.bottomRightCorner(nu_, nu_); }

  double operator()(const Vec& x, const Vec& u) const;

 private:
  Mat H_;
  int nx_;
  int nu_;
};

}  // namespace qlqr
