#include "qlqr/quadratic_form.hpp"

#include "qlqr/errors.hpp"

namespace qlqr {

QuadraticForm::QuadraticForm(Mat H, int nx, int nu)
    : H_(std::move(H)), nx_(nx), nu_(nu) {
  if (nx < 1 || nu < 1)
    throw ContractError("QuadraticForm: partition sizes must be >= 1");
  require_shape(H_, nx + nu, nx + nu, "QuadraticForm: H");
  H_ = symmetrize(H_);
}

double QuadraticForm::operator()(const Vec& x, const Vec& u) const {
  require_size(x, nx_, "QuadraticForm: x");
  require_size(u, nu_, "QuadraticForm: u");
  Vec z(nx_ + nu_);
  z << x, u;
  return z.dot(H_ * z);
}

}  // namespace qlqr
