// ADMM for the dual training problem
//
//   min  sum_i (<Z+ - Z-, W_i> - y_i)^2 + <T, Z+ + Z->
//   s.t. <C, Z+> = <C, Z-> = 0,  Z+, Z- PSD   ((n+1) x (n+1) lifted blocks)
//
// with W_i = [[a x x' + c I, b/2 x], [b/2 x', 0]], T = beta [[I, 0], [0, 0]]
// and C = [[-I, 0], [0, 1]] (corner equals the trace of the leading block).
//
// The x-block is the structured parametrization theta (Z1 upper entries and
// Z2 per cone), on which the structure holds exactly; the z-block is the pair
// of PSD cones. Labels are normalized by max |y| internally.
//
// Inputs are whitened, x = L xt with L L' = X'X / N. The congruence
// Zt = diag(L', 1) Z diag(L, 1) preserves the cones; tr Z1 becomes <M, Zt1>
// with M = L^-1 L^-T, which enters W_i (c term), T and C.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

#include "qlqr/errors.hpp"
#include "qlqr/kernels.hpp"
#include "qlqr/qnn.hpp"

namespace qlqr {

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal:
      return "optimal";
    case SdpStatus::max_iter:
      return "max_iter";
    case SdpStatus::infeasible:
      return "infeasible";
  }
  return "unknown";
}

namespace {

double frob_dot(const Mat& a, const Mat& b) {
  return (a.array() * b.array()).sum();
}

// Coefficients c of <S, M> = c . svec(S) for symmetric S.
Vec svec_coeffs(const Mat& M) {
  const int r = static_cast<int>(M.rows());
  Vec c(svec_size(r));
  int k = 0;
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) c(k++) = (i == j ? 1.0 : 2.0) * M(i, j);
  return c;
}

struct Problem {
  int n = 0;   // input dimension
  int m = 0;   // lifted dimension n + 1
  int s1 = 0;  // svec_size(n)
  int p1 = 0;  // per-cone parameter count
  ActivationCoeffs coeffs;
  Mat X;        // whitened inputs
  Mat L, Linv;  // x = L x_t
  Mat M;        // trace metric Linv Linv'
  Vec mc;       // svec_coeffs(M)
  Vec y;        // normalized labels
  double beta;  // normalized
  double scale;
  Mat Gc;       // N x p1 prediction rows of one cone
  Mat Gamma;    // Gc' Gc
  Vec g;        // Gc' y
  Mat Lc;       // m^2 x p1 lifting map
  Mat LtLc;     // Lc' Lc
  Vec tc;       // 1 on Z1 diagonal coordinates
};

Problem assemble(const ConeProgram& cp) {
  Problem pr;
  pr.n = static_cast<int>(cp.X.cols());
  pr.m = pr.n + 1;
  pr.s1 = svec_size(pr.n);
  pr.p1 = pr.s1 + pr.n;
  pr.coeffs = cp.coeffs;
  {
    const double N = static_cast<double>(cp.X.rows());
    Mat sigma = cp.X.transpose() * cp.X / N;
    const double reg = 1e-12 * std::max(sigma.trace() / pr.n, DBL_MIN);
    sigma.diagonal().array() += reg;
    Eigen::LLT<Mat> ch(sigma);
    if (ch.info() == Eigen::Success) {
      pr.L = ch.matrixL();
      pr.Linv = pr.L.triangularView<Eigen::Lower>().solve(Mat::Identity(pr.n, pr.n));
    } else {
      pr.L = pr.Linv = Mat::Identity(pr.n, pr.n);
    }
  }
  pr.X = cp.X * pr.Linv.transpose();
  pr.M = symmetrize(pr.Linv * pr.Linv.transpose());
  pr.mc = svec_coeffs(pr.M);
  const double ymax = cp.y.size() ? cp.y.cwiseAbs().maxCoeff() : 0.0;
  pr.scale = ymax > 0.0 ? ymax : 1.0;
  pr.y = cp.y / pr.scale;
  pr.beta = cp.beta / pr.scale;

  const int n = pr.n;
  const Mat design = kernels::omp::quadratic_design(pr.X);
  pr.Gc.resize(pr.X.rows(), pr.p1);
  pr.Gc.leftCols(pr.s1) = cp.coeffs.a * design;
  pr.Gc.leftCols(pr.s1).rowwise() += cp.coeffs.c * pr.mc.transpose();
  pr.Gc.rightCols(n) = cp.coeffs.b * pr.X;
  pr.tc = Vec::Zero(pr.p1);
  pr.tc.head(pr.s1) = pr.mc;
  pr.Gamma = kernels::omp::gram(pr.Gc);
  pr.g = kernels::omp::gram_rhs(pr.Gc, pr.y);

  const int m = pr.m;
  pr.Lc = Mat::Zero(m * m, pr.p1);
  auto at = [m](int r, int c) { return c * m + r; };
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j, ++k) {
      pr.Lc(at(i, j), k) = 1.0;
      pr.Lc(at(j, i), k) = 1.0;
      pr.Lc(at(n, n), k) = pr.mc(k);
    }
  for (int j = 0; j < n; ++j) {
    pr.Lc(at(j, n), pr.s1 + j) = 1.0;
    pr.Lc(at(n, j), pr.s1 + j) = 1.0;
  }
  pr.LtLc = pr.Lc.transpose() * pr.Lc;
  return pr;
}

Mat lift(const Problem& pr, const Vec& theta_c) {
  const Vec v = pr.Lc * theta_c;
  return Eigen::Map<const Mat>(v.data(), pr.m, pr.m);
}

Mat project_psd(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
  const Vec lam = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * lam.asDiagonal() *
                    es.eigenvectors().transpose());
}

struct Point {
  Mat Zp, Zm;  // lifted, normalized scale
  double objective = INFINITY;
  double primal_residual = INFINITY;
  double dual_residual = INFINITY;
  bool certified = false;
};

// W_i as a dense lifted matrix.
Mat sample_matrix(const Problem& pr, Eigen::Index i) {
  const int n = pr.n;
  const Vec x = pr.X.row(i).transpose();
  Mat W = Mat::Zero(pr.m, pr.m);
  W.topLeftCorner(n, n) = pr.coeffs.a * x * x.transpose();
  W.topLeftCorner(n, n) += pr.coeffs.c * pr.M;
  W.topRightCorner(n, 1) = 0.5 * pr.coeffs.b * x;
  W.bottomLeftCorner(1, n) = 0.5 * pr.coeffs.b * x.transpose();
  return W;
}

Mat structure_matrix(const Problem& pr) {
  Mat C = Mat::Zero(pr.m, pr.m);
  C.topLeftCorner(pr.n, pr.n) = -pr.M;
  C(pr.n, pr.n) = 1.0;
  return C;
}

Mat trace_matrix(const Problem& pr) {
  Mat T = Mat::Zero(pr.m, pr.m);
  T.topLeftCorner(pr.n, pr.n) = pr.beta * pr.M;
  return T;
}

Vec predictions(const Problem& pr, const Mat& Zp, const Mat& Zm) {
  const Mat D = Zp - Zm;
  const int n = pr.n;
  const Mat D1 = D.topLeftCorner(n, n);
  const Vec D2 = D.topRightCorner(n, 1);
  const double tr = frob_dot(pr.M, D1);
  Vec yhat(pr.X.rows());
  for (Eigen::Index i = 0; i < pr.X.rows(); ++i) {
    const Vec x = pr.X.row(i).transpose();
    yhat(i) = pr.coeffs.a * x.dot(D1 * x) + pr.coeffs.b * x.dot(D2) +
              pr.coeffs.c * tr;
  }
  return yhat;
}

double lifted_objective(const Problem& pr, const Mat& Zp, const Mat& Zm) {
  const Vec r = predictions(pr, Zp, Zm) - pr.y;
  const int n = pr.n;
  return r.squaredNorm() +
         pr.beta * (frob_dot(pr.M, Zp.topLeftCorner(n, n)) +
                    frob_dot(pr.M, Zm.topLeftCorner(n, n)));
}

Mat support(const Mat& S, double thresh) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(S));
  std::vector<int> keep;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > thresh) keep.push_back(i);
  Mat V(S.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    V.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
  return V;
}

// Multiplier for the structure row maximizing lambda_min(G0 + mu C); the map
// is concave in mu, so golden-section search suffices.
double best_multiplier(const Mat& G0, const Mat& C) {
  auto f = [&](double mu) { return min_eigenvalue(G0 + mu * C); };
  double span = 10.0 * (G0.norm() + 1e-300);
  double lo = -span, hi = span;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * span; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = f(x1);
    }
  }
  return 0.5 * (lo + hi);
}

// KKT check at a structure-feasible PSD point: builds the dual slacks
// Lambda = +-sum 2 r_i W_i + T + mu C and measures face stationarity and
// dual PSD violation against the data scale.
void certify(const Problem& pr, const Mat& Vp, const Mat& Vm, Point& pt,
             double tol) {
  const Vec r = predictions(pr, pt.Zp, pt.Zm) - pr.y;
  Mat Gsum = Mat::Zero(pr.m, pr.m);
  Mat Ysum = Mat::Zero(pr.m, pr.m);
  for (Eigen::Index i = 0; i < pr.X.rows(); ++i) {
    const Mat W = sample_matrix(pr, i);
    Gsum += 2.0 * r(i) * W;
    Ysum += 2.0 * pr.y(i) * W;
  }
  const Mat T = trace_matrix(pr);
  const Mat C = structure_matrix(pr);
  // Relative to the gradient terms that cancel at the optimum; the label
  // scale only enters as a floor (exact fits have Gsum ~ 0 and T = 0).
  const double scale =
      std::max({Gsum.norm(), T.norm(), 1e-6 * Ysum.norm(), DBL_MIN});

  double worst = 0.0;
  auto check = [&](const Mat& G0, const Mat& V) {
    double mu;
    Mat VCV = V.transpose() * C * V;
    if (V.cols() > 0 && VCV.norm() > 1e-12) {
      const Mat VGV = V.transpose() * G0 * V;
      mu = -frob_dot(VGV, VCV) / VCV.squaredNorm();
    } else {
      mu = best_multiplier(G0, C);
    }
    const Mat Lambda = G0 + mu * C;
    const double stat =
        V.cols() > 0 ? (V.transpose() * Lambda * V).norm() : 0.0;
    const double psd = std::max(0.0, -min_eigenvalue(Lambda));
    worst = std::max({worst, stat / scale, psd / scale});
  };
  check(Gsum + T, Vp);
  check(-Gsum + T, Vm);
  pt.dual_residual = worst;
  pt.certified = worst <= tol;
}

// Equality-constrained least squares restricted to Z+- = V S V' on the
// current eigen-supports, with a tiny proximal term toward the ADMM point.
std::optional<Point> polish(const Problem& pr, const Mat& Sp, const Mat& Sm,
                            const Mat& Vp, const Mat& Vm, double tol) {
  const int rp = static_cast<int>(Vp.cols());
  const int rm = static_cast<int>(Vm.cols());
  const int qp = svec_size(rp), qm = svec_size(rm);
  const int q = qp + qm;
  const Mat C = structure_matrix(pr);
  const Mat T = trace_matrix(pr);

  Point pt;
  if (q == 0) {
    pt.Zp = Mat::Zero(pr.m, pr.m);
    pt.Zm = Mat::Zero(pr.m, pr.m);
  } else {
    const Eigen::Index N = pr.X.rows();
    Mat F(N, q);
    for (Eigen::Index i = 0; i < N; ++i) {
      const Mat W = sample_matrix(pr, i);
      if (qp) F.row(i).head(qp) = svec_coeffs(Vp.transpose() * W * Vp).transpose();
      if (qm) F.row(i).tail(qm) = -svec_coeffs(Vm.transpose() * W * Vm).transpose();
    }
    Vec tau(q), s0(q);
    std::vector<Vec> eq_rows;
    if (qp) {
      tau.head(qp) = svec_coeffs(Vp.transpose() * T * Vp);
      s0.head(qp) = svec(Vp.transpose() * Sp * Vp);
      Vec row = Vec::Zero(q);
      row.head(qp) = svec_coeffs(Vp.transpose() * C * Vp);
      if (row.norm() > 1e-12) eq_rows.push_back(row);
    }
    if (qm) {
      tau.tail(qm) = svec_coeffs(Vm.transpose() * T * Vm);
      s0.tail(qm) = svec(Vm.transpose() * Sm * Vm);
      Vec row = Vec::Zero(q);
      row.tail(qm) = svec_coeffs(Vm.transpose() * C * Vm);
      if (row.norm() > 1e-12) eq_rows.push_back(row);
    }
    const Mat FtF = F.transpose() * F;
    const double delta = 1e-10 * (2.0 * FtF.trace() / q + 1e-300);
    const int ne = static_cast<int>(eq_rows.size());
    Mat K = Mat::Zero(q + ne, q + ne);
    K.topLeftCorner(q, q) = 2.0 * FtF + 2.0 * delta * Mat::Identity(q, q);
    for (int e = 0; e < ne; ++e) {
      K.block(q + e, 0, 1, q) = eq_rows[e].transpose();
      K.block(0, q + e, q, 1) = eq_rows[e];
    }
    const Eigen::FullPivLU<Mat> lu(K);
    const Vec base = 2.0 * F.transpose() * pr.y - tau;
    // Proximal-point refinement: the fixed point is the exact face optimum
    // whenever it is unique, and the prox keeps null directions bounded.
    // Null directions stay at s0; others contract by delta / (sigma^2 + delta).
    Vec sol = s0;
    for (int pass = 0; pass < 50; ++pass) {
      Vec rhs = Vec::Zero(q + ne);
      rhs.head(q) = base + 2.0 * delta * sol.head(q);
      Vec next = lu.solve(rhs);
      if (!next.allFinite()) return std::nullopt;
      const double step = (next.head(q) - sol.head(q)).norm();
      sol = std::move(next);
      if (pass >= 3 && step <= 1e-15 * sol.head(q).norm()) break;
    }
    Mat Spo = qp ? smat(sol.head(qp), rp) : Mat(0, 0);
    Mat Smo = qm ? smat(sol.segment(qp, qm), rm) : Mat(0, 0);
    auto psd_ok = [](const Mat& S) {
      if (S.size() == 0) return true;
      return min_eigenvalue(S) >= -1e-10 * (1.0 + max_abs_eigenvalue(S));
    };
    if (!psd_ok(Spo) || !psd_ok(Smo)) return std::nullopt;
    pt.Zp = qp ? Mat(symmetrize(Vp * Spo * Vp.transpose())) : Mat(Mat::Zero(pr.m, pr.m));
    pt.Zm = qm ? Mat(symmetrize(Vm * Smo * Vm.transpose())) : Mat(Mat::Zero(pr.m, pr.m));
  }
  const double viol = std::max(std::abs(frob_dot(C, pt.Zp)) / (1.0 + pt.Zp.norm()),
                               std::abs(frob_dot(C, pt.Zm)) / (1.0 + pt.Zm.norm()));
  if (viol > 1e-10) return std::nullopt;
  pt.primal_residual = viol;
  pt.objective = lifted_objective(pr, pt.Zp, pt.Zm);
  certify(pr, Vp, Vm, pt, tol);
  return pt;
}

// Faces implied by the sign split of D1 = Z1+ - Z1-: Z+- = [[D1+-, 0], [0, <M, D1+->]].
std::pair<Mat, Mat> sign_faces(const Problem& pr, const Mat& Sp, const Mat& Sm,
                               double thresh_rel) {
  const int n = pr.n;
  Eigen::SelfAdjointEigenSolver<Mat> es(
      symmetrize(Sp.topLeftCorner(n, n) - Sm.topLeftCorner(n, n)));
  const Vec& lam = es.eigenvalues();
  const double cut = thresh_rel * lam.cwiseAbs().maxCoeff();
  std::vector<int> pos, neg;
  for (int i = 0; i < n; ++i) {
    if (lam(i) > cut) pos.push_back(i);
    else if (lam(i) < -cut) neg.push_back(i);
  }
  auto build = [&](const std::vector<int>& idx) {
    if (idx.empty()) return Mat(pr.m, 0);
    Mat V = Mat::Zero(pr.m, static_cast<Eigen::Index>(idx.size()) + 1);
    for (std::size_t j = 0; j < idx.size(); ++j)
      V.col(static_cast<Eigen::Index>(j)).head(n) = es.eigenvectors().col(idx[j]);
    V(n, V.cols() - 1) = 1.0;
    return V;
  };
  return {build(pos), build(neg)};
}

// Local refinement in factor form Z1+- = G G' (b = 0, so Z2 = 0 is optimal).
// Face polishing keeps the ADMM eigenvectors; this also corrects rotations.
std::optional<Point> factor_refine(const Problem& pr, const Mat& Zp0,
                                   const Mat& Zm0, double cut_rel, double tol) {
  if (pr.coeffs.b != 0.0) return std::nullopt;
  const int n = pr.n;
  const Eigen::Index N = pr.X.rows();
  Eigen::SelfAdjointEigenSolver<Mat> es(
      symmetrize(Zp0.topLeftCorner(n, n) - Zm0.topLeftCorner(n, n)));
  const Vec& lam = es.eigenvalues();
  const double cut = cut_rel * lam.cwiseAbs().maxCoeff();
  std::vector<int> pos, neg;
  for (int i = 0; i < n; ++i) {
    if (lam(i) > cut) pos.push_back(i);
    else if (lam(i) < -cut) neg.push_back(i);
  }
  const int rp = static_cast<int>(pos.size()), rm = static_cast<int>(neg.size());
  if (rp + rm == 0) return std::nullopt;
  Mat Gp(n, rp), Gm(n, rm);
  for (int j = 0; j < rp; ++j) Gp.col(j) = es.eigenvectors().col(pos[j]) * std::sqrt(lam(pos[j]));
  for (int j = 0; j < rm; ++j) Gm.col(j) = es.eigenvectors().col(neg[j]) * std::sqrt(-lam(neg[j]));

  const int np = n * rp, nv = n * (rp + rm);
  std::vector<Mat> A(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i) {
    const Vec x = pr.X.row(i).transpose();
    A[static_cast<std::size_t>(i)] = pr.coeffs.a * x * x.transpose() + pr.coeffs.c * pr.M;
  }
  auto resid = [&](const Mat& P, const Mat& Q) {
    const Mat D = P * P.transpose() - Q * Q.transpose();
    Vec r(N);
    for (Eigen::Index i = 0; i < N; ++i) r(i) = frob_dot(A[static_cast<std::size_t>(i)], D) - pr.y(i);
    return r;
  };
  auto f = [&](const Mat& P, const Mat& Q) {
    return resid(P, Q).squaredNorm() +
           pr.beta * (frob_dot(pr.M, P * P.transpose()) + frob_dot(pr.M, Q * Q.transpose()));
  };
  auto vec_of = [](const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); };

  double fval = f(Gp, Gm);
  double mu = 1e-6;
  for (int it = 0; it < 100; ++it) {
    const Vec r = resid(Gp, Gm);
    Mat J(N, nv);
    for (Eigen::Index i = 0; i < N; ++i) {
      const Mat& Ai = A[static_cast<std::size_t>(i)];
      if (rp) J.row(i).head(np) = vec_of(Mat(2.0 * Ai * Gp)).transpose();
      if (rm) J.row(i).tail(nv - np) = vec_of(Mat(-2.0 * Ai * Gm)).transpose();
    }
    Vec grad = 2.0 * J.transpose() * r;
    Mat Hs = 2.0 * J.transpose() * J;
    if (pr.beta > 0.0) {
      if (rp) grad.head(np) += 2.0 * pr.beta * vec_of(Mat(pr.M * Gp));
      if (rm) grad.tail(nv - np) += 2.0 * pr.beta * vec_of(Mat(pr.M * Gm));
      for (int j = 0; j < rp + rm; ++j)
        Hs.block(j * n, j * n, n, n) += 2.0 * pr.beta * pr.M;
    }
    const double hscale = Hs.diagonal().cwiseAbs().maxCoeff() + DBL_MIN;
    if (grad.norm() <= 1e-15 * hscale * (vec_of(Gp).norm() + vec_of(Gm).norm() + 1.0)) break;
    bool accepted = false;
    for (int tries = 0; tries < 20 && !accepted; ++tries) {
      Mat Hd = Hs;
      Hd.diagonal().array() += mu * hscale;
      const Vec d = Hd.ldlt().solve(-grad);
      const Mat Pn = Gp + Eigen::Map<const Mat>(d.data(), n, rp);
      const Mat Qn = Gm + Eigen::Map<const Mat>(d.data() + np, n, rm);
      const double fn = f(Pn, Qn);
      if (fn <= fval) {
        accepted = fn < fval;
        Gp = Pn;
        Gm = Qn;
        fval = fn;
        mu = std::max(mu / 10.0, 1e-15);
        if (!accepted) tries = 20;
      } else {
        mu *= 10.0;
      }
    }
    if (!accepted) break;
  }

  Point pt;
  auto lifted = [&](const Mat& G) {
    Mat Z = Mat::Zero(pr.m, pr.m);
    if (G.cols()) Z.topLeftCorner(n, n) = symmetrize(G * G.transpose());
    Z(n, n) = frob_dot(pr.M, Z.topLeftCorner(n, n));
    return Z;
  };
  pt.Zp = lifted(Gp);
  pt.Zm = lifted(Gm);
  pt.primal_residual = 0.0;
  pt.objective = lifted_objective(pr, pt.Zp, pt.Zm);
  const auto [Vp, Vm] = sign_faces(pr, pt.Zp, pt.Zm, 1e-13);
  certify(pr, Vp, Vm, pt, tol);
  return pt;
}

std::optional<Point> try_polish(const Problem& pr, const Mat& Sp, const Mat& Sm,
                                double tol) {
  std::optional<Point> best;
  auto attempt = [&](const Mat& Vp, const Mat& Vm) {
    auto pt = polish(pr, Sp, Sm, Vp, Vm, tol);
    if (!pt) return false;
    if (pt->certified) {
      best = pt;
      // A loose face leaves ~tol-sized spurious eigenvalues; retry on the
      // sign split of the polished point and keep it only if it certifies.
      const auto [Tp, Tm] = sign_faces(pr, pt->Zp, pt->Zm, 1e-7);
      if (Tp.cols() + Tm.cols() < Vp.cols() + Vm.cols()) {
        auto tight = polish(pr, pt->Zp, pt->Zm, Tp, Tm, tol);
        if (tight && tight->certified) best = tight;
      }
      return true;
    }
    if (!best || pt->objective < best->objective) best = pt;
    return false;
  };
  const Mat empty(pr.m, 0);
  const double lam_max = std::max(max_abs_eigenvalue(Sp), max_abs_eigenvalue(Sm));
  for (double th : {1e-10, 1e-8, 1e-6, 1e-4}) {
    const auto [Fp, Fm] = sign_faces(pr, Sp, Sm, th);
    if (attempt(Fp, Fm)) return best;
    if (!(lam_max > 0.0)) continue;
    const Mat Vp = support(Sp, th * lam_max);
    const Mat Vm = support(Sm, th * lam_max);
    if (attempt(Vp, Vm)) return best;
    if (Vm.cols() && attempt(Vp, empty)) return best;
    if (Vp.cols() && attempt(empty, Vm)) return best;
  }
  const Mat& Rp = best ? best->Zp : Sp;
  const Mat& Rm = best ? best->Zm : Sm;
  for (double cut : {1e-7, 1e-10}) {
    auto pt = factor_refine(pr, Rp, Rm, cut, tol);
    if (pt && pt->certified) return pt;
  }
  return best;
}

// Lifted congruences between original and whitened coordinates.
Mat to_whitened(const Problem& pr, const Mat& Z) {
  Mat P = Mat::Identity(pr.m, pr.m);
  P.topLeftCorner(pr.n, pr.n) = pr.L.transpose();
  return symmetrize(P * Z * P.transpose());
}

Mat from_whitened(const Problem& pr, const Mat& Zt) {
  Mat P = Mat::Identity(pr.m, pr.m);
  P.topLeftCorner(pr.n, pr.n) = pr.Linv.transpose();
  return symmetrize(P * Zt * P.transpose());
}

SdpSolution to_solution(const Problem& pr, const Mat& Zp, const Mat& Zm) {
  const int n = pr.n;
  SdpSolution s;
  const Mat& Li = pr.Linv;
  s.Z1p = pr.scale * symmetrize(Li.transpose() * Zp.topLeftCorner(n, n) * Li);
  s.Z1m = pr.scale * symmetrize(Li.transpose() * Zm.topLeftCorner(n, n) * Li);
  s.Z2p = pr.scale * Li.transpose() * Zp.topRightCorner(n, 1);
  s.Z2m = pr.scale * Li.transpose() * Zm.topRightCorner(n, 1);
  return s;
}

}  // namespace

Mat SdpSolution::lifted_plus() const {
  const Eigen::Index n = Z1p.rows();
  Mat Z(n + 1, n + 1);
  Z.topLeftCorner(n, n) = Z1p;
  Z.topRightCorner(n, 1) = Z2p;
  Z.bottomLeftCorner(1, n) = Z2p.transpose();
  Z(n, n) = Z1p.trace();
  return Z;
}

Mat SdpSolution::lifted_minus() const {
  const Eigen::Index n = Z1m.rows();
  Mat Z(n + 1, n + 1);
  Z.topLeftCorner(n, n) = Z1m;
  Z.topRightCorner(n, 1) = Z2m;
  Z.bottomLeftCorner(1, n) = Z2m.transpose();
  Z(n, n) = Z1m.trace();
  return Z;
}

SdpSolution solve_sdp(const ConeProgram& problem, const SolverConfig& cfg,
                      SdpWarmStart* warm) {
  if (problem.X.rows() == 0)
    throw ContractError("solve_sdp: no samples");
  if (problem.y.size() != problem.X.rows())
    throw ContractError("solve_sdp: label count does not match inputs");
  if (!(problem.beta >= 0.0))
    throw ContractError("solve_sdp: beta must be >= 0");
  if (problem.coeffs.a == 0.0)
    throw ContractError("solve_sdp: activation coefficient a must be nonzero");
  if (!problem.X.allFinite() || !problem.y.allFinite())
    throw ContractError("solve_sdp: non-finite data");

  const Problem pr = assemble(problem);
  const int p1 = pr.p1;
  const int m2 = pr.m * pr.m;

  Mat GtG(2 * p1, 2 * p1);
  GtG << pr.Gamma, -pr.Gamma, -pr.Gamma, pr.Gamma;
  Vec Gty(2 * p1);
  Gty << pr.g, -pr.g;
  Vec t(2 * p1);
  t << pr.beta * pr.tc, pr.beta * pr.tc;
  Mat LtL = Mat::Zero(2 * p1, 2 * p1);
  LtL.topLeftCorner(p1, p1) = pr.LtLc;
  LtL.bottomRightCorner(p1, p1) = pr.LtLc;
  const double yy = pr.y.squaredNorm();

  auto objective = [&](const Vec& th) {
    return th.dot(GtG * th) - 2.0 * th.dot(Gty) + yy + t.dot(th);
  };

  double rho = 2.0 * pr.Gamma.trace() / pr.LtLc.trace() * cfg.rho_scale;
  if (!(rho > 1e-8)) rho = 1e-8;
  Mat Sp = Mat::Zero(pr.m, pr.m), Sm = Sp, Up = Sp, Um = Sp;
  const bool warm_started = warm && warm->rho > 0.0 &&
                            warm->S_plus.rows() == pr.m;
  if (warm_started) {
    const double f = warm->label_scale / pr.scale;
    Sp = f * to_whitened(pr, warm->S_plus);
    Sm = f * to_whitened(pr, warm->S_minus);
    Up = f * to_whitened(pr, warm->U_plus);
    Um = f * to_whitened(pr, warm->U_minus);
    rho = warm->rho;
  }

  SdpSolution out;
  Vec theta = Vec::Zero(2 * p1);
  std::optional<Point> final_point;
  int it = 0;
  double rp = INFINITY, rd = INFINITY;
  bool admm_converged = false;

  // A nearby previous solution usually sits on the right face already.
  if (warm_started && cfg.polish) {
    auto pt = try_polish(pr, Sp, Sm, cfg.tol);
    if (pt && pt->certified) final_point = pt;
  }

  auto vec_of = [m2](const Mat& M) { return Eigen::Map<const Vec>(M.data(), m2); };

  if (!final_point) {
    Eigen::LLT<Mat> llt(2.0 * GtG + rho * LtL);
    const double dual_floor = std::max({2.0 * Gty.norm(), t.norm(), DBL_MIN});
    bool tried_at_tol = false;
    for (it = 1; it <= cfg.max_iter; ++it) {
      Vec rhs = 2.0 * Gty - t;
      rhs.head(p1) += rho * pr.Lc.transpose() * (vec_of(Sp) - vec_of(Up));
      rhs.tail(p1) += rho * pr.Lc.transpose() * (vec_of(Sm) - vec_of(Um));
      theta = llt.solve(rhs);

      const Mat Xp = lift(pr, theta.head(p1));
      const Mat Xm = lift(pr, theta.tail(p1));
      const Mat Sp_prev = Sp, Sm_prev = Sm;
      Sp = project_psd(Xp + Up);
      Sm = project_psd(Xm + Um);
      Up += Xp - Sp;
      Um += Xm - Sm;

      const double xnorm = std::sqrt(Xp.squaredNorm() + Xm.squaredNorm());
      const double snorm = std::sqrt(Sp.squaredNorm() + Sm.squaredNorm());
      const double pnum =
          std::sqrt((Xp - Sp).squaredNorm() + (Xm - Sm).squaredNorm());
      const double pden = std::max(xnorm, snorm);
      rp = pden > DBL_MIN ? pnum / pden : 0.0;
      Vec ds(2 * p1), du(2 * p1);
      ds << pr.Lc.transpose() * (vec_of(Sp) - vec_of(Sp_prev)),
          pr.Lc.transpose() * (vec_of(Sm) - vec_of(Sm_prev));
      du << pr.Lc.transpose() * vec_of(Up), pr.Lc.transpose() * vec_of(Um);
      const double dnum = rho * ds.norm();
      const double dden = std::max(rho * du.norm(), dual_floor);
      rd = dnum > 0.0 ? dnum / dden : 0.0;

      if (cfg.record_history)
        out.history.push_back({it, rp, rd, objective(theta) * pr.scale * pr.scale});

      const double res = std::max(rp, rd);
      if (!cfg.polish && res <= cfg.tol) {
        admm_converged = true;
        break;
      }
      // With polishing, small residuals only trigger a certification attempt;
      // relative ADMM residuals are too coarse for labels that change by
      // parts in 1e10 between inner iterations.
      const bool polish_now =
          cfg.polish && ((res <= cfg.tol && !tried_at_tol) ||
                         (res < 1e-3 && it % 10 == 0));
      if (polish_now) {
        if (res <= cfg.tol) tried_at_tol = true;
        auto pt = try_polish(pr, Sp, Sm, cfg.tol);
        if (pt && pt->certified) {
          final_point = pt;
          break;
        }
      }
      if (res <= 1e-3 * cfg.tol) {
        admm_converged = true;
        break;
      }

      if (cfg.adapt_interval > 0 && it % cfg.adapt_interval == 0) {
        double factor = 1.0;
        if (rp > 10.0 * rd) factor = 2.0;
        else if (rd > 10.0 * rp) factor = 0.5;
        if (factor != 1.0) {
          rho *= factor;
          Up /= factor;
          Um /= factor;
          llt.compute(2.0 * GtG + rho * LtL);
        }
      }
    }
    if (it > cfg.max_iter) it = cfg.max_iter;
    if (!final_point && cfg.polish) {
      auto pt = try_polish(pr, Sp, Sm, cfg.tol);
      const double admm_obj = lifted_objective(pr, Sp, Sm);
      if (pt && (pt->certified ||
                 pt->objective <= admm_obj * (1.0 + 1e-6) + 1e-14 * (yy + 1.0)))
        final_point = pt;
    }
  }

  if (final_point) {
    out = [&] {
      SdpSolution s = to_solution(pr, final_point->Zp, final_point->Zm);
      s.history = std::move(out.history);
      return s;
    }();
    out.objective = final_point->objective * pr.scale * pr.scale;
    out.polished = true;
    if (final_point->certified) {
      out.status = SdpStatus::optimal;
      out.primal_residual = final_point->primal_residual;
      out.dual_residual = final_point->dual_residual;
    } else {
      out.status = admm_converged ? SdpStatus::optimal : SdpStatus::max_iter;
      out.primal_residual = rp;
      out.dual_residual = rd;
    }
  } else {
    auto hist = std::move(out.history);
    out = to_solution(pr, lift(pr, theta.head(p1)), lift(pr, theta.tail(p1)));
    out.history = std::move(hist);
    out.objective = objective(theta) * pr.scale * pr.scale;
    out.status = admm_converged ? SdpStatus::optimal : SdpStatus::max_iter;
    out.primal_residual = rp;
    out.dual_residual = rd;
  }
  if (!out.Z1p.allFinite() || !out.Z1m.allFinite())
    out.status = SdpStatus::infeasible;
  out.iterations = it;

  if (warm) {
    const Mat& wp = final_point ? final_point->Zp : Sp;
    const Mat& wm = final_point ? final_point->Zm : Sm;
    warm->S_plus = from_whitened(pr, wp);
    warm->S_minus = from_whitened(pr, wm);
    warm->U_plus = from_whitened(pr, Up);
    warm->U_minus = from_whitened(pr, Um);
    warm->rho = rho;
    warm->label_scale = pr.scale;
  }
  return out;
}

}  // namespace qlqr
