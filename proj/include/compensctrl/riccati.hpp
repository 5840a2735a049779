// Copyright 2026 The compensctrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Algebraic Riccati equation solvers.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "compensctrl/errors.hpp"

namespace compensctrl {

struct DareOptions {
  /// Stop when ||P_next - P||_inf <= tolerance * max(1, ||P||_inf).
  double tolerance = 1e-10;
  int max_iterations = 10000;
  /// Consecutive growing steps that count as divergence.
  int divergence_window = 100;
};

struct DareSolution {
  Eigen::MatrixXd P;
  Eigen::MatrixXd K;  // u = -K x
  int iterations = 0;
  double residual = 0.0;  // ||DARE residual||_inf at P
};

inline double max_abs(const Eigen::MatrixXd& M) {
  return M.size() ? M.cwiseAbs().maxCoeff() : 0.0;
}

/// Residual of
///   A'PA - P - (A'PB + S)(R + B'PB)^-1 (B'PA + S') + Q.
inline Eigen::MatrixXd dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                     const Eigen::MatrixXd& S, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd PB = P * B;
  const Eigen::MatrixXd cross = A.transpose() * PB + S;
  const Eigen::MatrixXd gram = R + B.transpose() * PB;
  return A.transpose() * P * A - P - cross * gram.ldlt().solve(cross.transpose()) + Q;
}

namespace detail {

// Solves M X = B in place (B <- X) by Gauss-Jordan elimination with
// partial pivoting. For the 12 x 12 systems of the doubling step this is
// several times faster than a factorization followed by triangular solves.
template <typename Mat, typename Rhs>
bool gauss_jordan_solve(Mat& M, Rhs& B) {
  const Eigen::Index n = M.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index p;
    const double pivot_abs = M.col(c).tail(n - c).cwiseAbs().maxCoeff(&p);
    if (!(pivot_abs > 0.0)) return false;
    p += c;
    if (p != c) {
      M.row(p).swap(M.row(c));
      B.row(p).swap(B.row(c));
    }
    const double inv = 1.0 / M(c, c);
    M.row(c) *= inv;
    B.row(c) *= inv;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = M(r, c);
      if (f == 0.0) continue;
      M.row(r) -= f * M.row(c);
      B.row(r) -= f * B.row(c);
    }
  }
  return true;
}

// Doubling iteration on (A, G, H); returns the iteration count and leaves
// the converged H in P. Fixed-size Mat avoids heap traffic for the common
// 12-state case.
template <typename Mat>
int doubling(const Eigen::MatrixXd& A0, const Eigen::MatrixXd& G0, const Eigen::MatrixXd& H0,
             const DareOptions& opt, Mat& P) {
  using Wide = Eigen::Matrix<double, Mat::RowsAtCompileTime,
                             Mat::ColsAtCompileTime == Eigen::Dynamic ? Eigen::Dynamic
                                                                      : 2 * Mat::ColsAtCompileTime>;
  const Eigen::Index n = A0.rows();
  Mat Ak = A0, Gk = G0, Hk = H0;
  Wide rhs(n, 2 * n);
  const Mat I = Mat::Identity(A0.rows(), A0.cols());
  double prev_diff = std::numeric_limits<double>::infinity();
  int growing = 0;
  int it = 0;
  for (;;) {
    if (++it > opt.max_iterations) {
      throw RiccatiDivergenceError("Riccati iteration did not converge in " +
                                   std::to_string(opt.max_iterations) + " iterations");
    }
    // Small fixed-size operands: coefficient-based products beat the
    // blocked GEMM path.
    rhs << Ak, Gk;
    Mat W = I + Gk.lazyProduct(Hk);
    if (!gauss_jordan_solve(W, rhs)) {
      throw RiccatiDivergenceError("Riccati iteration hit a singular intermediate matrix");
    }
    const Wide& X = rhs;
    const Mat X1 = X.leftCols(n);
    const Mat X2 = X.rightCols(n);
    const Mat HX1 = Hk.lazyProduct(X1);
    Mat H_next = Hk + Ak.transpose().lazyProduct(HX1);
    H_next = 0.5 * (H_next + H_next.transpose()).eval();
    const Mat AX2 = Ak.lazyProduct(X2);
    const Mat G_next = Gk + AX2.lazyProduct(Ak.transpose());
    const Mat A_next = Ak.lazyProduct(X1);

    const double diff = (H_next - Hk).cwiseAbs().maxCoeff();
    if (!std::isfinite(diff) || !H_next.allFinite()) {
      throw RiccatiDivergenceError("Riccati iteration diverged: a penalized mode is not stabilizable");
    }
    growing = diff > prev_diff ? growing + 1 : 0;
    if (growing >= opt.divergence_window) {
      throw RiccatiDivergenceError("Riccati iteration residual grew for " +
                                   std::to_string(growing) +
                                   " consecutive iterations: a penalized mode is not stabilizable");
    }
    prev_diff = diff;
    Ak = A_next;
    Gk = 0.5 * (G_next + G_next.transpose());
    Hk = H_next;
    if (diff <= opt.tolerance * std::max(1.0, Hk.cwiseAbs().maxCoeff())) break;
  }
  P = Hk;
  return it;
}

}  // namespace detail

/// Discrete algebraic Riccati equation for x+ = A x + B u with stage cost
/// x'Qx + u'Ru + 2x'Su.
///
/// The Riccati recursion P <- A'PA - ... + Q started from P = 0 is iterated
/// in doubling form: iterate k holds the value of the plain recursion after
/// 2^k steps, so convergence is quadratic even when the closed loop is
/// slow (as with small sampling steps). Modes that are neither controllable
/// nor penalized keep their open-loop eigenvalue.
inline DareSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                               const Eigen::MatrixXd& S, const DareOptions& opt = {}) {
  using Eigen::MatrixXd;
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m ||
      R.cols() != m || S.rows() != n || S.cols() != m) {
    throw DimensionError("solve_dare: inconsistent matrix dimensions");
  }
  Eigen::LLT<MatrixXd> r_llt(R);
  if (r_llt.info() != Eigen::Success) throw SingularMatrixError("input cost R must be positive definite");

  const MatrixXd Rinv_St = r_llt.solve(S.transpose());
  MatrixXd H0 = Q - S * Rinv_St;
  H0 = 0.5 * (H0 + H0.transpose()).eval();
  const MatrixXd A0 = A - B * Rinv_St;
  const MatrixXd G0 = B * r_llt.solve(B.transpose());

  MatrixXd P;
  int it = 0;
  if (n == 12) {
    using M12 = Eigen::Matrix<double, 12, 12>;
    M12 P12;
    it = detail::doubling<M12>(A0, G0, H0, opt, P12);
    P = P12;
  } else {
    it = detail::doubling<MatrixXd>(A0, G0, H0, opt, P);
  }

  DareSolution sol;
  sol.P = std::move(P);
  sol.iterations = it;
  const MatrixXd PB = sol.P * B;
  sol.K = (R + B.transpose() * PB).ldlt().solve(PB.transpose() * A + S.transpose());
  sol.residual = max_abs(dare_residual(A, B, Q, R, S, sol.P));
  return sol;
}

inline DareSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  return solve_dare(A, B, Q, R, Eigen::MatrixXd::Zero(A.rows(), B.cols()));
}

/// Stabilizing solution X of the continuous Riccati equation
///   A X + X A' - X G X + Q = 0        (G, Q symmetric PSD)
/// through the matrix sign function of the associated Hamiltonian.
inline Eigen::MatrixXd solve_filter_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& G,
                                         const Eigen::MatrixXd& Q) {
  using Eigen::MatrixXd;
  const Eigen::Index n = A.rows();
  MatrixXd Z(2 * n, 2 * n);
  Z << A.transpose(), -G, -Q, -A;

  for (int it = 0; it < 200; ++it) {
    Eigen::PartialPivLU<MatrixXd> lu(Z);
    const double logdet = lu.matrixLU().diagonal().array().abs().log().sum();
    if (!std::isfinite(logdet)) {
      throw SingularMatrixError("Hamiltonian has eigenvalues on the imaginary axis");
    }
    const double c = std::exp(-logdet / static_cast<double>(2 * n));
    const MatrixXd Z_next = 0.5 * (c * Z + lu.inverse() / c);
    const double change = (Z_next - Z).lpNorm<1>();
    Z = Z_next;
    if (change <= 1e-13 * Z.lpNorm<1>()) break;
  }
  MatrixXd lhs(2 * n, n), rhs(2 * n, n);
  lhs << Z.topRightCorner(n, n), Z.bottomRightCorner(n, n) + MatrixXd::Identity(n, n);
  rhs << Z.topLeftCorner(n, n) + MatrixXd::Identity(n, n), Z.bottomLeftCorner(n, n);
  MatrixXd X = lhs.colPivHouseholderQr().solve(-rhs);
  return 0.5 * (X + X.transpose());
}

}  // namespace compensctrl
