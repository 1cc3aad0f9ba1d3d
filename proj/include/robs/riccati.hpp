#pragma once

#include "robs/norms.hpp"

namespace robs
{

template<typename Scalar>
struct DareSolution
{
  Mat<Scalar> S;
  Mat<Scalar> F;
  Scalar residual = 0;
};

// S = A^T S A - A^T S B (R + B^T S B)^{-1} B^T S A + Q
template<typename Scalar>
Scalar dare_residual(
  const Mat<Scalar> & A, const Mat<Scalar> & B, const Mat<Scalar> & Q,
  const Mat<Scalar> & R, const Mat<Scalar> & S)
{
  const Mat<Scalar> BtSA = B.transpose() * S * A;
  const Mat<Scalar> G = R + B.transpose() * S * B;
  const Mat<Scalar> res = A.transpose() * S * A - S + Q - BtSA.transpose() * G.ldlt().solve(BtSA);
  return res.norm() / std::max<Scalar>(Scalar(1), S.norm());
}

// Structure-preserving doubling followed by Newton-Hewer polishing.
// F = -(R + B^T S B)^{-1} B^T S A makes A + B F stable.
template<typename Scalar>
DareSolution<Scalar> dare(
  const Mat<Scalar> & A, const Mat<Scalar> & B, const Mat<Scalar> & Q, const Mat<Scalar> & R)
{
  const Index n = A.rows();
  const Index m = B.cols();
  require_dims(A.cols() == n && B.rows() == n, "dare: A, B shapes");
  require_dims(Q.rows() == n && Q.cols() == n, "dare: Q shape");
  require_dims(R.rows() == m && R.cols() == m, "dare: R shape");

  const Mat<Scalar> Rs = Scalar(0.5) * (R + R.transpose());
  Eigen::LLT<Mat<Scalar>> rllt(Rs);
  if (rllt.info() != Eigen::Success) {
    throw std::domain_error("dare: R must be positive definite");
  }
  const Mat<Scalar> Qs = Scalar(0.5) * (Q + Q.transpose());
  const Mat<Scalar> I = Mat<Scalar>::Identity(n, n);

  Mat<Scalar> Ak = A;
  Mat<Scalar> Gk = B * rllt.solve(B.transpose());
  Mat<Scalar> Hk = Qs;
  bool converged = false;
  for (int k = 0; k < 100; ++k) {
    const Mat<Scalar> W = I + Gk * Hk;
    Eigen::PartialPivLU<Mat<Scalar>> lu(W);
    const Mat<Scalar> V1 = lu.solve(Ak);
    const Mat<Scalar> V2 = lu.solve(Gk);
    const Mat<Scalar> Hn = Hk + Ak.transpose() * Hk * V1;
    Gk = Gk + Ak * V2 * Ak.transpose();
    Ak = (Ak * V1).eval();
    const Scalar change = (Hn - Hk).norm() / std::max<Scalar>(Scalar(1), Hn.norm());
    Hk = Scalar(0.5) * (Hn + Hn.transpose());
    Gk = Scalar(0.5) * (Gk + Gk.transpose());
    if (!Hk.allFinite()) {
      break;
    }
    if (change < Scalar(1e-15) || Ak.norm() < Scalar(1e-300)) {
      converged = true;
      break;
    }
  }
  if (!converged || !Hk.allFinite()) {
    throw std::domain_error("dare: no stabilizing solution (pair not stabilizable or detectable)");
  }

  DareSolution<Scalar> sol;
  sol.S = Hk;
  auto gain = [&](const Mat<Scalar> & S) -> Mat<Scalar> {
      return -(Rs + B.transpose() * S * B).ldlt().solve(B.transpose() * S * A);
    };
  for (int k = 0; k < 4; ++k) {
    const Mat<Scalar> F = gain(sol.S);
    const Mat<Scalar> Acl = A + B * F;
    if (!is_stable(Acl)) {
      break;
    }
    const Mat<Scalar> Sn = dlyap<Scalar>(Acl, Qs + F.transpose() * Rs * F);
    if (dare_residual<Scalar>(A, B, Qs, Rs, Sn) > dare_residual<Scalar>(A, B, Qs, Rs, sol.S)) {
      break;
    }
    sol.S = Sn;
  }
  sol.F = gain(sol.S);
  sol.residual = dare_residual<Scalar>(A, B, Qs, Rs, sol.S);
  if (!is_stable(Mat<Scalar>(A + B * sol.F))) {
    throw std::domain_error("dare: closed loop is not stable");
  }
  return sol;
}

}  // namespace robs
