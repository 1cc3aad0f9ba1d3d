#pragma once

#include "robs/lti.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

namespace robs
{

/* -------------------------------------------------------------------------- */
/*                                 Stability                                  */
/* -------------------------------------------------------------------------- */

template<typename Derived>
typename Derived::RealScalar spectral_radius(const Eigen::MatrixBase<Derived> & A)
{
  using Real = typename Derived::RealScalar;
  require_dims(A.rows() == A.cols(), "spectral_radius: matrix must be square");
  if (A.rows() == 0) {
    return Real(0);
  }
  Eigen::EigenSolver<Mat<Real>> es(A.eval(), false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

template<typename Derived>
bool is_stable(const Eigen::MatrixBase<Derived> & A)
{
  return spectral_radius(A) < 1;
}

template<typename Scalar>
bool is_stable(const StateSpace<Scalar> & g)
{
  return spectral_radius(g.A) < 1;
}

/* -------------------------------------------------------------------------- */
/*                           Discrete Lyapunov                                */
/* -------------------------------------------------------------------------- */

// Solves A^T X A - X + Q = 0 by doubling: X <- X + Ak^T X Ak, Ak <- Ak^2.
template<typename Scalar>
Mat<Scalar> dlyap(const Mat<Scalar> & A, const Mat<Scalar> & Q)
{
  require_dims(A.rows() == A.cols(), "dlyap: A must be square");
  require_dims(Q.rows() == A.rows() && Q.cols() == A.cols(), "dlyap: Q shape must match A");
  Mat<Scalar> X = Scalar(0.5) * (Q + Q.transpose());
  Mat<Scalar> Ak = A;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (int k = 0; k < 64; ++k) {
    const Scalar a = Ak.norm();
    if (!std::isfinite(a) || a > Scalar(1e150)) {
      break;
    }
    if (a * a <= eps * eps) {
      return Scalar(0.5) * (X + X.transpose());
    }
    X += Ak.transpose() * X * Ak;
    Ak = (Ak * Ak).eval();
  }
  throw std::domain_error("dlyap: doubling did not converge (spectral radius >= 1)");
}

template<typename Scalar>
Scalar dlyap_residual(const Mat<Scalar> & A, const Mat<Scalar> & Q, const Mat<Scalar> & X)
{
  const Mat<Scalar> r = A.transpose() * X * A - X + Q;
  return r.norm() / std::max<Scalar>(Scalar(1), X.norm());
}

/* -------------------------------------------------------------------------- */
/*                                  H2 norm                                   */
/* -------------------------------------------------------------------------- */

template<typename Scalar>
Scalar h2_norm(const FirSystem<Scalar> & f)
{
  return std::sqrt(f.tap_energy());
}

// tr(D^T D) + tr(B^T Wo B), Wo the observability Gramian.
template<typename Scalar>
Scalar h2_norm(const StateSpace<Scalar> & g)
{
  Scalar e = g.D.squaredNorm();
  if (g.states() > 0) {
    const Mat<Scalar> Wo = dlyap<Scalar>(g.A, g.C.transpose() * g.C);
    e += (g.B.transpose() * Wo * g.B).trace();
  }
  return std::sqrt(std::max<Scalar>(e, Scalar(0)));
}

/* -------------------------------------------------------------------------- */
/*                                 H-infinity                                 */
/* -------------------------------------------------------------------------- */

namespace detail
{

template<typename Scalar>
Scalar sigma_max(const Mat<std::complex<Scalar>> & g)
{
  if (g.size() == 0) {
    return Scalar(0);
  }
  if (g.rows() == 1 || g.cols() == 1) {
    return g.norm();
  }
  Eigen::JacobiSVD<Mat<std::complex<Scalar>>> svd(g);
  return svd.singularValues()(0);
}

// Evaluates C (zI - A)^{-1} B + D through a single Hessenberg reduction,
// O(n^2) per frequency.
template<typename Scalar>
class FrequencyEvaluator
{
public:
  using Cx = std::complex<Scalar>;

  explicit FrequencyEvaluator(const StateSpace<Scalar> & g)
  : D_(g.D)
  {
    const Index n = g.states();
    if (n == 0) {
      return;
    }
    Eigen::HessenbergDecomposition<Mat<Scalar>> hd(g.A);
    H_ = hd.matrixH();
    const Mat<Scalar> U = hd.matrixQ();
    Bt_ = U.transpose() * g.B;
    Ct_ = g.C * U;
  }

  Mat<Cx> operator()(Cx z) const
  {
    Mat<Cx> out = D_.template cast<Cx>();
    const Index n = H_.rows();
    if (n == 0) {
      return out;
    }
    Mat<Cx> M = -H_.template cast<Cx>();
    M.diagonal().array() += z;
    Mat<Cx> X = Bt_.template cast<Cx>();
    for (Index k = 0; k + 1 < n; ++k) {
      if (std::abs(M(k + 1, k)) > std::abs(M(k, k))) {
        M.row(k).tail(n - k).swap(M.row(k + 1).tail(n - k));
        X.row(k).swap(X.row(k + 1));
      }
      if (M(k + 1, k) != Cx(0)) {
        const Cx l = M(k + 1, k) / M(k, k);
        M.row(k + 1).tail(n - k) -= l * M.row(k).tail(n - k);
        X.row(k + 1) -= l * X.row(k);
      }
    }
    M.template triangularView<Eigen::Upper>().solveInPlace(X);
    out.noalias() += Ct_.template cast<Cx>() * X;
    return out;
  }

private:
  Mat<Scalar> H_;
  Mat<Scalar> Bt_;
  Mat<Scalar> Ct_;
  Mat<Scalar> D_;
};

template<typename Scalar, typename Eval>
Scalar hinf_on_grid(const Eval & eval, Scalar tol, Index grid)
{
  const Scalar pi = std::numbers::pi_v<Scalar>;
  auto gain = [&](Scalar w) {return sigma_max<Scalar>(eval(std::polar(Scalar(1), w)));};

  std::vector<Scalar> s(static_cast<std::size_t>(grid + 1));
  for (Index i = 0; i <= grid; ++i) {
    s[static_cast<std::size_t>(i)] = gain(pi * Scalar(i) / Scalar(grid));
  }
  Scalar best = *std::max_element(s.begin(), s.end());
  if (best == Scalar(0)) {
    return best;
  }

  // Golden-section refinement around each of the largest local maxima.
  std::vector<std::pair<Scalar, Index>> peaks;
  for (Index i = 0; i <= grid; ++i) {
    const Scalar l = i > 0 ? s[static_cast<std::size_t>(i - 1)] : Scalar(-1);
    const Scalar r = i < grid ? s[static_cast<std::size_t>(i + 1)] : Scalar(-1);
    const Scalar c = s[static_cast<std::size_t>(i)];
    if (c >= l && c >= r) {
      peaks.emplace_back(c, i);
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](auto a, auto b) {return a.first > b.first;});
  const std::size_t keep = std::min<std::size_t>(peaks.size(), 8);
  const Scalar phi = (std::sqrt(Scalar(5)) - 1) / 2;
  const Scalar h = pi / Scalar(grid);
  for (std::size_t k = 0; k < keep; ++k) {
    const Scalar w0 = pi * Scalar(peaks[k].second) / Scalar(grid);
    Scalar a = std::max<Scalar>(Scalar(0), w0 - h);
    Scalar b = std::min<Scalar>(pi, w0 + h);
    Scalar x1 = b - phi * (b - a);
    Scalar x2 = a + phi * (b - a);
    Scalar f1 = gain(x1);
    Scalar f2 = gain(x2);
    for (int it = 0; it < 200 && (b - a) > Scalar(1e-12); ++it) {
      const Scalar spread = std::abs(f1 - f2);
      if (spread <= tol * Scalar(1e-3) * std::max(f1, f2) && (b - a) < tol) {
        break;
      }
      if (f1 > f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - phi * (b - a);
        f1 = gain(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + phi * (b - a);
        f2 = gain(x2);
      }
    }
    best = std::max({best, f1, f2});
  }
  return best;
}

}  // namespace detail

inline constexpr Index kHinfGrid = 2048;
inline constexpr double kHinfTol = 1e-6;

// sup over the unit circle of the largest singular value.
template<typename Scalar>
Scalar hinf_norm(const FirSystem<Scalar> & f, Scalar tol = Scalar(kHinfTol), Index grid = kHinfGrid)
{
  auto eval = [&](std::complex<Scalar> z) {return f.evaluate(z);};
  return detail::hinf_on_grid<Scalar>(eval, tol, grid);
}

template<typename Scalar>
Scalar hinf_norm(const StateSpace<Scalar> & g, Scalar tol = Scalar(kHinfTol), Index grid = kHinfGrid)
{
  if (!is_stable(g)) {
    throw std::domain_error("hinf_norm: system is unstable");
  }
  detail::FrequencyEvaluator<Scalar> eval(g);
  return detail::hinf_on_grid<Scalar>(eval, tol, grid);
}

}  // namespace robs
