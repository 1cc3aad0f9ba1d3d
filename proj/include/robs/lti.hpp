#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace robs
{

using Index = Eigen::Index;

template<typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template<typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;
using CMatrix = Mat<std::complex<double>>;

class dimension_error : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

inline void require_dims(bool ok, const char * what)
{
  if (!ok) {
    throw dimension_error(what);
  }
}

/* -------------------------------------------------------------------------- */
/*                                 StateSpace                                 */
/* -------------------------------------------------------------------------- */

// x+ = A x + B u,  y = C x + D u.  G(z) = C (zI - A)^{-1} B + D.
template<typename Scalar>
struct StateSpace
{
  Mat<Scalar> A;
  Mat<Scalar> B;
  Mat<Scalar> C;
  Mat<Scalar> D;

  StateSpace() = default;

  StateSpace(Mat<Scalar> a, Mat<Scalar> b, Mat<Scalar> c, Mat<Scalar> d)
  : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d))
  {
    validate();
  }

  Index states() const {return A.rows();}
  Index inputs() const {return D.cols();}
  Index outputs() const {return D.rows();}

  void validate() const
  {
    require_dims(A.rows() == A.cols(), "StateSpace: A must be square");
    require_dims(B.rows() == A.rows(), "StateSpace: B rows must equal state dimension");
    require_dims(C.cols() == A.rows(), "StateSpace: C cols must equal state dimension");
    require_dims(D.rows() == C.rows(), "StateSpace: D rows must equal C rows");
    require_dims(D.cols() == B.cols(), "StateSpace: D cols must equal B cols");
    require_dims(D.rows() >= 1 && D.cols() >= 1, "StateSpace: empty input or output");
  }

  // Static gain with no states.
  static StateSpace gain(const Mat<Scalar> & d)
  {
    return StateSpace(
      Mat<Scalar>::Zero(0, 0), Mat<Scalar>::Zero(0, d.cols()),
      Mat<Scalar>::Zero(d.rows(), 0), d);
  }

  static StateSpace identity(Index k)
  {
    return gain(Mat<Scalar>::Identity(k, k));
  }

  Mat<std::complex<Scalar>> evaluate(std::complex<Scalar> z) const
  {
    using Cx = std::complex<Scalar>;
    Mat<Cx> g = D.template cast<Cx>();
    if (states() == 0) {
      return g;
    }
    Mat<Cx> zia = -A.template cast<Cx>();
    zia.diagonal().array() += z;
    g.noalias() += C.template cast<Cx>() * zia.partialPivLu().solve(B.template cast<Cx>());
    return g;
  }
};

using System = StateSpace<double>;

/* -------------------------------------------------------------------------- */
/*                                 FirSystem                                  */
/* -------------------------------------------------------------------------- */

// G(z) = sum_j G_j z^{-j}; at least one tap.
template<typename Scalar>
struct FirSystem
{
  std::vector<Mat<Scalar>> taps;

  FirSystem() = default;

  FirSystem(Index p, Index m, Index length)
  : taps(static_cast<std::size_t>(std::max<Index>(length, 1)), Mat<Scalar>::Zero(p, m)) {}

  explicit FirSystem(std::vector<Mat<Scalar>> t)
  : taps(std::move(t))
  {
    require_dims(!taps.empty(), "FirSystem: needs at least one tap");
    for (const auto & g : taps) {
      require_dims(
        g.rows() == taps.front().rows() && g.cols() == taps.front().cols(),
        "FirSystem: all taps must share a shape");
    }
  }

  static FirSystem scalar(const std::vector<Scalar> & values)
  {
    std::vector<Mat<Scalar>> t;
    for (Scalar v : values) {
      t.push_back(Mat<Scalar>::Constant(1, 1, v));
    }
    return FirSystem(std::move(t));
  }

  static FirSystem constant(const Mat<Scalar> & g, Index length = 1)
  {
    FirSystem f(g.rows(), g.cols(), length);
    f.taps[0] = g;
    return f;
  }

  static FirSystem identity(Index k, Index length = 1)
  {
    return constant(Mat<Scalar>::Identity(k, k), length);
  }

  Index rows() const {return taps.front().rows();}
  Index cols() const {return taps.front().cols();}
  Index size() const {return static_cast<Index>(taps.size());}
  Index order() const {return size() - 1;}

  const Mat<Scalar> & operator[](Index j) const {return taps[static_cast<std::size_t>(j)];}
  Mat<Scalar> & operator[](Index j) {return taps[static_cast<std::size_t>(j)];}

  // Tap j, zero past the end.
  Mat<Scalar> tap(Index j) const
  {
    if (j < 0 || j >= size()) {
      return Mat<Scalar>::Zero(rows(), cols());
    }
    return taps[static_cast<std::size_t>(j)];
  }

  Mat<std::complex<Scalar>> evaluate(std::complex<Scalar> z) const
  {
    using Cx = std::complex<Scalar>;
    const Cx zinv = Cx(1) / z;
    Mat<Cx> g = taps.back().template cast<Cx>();
    for (Index j = size() - 2; j >= 0; --j) {
      g = (g * zinv).eval();
      g += taps[static_cast<std::size_t>(j)].template cast<Cx>();
    }
    return g;
  }

  Scalar tap_energy() const
  {
    Scalar e = 0;
    for (const auto & g : taps) {
      e += g.squaredNorm();
    }
    return e;
  }
};

using Fir = FirSystem<double>;

// Spec default for every synthesis-facing truncation.
inline constexpr Index kDefaultFirLength = 32;

struct NoiseConfig
{
  double sigma_w = 1.0;
  double sigma_delta = 0.0;
  double sigma_nu = 0.1;
  double sigma_r = 1.0;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (sigma_w < 0 || sigma_delta < 0 || sigma_nu < 0 || sigma_r < 0) {
      throw std::invalid_argument("NoiseConfig: standard deviations must be nonnegative");
    }
  }
};

/* -------------------------------------------------------------------------- */
/*                              Markov parameters                             */
/* -------------------------------------------------------------------------- */

// Taps 0..N: D, CB, CAB, ...
template<typename Scalar>
FirSystem<Scalar> markov(const StateSpace<Scalar> & sys, Index N)
{
  FirSystem<Scalar> f(sys.outputs(), sys.inputs(), N + 1);
  f[0] = sys.D;
  if (sys.states() == 0) {
    return f;
  }
  Mat<Scalar> AkB = sys.B;
  for (Index j = 1; j <= N; ++j) {
    f[j].noalias() = sys.C * AkB;
    AkB = (sys.A * AkB).eval();
  }
  return f;
}

// Shift-register realization of an FIR; exact, order*m states.
template<typename Scalar>
StateSpace<Scalar> realize(const FirSystem<Scalar> & f)
{
  const Index p = f.rows();
  const Index m = f.cols();
  const Index k = f.order();
  const Index n = k * m;
  Mat<Scalar> A = Mat<Scalar>::Zero(n, n);
  Mat<Scalar> B = Mat<Scalar>::Zero(n, m);
  Mat<Scalar> C = Mat<Scalar>::Zero(p, n);
  if (k > 0) {
    B.topRows(m).setIdentity();
    for (Index i = 1; i < k; ++i) {
      A.block(i * m, (i - 1) * m, m, m).setIdentity();
    }
    for (Index i = 0; i < k; ++i) {
      C.middleCols(i * m, m) = f[i + 1];
    }
  }
  return StateSpace<Scalar>(A, B, C, f[0]);
}

/* -------------------------------------------------------------------------- */
/*                              FIR arithmetic                                */
/* -------------------------------------------------------------------------- */

template<typename Scalar>
FirSystem<Scalar> truncate(const FirSystem<Scalar> & f, Index length)
{
  FirSystem<Scalar> g(f.rows(), f.cols(), length);
  for (Index j = 0; j < g.size(); ++j) {
    g[j] = f.tap(j);
  }
  return g;
}

// a*b truncated to N+1 taps.
template<typename Scalar>
FirSystem<Scalar> fir_series(const FirSystem<Scalar> & a, const FirSystem<Scalar> & b, Index N)
{
  require_dims(a.cols() == b.rows(), "fir_series: inner dimensions differ");
  FirSystem<Scalar> c(a.rows(), b.cols(), N + 1);
  for (Index j = 0; j <= N; ++j) {
    const Index lo = std::max<Index>(0, j - b.order());
    const Index hi = std::min<Index>(j, a.order());
    for (Index i = lo; i <= hi; ++i) {
      c[j].noalias() += a[i] * b[j - i];
    }
  }
  return c;
}

// Full convolution.
template<typename Scalar>
FirSystem<Scalar> operator*(const FirSystem<Scalar> & a, const FirSystem<Scalar> & b)
{
  return fir_series(a, b, a.order() + b.order());
}

template<typename Derived>
FirSystem<typename Derived::Scalar> operator*(
  const Eigen::MatrixBase<Derived> & k, const FirSystem<typename Derived::Scalar> & f)
{
  using Scalar = typename Derived::Scalar;
  require_dims(k.cols() == f.rows(), "gain * fir: dimensions differ");
  FirSystem<Scalar> g(k.rows(), f.cols(), f.size());
  for (Index j = 0; j < f.size(); ++j) {
    g[j].noalias() = k * f[j];
  }
  return g;
}

template<typename Derived>
FirSystem<typename Derived::Scalar> operator*(
  const FirSystem<typename Derived::Scalar> & f, const Eigen::MatrixBase<Derived> & k)
{
  using Scalar = typename Derived::Scalar;
  require_dims(f.cols() == k.rows(), "fir * gain: dimensions differ");
  FirSystem<Scalar> g(f.rows(), k.cols(), f.size());
  for (Index j = 0; j < f.size(); ++j) {
    g[j].noalias() = f[j] * k;
  }
  return g;
}

template<typename Scalar>
FirSystem<Scalar> operator*(Scalar s, FirSystem<Scalar> f)
{
  for (auto & g : f.taps) {
    g *= s;
  }
  return f;
}

template<typename Scalar>
FirSystem<Scalar> fir_add(const FirSystem<Scalar> & a, const FirSystem<Scalar> & b)
{
  require_dims(a.rows() == b.rows() && a.cols() == b.cols(), "fir_add: shapes differ");
  FirSystem<Scalar> c(a.rows(), a.cols(), std::max(a.size(), b.size()));
  for (Index j = 0; j < c.size(); ++j) {
    c[j] = a.tap(j) + b.tap(j);
  }
  return c;
}

template<typename Scalar>
FirSystem<Scalar> fir_sub(const FirSystem<Scalar> & a, const FirSystem<Scalar> & b)
{
  return fir_add(a, Scalar(-1) * b);
}

template<typename Scalar>
FirSystem<Scalar> operator+(const FirSystem<Scalar> & a, const FirSystem<Scalar> & b)
{
  return fir_add(a, b);
}

template<typename Scalar>
FirSystem<Scalar> operator-(const FirSystem<Scalar> & a, const FirSystem<Scalar> & b)
{
  return fir_sub(a, b);
}

template<typename Scalar>
FirSystem<Scalar> operator-(FirSystem<Scalar> a)
{
  return Scalar(-1) * std::move(a);
}

// [a; b]
template<typename Scalar>
FirSystem<Scalar> fir_stack_rows(const FirSystem<Scalar> & a, const FirSystem<Scalar> & b)
{
  require_dims(a.cols() == b.cols(), "fir_stack_rows: column counts differ");
  FirSystem<Scalar> c(a.rows() + b.rows(), a.cols(), std::max(a.size(), b.size()));
  for (Index j = 0; j < c.size(); ++j) {
    c[j].topRows(a.rows()) = a.tap(j);
    c[j].bottomRows(b.rows()) = b.tap(j);
  }
  return c;
}

// [a, b]
template<typename Scalar>
FirSystem<Scalar> fir_stack_cols(const FirSystem<Scalar> & a, const FirSystem<Scalar> & b)
{
  require_dims(a.rows() == b.rows(), "fir_stack_cols: row counts differ");
  FirSystem<Scalar> c(a.rows(), a.cols() + b.cols(), std::max(a.size(), b.size()));
  for (Index j = 0; j < c.size(); ++j) {
    c[j].leftCols(a.cols()) = a.tap(j);
    c[j].rightCols(b.cols()) = b.tap(j);
  }
  return c;
}

template<typename Scalar>
FirSystem<Scalar> transpose(const FirSystem<Scalar> & f)
{
  FirSystem<Scalar> g(f.cols(), f.rows(), f.size());
  for (Index j = 0; j < f.size(); ++j) {
    g[j] = f[j].transpose();
  }
  return g;
}

// Largest tap-wise Frobenius distance.
template<typename Scalar>
Scalar max_tap_distance(const FirSystem<Scalar> & a, const FirSystem<Scalar> & b)
{
  require_dims(a.rows() == b.rows() && a.cols() == b.cols(), "max_tap_distance: shapes differ");
  Scalar d = 0;
  for (Index j = 0; j < std::max(a.size(), b.size()); ++j) {
    d = std::max<Scalar>(d, (a.tap(j) - b.tap(j)).norm());
  }
  return d;
}

// Ratio of the last tap's energy to the total; spec warns above 1e-6.
template<typename Scalar>
Scalar tail_ratio(const FirSystem<Scalar> & f)
{
  const Scalar total = f.tap_energy();
  if (total == Scalar(0)) {
    return Scalar(0);
  }
  return f.taps.back().norm() / std::sqrt(total);
}

/* -------------------------------------------------------------------------- */
/*                        State-space interconnection                         */
/* -------------------------------------------------------------------------- */

// g1 * g2 : u -> g2 -> g1 -> y
template<typename Scalar>
StateSpace<Scalar> series(const StateSpace<Scalar> & g1, const StateSpace<Scalar> & g2)
{
  require_dims(g1.inputs() == g2.outputs(), "series: inner dimensions differ");
  const Index n1 = g1.states();
  const Index n2 = g2.states();
  Mat<Scalar> A = Mat<Scalar>::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = g1.A;
  A.topRightCorner(n1, n2) = g1.B * g2.C;
  A.bottomRightCorner(n2, n2) = g2.A;
  Mat<Scalar> B(n1 + n2, g2.inputs());
  B.topRows(n1) = g1.B * g2.D;
  B.bottomRows(n2) = g2.B;
  Mat<Scalar> C(g1.outputs(), n1 + n2);
  C.leftCols(n1) = g1.C;
  C.rightCols(n2) = g1.D * g2.C;
  return StateSpace<Scalar>(A, B, C, g1.D * g2.D);
}

template<typename Scalar>
StateSpace<Scalar> operator*(const StateSpace<Scalar> & g1, const StateSpace<Scalar> & g2)
{
  return series(g1, g2);
}

template<typename Derived>
StateSpace<typename Derived::Scalar> operator*(
  const Eigen::MatrixBase<Derived> & k, const StateSpace<typename Derived::Scalar> & g)
{
  using Scalar = typename Derived::Scalar;
  require_dims(k.cols() == g.outputs(), "gain * system: dimensions differ");
  return StateSpace<Scalar>(g.A, g.B, k * g.C, k * g.D);
}

template<typename Derived>
StateSpace<typename Derived::Scalar> operator*(
  const StateSpace<typename Derived::Scalar> & g, const Eigen::MatrixBase<Derived> & k)
{
  using Scalar = typename Derived::Scalar;
  require_dims(g.inputs() == k.rows(), "system * gain: dimensions differ");
  return StateSpace<Scalar>(g.A, g.B * k, g.C, g.D * k);
}

template<typename Scalar>
StateSpace<Scalar> parallel(const StateSpace<Scalar> & g1, const StateSpace<Scalar> & g2, Scalar sign = 1)
{
  require_dims(
    g1.inputs() == g2.inputs() && g1.outputs() == g2.outputs(),
    "parallel: shapes differ");
  const Index n1 = g1.states();
  const Index n2 = g2.states();
  Mat<Scalar> A = Mat<Scalar>::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = g1.A;
  A.bottomRightCorner(n2, n2) = g2.A;
  Mat<Scalar> B(n1 + n2, g1.inputs());
  B.topRows(n1) = g1.B;
  B.bottomRows(n2) = g2.B;
  Mat<Scalar> C(g1.outputs(), n1 + n2);
  C.leftCols(n1) = g1.C;
  C.rightCols(n2) = sign * g2.C;
  return StateSpace<Scalar>(A, B, C, g1.D + sign * g2.D);
}

template<typename Scalar>
StateSpace<Scalar> operator+(const StateSpace<Scalar> & g1, const StateSpace<Scalar> & g2)
{
  return parallel(g1, g2, Scalar(1));
}

template<typename Scalar>
StateSpace<Scalar> operator-(const StateSpace<Scalar> & g1, const StateSpace<Scalar> & g2)
{
  return parallel(g1, g2, Scalar(-1));
}

template<typename Scalar>
StateSpace<Scalar> operator-(const StateSpace<Scalar> & g)
{
  return StateSpace<Scalar>(g.A, g.B, -g.C, -g.D);
}

// [g1; g2], shared input.
template<typename Scalar>
StateSpace<Scalar> stack_rows(const StateSpace<Scalar> & g1, const StateSpace<Scalar> & g2)
{
  require_dims(g1.inputs() == g2.inputs(), "stack_rows: input counts differ");
  const Index n1 = g1.states();
  const Index n2 = g2.states();
  const Index p1 = g1.outputs();
  const Index p2 = g2.outputs();
  Mat<Scalar> A = Mat<Scalar>::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = g1.A;
  A.bottomRightCorner(n2, n2) = g2.A;
  Mat<Scalar> B(n1 + n2, g1.inputs());
  B.topRows(n1) = g1.B;
  B.bottomRows(n2) = g2.B;
  Mat<Scalar> C = Mat<Scalar>::Zero(p1 + p2, n1 + n2);
  C.topLeftCorner(p1, n1) = g1.C;
  C.bottomRightCorner(p2, n2) = g2.C;
  Mat<Scalar> D(p1 + p2, g1.inputs());
  D.topRows(p1) = g1.D;
  D.bottomRows(p2) = g2.D;
  return StateSpace<Scalar>(A, B, C, D);
}

// [g1, g2], summed output.
template<typename Scalar>
StateSpace<Scalar> stack_cols(const StateSpace<Scalar> & g1, const StateSpace<Scalar> & g2)
{
  require_dims(g1.outputs() == g2.outputs(), "stack_cols: output counts differ");
  const Index n1 = g1.states();
  const Index n2 = g2.states();
  const Index m1 = g1.inputs();
  const Index m2 = g2.inputs();
  Mat<Scalar> A = Mat<Scalar>::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = g1.A;
  A.bottomRightCorner(n2, n2) = g2.A;
  Mat<Scalar> B = Mat<Scalar>::Zero(n1 + n2, m1 + m2);
  B.topLeftCorner(n1, m1) = g1.B;
  B.bottomRightCorner(n2, m2) = g2.B;
  Mat<Scalar> C(g1.outputs(), n1 + n2);
  C.leftCols(n1) = g1.C;
  C.rightCols(n2) = g2.C;
  Mat<Scalar> D(g1.outputs(), m1 + m2);
  D.leftCols(m1) = g1.D;
  D.rightCols(m2) = g2.D;
  return StateSpace<Scalar>(A, B, C, D);
}

template<typename Scalar>
StateSpace<Scalar> transpose(const StateSpace<Scalar> & g)
{
  return StateSpace<Scalar>(
    g.A.transpose(), g.C.transpose(), g.B.transpose(), g.D.transpose());
}

// Requires D invertible; poles of the inverse are eig(A - B D^{-1} C).
template<typename Scalar>
StateSpace<Scalar> inverse(const StateSpace<Scalar> & g)
{
  require_dims(g.inputs() == g.outputs(), "inverse: system must be square");
  Eigen::FullPivLU<Mat<Scalar>> lu(g.D);
  if (!lu.isInvertible()) {
    throw std::domain_error("inverse: feedthrough is singular");
  }
  const Mat<Scalar> Di = lu.inverse();
  return StateSpace<Scalar>(g.A - g.B * Di * g.C, g.B * Di, -Di * g.C, Di);
}

}  // namespace robs
