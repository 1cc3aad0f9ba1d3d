#include "robs/coprime.hpp"

#include <Eigen/SVD>

namespace robs
{

namespace
{

Matrix eye(Index k) {return Matrix::Identity(k, k);}

Fir identity_fir(Index k, Index len) {return Fir::identity(k, len);}

void fill_views(Dcf & d)
{
  const Index N = d.fir_len;
  d.fM = markov(d.M, N);
  d.fN = markov(d.N, N);
  d.fMt = markov(d.Mt, N);
  d.fNt = markov(d.Nt, N);
  d.fX = markov(d.X, N);
  d.fY = markov(d.Y, N);
  d.fXt = markov(d.Xt, N);
  d.fYt = markov(d.Yt, N);
}

void check_q(const Dcf & dcf, const Fir & Q)
{
  require_dims(Q.rows() == dcf.m() && Q.cols() == dcf.p(), "Youla parameter must be m x p");
}

}  // namespace

Dcf build_dcf(const System & plant, const GainPair & gains, Index fir_len)
{
  plant.validate();
  const Index n = plant.states();
  const Index m = plant.inputs();
  const Index p = plant.outputs();
  require_dims(gains.F.rows() == m && gains.F.cols() == n, "build_dcf: F must be m x n");
  require_dims(gains.L.rows() == n && gains.L.cols() == p, "build_dcf: L must be n x p");
  require_dims(fir_len >= 1, "build_dcf: fir_len must be >= 1");

  const Matrix & A = plant.A;
  const Matrix & B = plant.B;
  const Matrix & C = plant.C;
  const Matrix & D = plant.D;
  const Matrix & F = gains.F;
  const Matrix & L = gains.L;

  const Matrix AF = A + B * F;
  const Matrix AL = A - L * C;
  const Matrix CF = C + D * F;
  const Matrix BL = B - L * D;
  if (!is_stable(AF)) {
    throw std::domain_error("build_dcf: A + B F is not stable");
  }
  if (!is_stable(AL)) {
    throw std::domain_error("build_dcf: A - L C is not stable");
  }

  Dcf d;
  d.plant = plant;
  d.gains = gains;
  d.fir_len = fir_len;
  d.M = System(AF, B, F, eye(m));
  d.N = System(AF, B, CF, D);
  d.Mt = System(AL, L, -C, eye(p));
  d.Nt = System(AL, BL, C, D);
  d.X = System(AL, L, -F, Matrix::Zero(m, p));
  d.Y = System(AL, BL, -F, eye(m));
  d.Xt = System(AF, L, -F, Matrix::Zero(m, p));
  d.Yt = System(AF, L, CF, eye(p));
  fill_views(d);
  return d;
}

Dcf dcf_from_factors(
  const System & plant, const GainPair & gains,
  const System & M, const System & N, const System & Mt, const System & Nt,
  const System & X, const System & Y, const System & Xt, const System & Yt, Index fir_len)
{
  require_dims(fir_len >= 1, "dcf_from_factors: fir_len must be >= 1");
  const Index m = plant.inputs();
  const Index p = plant.outputs();
  require_dims(M.outputs() == m && M.inputs() == m && N.outputs() == p && N.inputs() == m,
    "dcf_from_factors: right factors must be m x m and p x m");
  require_dims(Mt.outputs() == p && Mt.inputs() == p && Nt.outputs() == p && Nt.inputs() == m,
    "dcf_from_factors: left factors must be p x p and p x m");
  require_dims(X.outputs() == m && X.inputs() == p && Y.outputs() == m && Y.inputs() == m,
    "dcf_from_factors: X, Y must be m x p and m x m");
  require_dims(Xt.outputs() == m && Xt.inputs() == p && Yt.outputs() == p && Yt.inputs() == p,
    "dcf_from_factors: X~, Y~ must be m x p and p x p");
  Dcf d;
  d.plant = plant;
  d.gains = gains;
  d.fir_len = fir_len;
  d.M = M;
  d.N = N;
  d.Mt = Mt;
  d.Nt = Nt;
  d.X = X;
  d.Y = Y;
  d.Xt = Xt;
  d.Yt = Yt;
  fill_views(d);
  return d;
}

Dcf with_fir_len(Dcf dcf, Index fir_len)
{
  require_dims(fir_len >= 1, "with_fir_len: fir_len must be >= 1");
  dcf.fir_len = fir_len;
  fill_views(dcf);
  return dcf;
}

double bezout_residual(
  const Fir & M, const Fir & N, const Fir & Mt, const Fir & Nt,
  const Fir & X, const Fir & Y, const Fir & Xt, const Fir & Yt, Index len)
{
  const Index N_ = len;
  const Index m = M.rows();
  const Index p = Mt.rows();
  // Left: [Mt Nt; -X Y] [Yt -N; Xt M]
  const Fir l11 = fir_series(Mt, Yt, N_) + fir_series(Nt, Xt, N_);
  const Fir l12 = fir_series(Nt, M, N_) - fir_series(Mt, N, N_);
  const Fir l21 = fir_series(Y, Xt, N_) - fir_series(X, Yt, N_);
  const Fir l22 = fir_series(X, N, N_) + fir_series(Y, M, N_);
  // Right: [Yt -N; Xt M] [Mt Nt; -X Y]
  const Fir r11 = fir_series(Yt, Mt, N_) + fir_series(N, X, N_);
  const Fir r12 = fir_series(Yt, Nt, N_) - fir_series(N, Y, N_);
  const Fir r21 = fir_series(Xt, Mt, N_) - fir_series(M, X, N_);
  const Fir r22 = fir_series(Xt, Nt, N_) + fir_series(M, Y, N_);

  const Fir Ip = identity_fir(p, N_ + 1);
  const Fir Im = identity_fir(m, N_ + 1);
  double r = 0;
  r = std::max(r, max_tap_distance(l11, Ip));
  r = std::max(r, max_tap_distance(l12, Fir(p, m, N_ + 1)));
  r = std::max(r, max_tap_distance(l21, Fir(m, p, N_ + 1)));
  r = std::max(r, max_tap_distance(l22, Im));
  r = std::max(r, max_tap_distance(r11, Ip));
  r = std::max(r, max_tap_distance(r12, Fir(p, m, N_ + 1)));
  r = std::max(r, max_tap_distance(r21, Fir(m, p, N_ + 1)));
  r = std::max(r, max_tap_distance(r22, Im));
  return r;
}

double bezout_residual(const Dcf & dcf, Index N)
{
  const Dcf d = N == dcf.fir_len ? dcf : with_fir_len(dcf, N);
  return bezout_residual(d.fM, d.fN, d.fMt, d.fNt, d.fX, d.fY, d.fXt, d.fYt, N);
}

YoulaRealization youla_realization(const Dcf & dcf, const Fir & Q)
{
  check_q(dcf, Q);
  const System q = realize(Q);
  YoulaRealization r;
  r.XQ = dcf.X + q * dcf.Mt;
  r.YQ = dcf.Y - q * dcf.Nt;
  r.XtQ = dcf.Xt + dcf.M * q;
  r.YtQ = dcf.Yt - dcf.N * q;
  return r;
}

YoulaFactors youla_factors(const Dcf & dcf, const Fir & Q, Index horizon)
{
  check_q(dcf, Q);
  const Index H = horizon;
  const Dcf d = H == dcf.fir_len ? dcf : with_fir_len(dcf, H);
  YoulaFactors y;
  y.Q = Q;
  y.XQ = d.fX + fir_series(Q, d.fMt, H);
  y.YQ = d.fY - fir_series(Q, d.fNt, H);
  y.XtQ = d.fXt + fir_series(d.fM, Q, H);
  y.YtQ = d.fYt - fir_series(d.fN, Q, H);
  return y;
}

YoulaFactors youla_factors(const Dcf & dcf, const Fir & Q)
{
  return youla_factors(dcf, Q, std::max(dcf.fir_len, Q.order()));
}

System p_system(const System & plant, const Matrix & F)
{
  const Index n = plant.states();
  return System(plant.A + plant.B * F, plant.B, eye(n), Matrix::Zero(n, plant.inputs()));
}

ObserverPair observer_from_s(const Dcf & dcf, const Fir & S, Index horizon)
{
  require_dims(S.rows() == dcf.n() && S.cols() == dcf.p(), "observer_from_s: S must be n x p");
  const System P = p_system(dcf.plant, dcf.gains.F);
  const System s = realize(S);
  ObserverPair o;
  o.psi_u = markov(P * dcf.Y + s * dcf.Nt, horizon);
  o.psi_y = markov(P * dcf.X - s * dcf.Mt, horizon);
  return o;
}

ObserverPair observer_from_s(const Dcf & dcf, const Fir & S)
{
  return observer_from_s(dcf, S, std::max(dcf.fir_len, S.order()));
}

ObserverPair observer_from_q(const Dcf & dcf, const Fir & Q, Index horizon)
{
  const QToS qs = q_to_s(dcf, truncate(Q, horizon + 1));
  const YoulaRealization yr = youla_realization(dcf, Q);
  const System P = p_system(dcf.plant, dcf.gains.F);
  const System s = realize(qs.S);
  ObserverPair o;
  o.psi_u = markov(P * yr.YQ + s * dcf.Nt, horizon);
  o.psi_y = markov(P * yr.XQ - s * dcf.Mt, horizon);
  return o;
}

double observer_residual(const Dcf & dcf, const ObserverPair & obs)
{
  const Index H = std::min(obs.psi_u.order(), obs.psi_y.order());
  const Dcf d = with_fir_len(dcf, H);
  const Fir lhs = fir_series(obs.psi_u, d.fM, H) + fir_series(obs.psi_y, d.fN, H);
  const Fir P = markov(p_system(dcf.plant, dcf.gains.F), H);
  return max_tap_distance(lhs, P);
}

Fir s_to_q(const Dcf & dcf, const Fir & S)
{
  require_dims(S.rows() == dcf.n() && S.cols() == dcf.p(), "s_to_q: S must be n x p");
  const Index H = std::max(S.order(), dcf.fir_len);
  return truncate(dcf.gains.F * S, H + 1) - markov(dcf.Xt, H);
}

QToS q_to_s(const Dcf & dcf, const Fir & Q)
{
  check_q(dcf, Q);
  const Index H = std::max(Q.order(), dcf.fir_len);
  const Matrix & F = dcf.gains.F;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(F);
  const Index full = std::min(F.rows(), F.cols());
  if (cod.rank() < full) {
    throw std::domain_error("q_to_s: F is rank deficient; the S to Q map is not a bijection");
  }
  const Matrix Fp = cod.pseudoInverse();
  const Fir target = truncate(Q, H + 1) + markov(dcf.Xt, H);
  QToS out;
  out.S = Fp * target;
  out.residual = max_tap_distance(F * out.S, target);
  return out;
}

std::pair<Fir, Fir> estimation_error_maps(const Dcf & dcf, const Fir & S)
{
  ObserverPair o = observer_from_s(dcf, S);
  return {o.psi_u, -o.psi_y};
}

Fir objective_transfer(const Dcf & dcf, const Fir & Q, Index horizon)
{
  check_q(dcf, Q);
  const Index m = dcf.m();
  const System q = realize(Q);
  const System IminusM = System::identity(m) - dcf.M;
  const YoulaRealization yr = youla_realization(dcf, Q);
  const System left = System::identity(m) - yr.YQ + IminusM * q * dcf.Nt;
  const System right = yr.XQ + IminusM * q * dcf.Mt;
  return markov(stack_cols(left, right), horizon);
}

Fir objective_transfer(const Dcf & dcf, const Fir & Q)
{
  return objective_transfer(dcf, Q, std::max(dcf.fir_len, Q.order()));
}

Fir observer_objective(const Dcf & dcf, const Fir & S, Index horizon)
{
  const ObserverPair o = observer_from_s(dcf, S, horizon);
  const Matrix & F = dcf.gains.F;
  return fir_stack_cols(F * o.psi_u, F * (-o.psi_y));
}

}  // namespace robs
