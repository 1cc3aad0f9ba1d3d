#pragma once

#include "robs/lti.hpp"
#include "robs/norms.hpp"

namespace robs
{

struct GainPair
{
  Matrix F;  // m x n, A + B F stable
  Matrix L;  // n x p, A - L C stable
};

// Doubly coprime factors of a plant together with the observer-based
// controller K = Y^{-1} X = X~ Y~^{-1} (u = -K y).
//
//   [ M~  N~ ] [ Y~  -N ]   [ I  0 ]
//   [ -X  Y  ] [ X~   M ] = [ 0  I ]
//
// Realizations carry the plant feedthrough D; every FIR view holds
// fir_len + 1 taps.
struct Dcf
{
  System plant;
  GainPair gains;

  System M, N, Mt, Nt, X, Y, Xt, Yt;

  Index fir_len = kDefaultFirLength;
  Fir fM, fN, fMt, fNt, fX, fY, fXt, fYt;

  Index n() const {return plant.states();}
  Index m() const {return plant.inputs();}
  Index p() const {return plant.outputs();}
};

struct ObserverPair
{
  Fir psi_u;  // n x m
  Fir psi_y;  // n x p
};

// Youla-parameterized controller factors, FIR views.
struct YoulaFactors
{
  Fir Q;
  Fir XQ, YQ, XtQ, YtQ;
};

// Exact realizations of the same factors (Q realized as a shift register).
struct YoulaRealization
{
  System XQ, YQ, XtQ, YtQ;
};

struct QToS
{
  Fir S;
  double residual = 0;  // ||F F+ (Q + X~) - (Q + X~)|| tap-wise max
};

// Checks stabilization of both gains, then builds every factor.
Dcf build_dcf(const System & plant, const GainPair & gains, Index fir_len = kDefaultFirLength);

// Factorization given directly by its eight factors (no observer-based
// structure); `plant` and `gains` are carried along unchecked.
Dcf dcf_from_factors(
  const System & plant, const GainPair & gains,
  const System & M, const System & N, const System & Mt, const System & Nt,
  const System & X, const System & Y, const System & Xt, const System & Yt, Index fir_len);

// Re-truncates the FIR views of an existing factorization.
Dcf with_fir_len(Dcf dcf, Index fir_len);

double bezout_residual(const Dcf & dcf, Index N);

// Residual of both Bezout products for arbitrary FIR factors.
double bezout_residual(
  const Fir & M, const Fir & N, const Fir & Mt, const Fir & Nt,
  const Fir & X, const Fir & Y, const Fir & Xt, const Fir & Yt, Index len);

YoulaFactors youla_factors(const Dcf & dcf, const Fir & Q);
YoulaFactors youla_factors(const Dcf & dcf, const Fir & Q, Index horizon);
YoulaRealization youla_realization(const Dcf & dcf, const Fir & Q);

// (A_F, B, I, 0)
System p_system(const System & plant, const Matrix & F);

ObserverPair observer_from_s(const Dcf & dcf, const Fir & S, Index horizon);
ObserverPair observer_from_s(const Dcf & dcf, const Fir & S);

// Observer written with Y_Q, X_Q in place of Y, X; its feedback realizes
// the Youla parameter (2I - M) Q rather than Q.
ObserverPair observer_from_q(const Dcf & dcf, const Fir & Q, Index horizon);

// max tap norm of Psi_u M + Psi_y N - P
double observer_residual(const Dcf & dcf, const ObserverPair & obs);

Fir s_to_q(const Dcf & dcf, const Fir & S);
QToS q_to_s(const Dcf & dcf, const Fir & Q);

// (Psi_u, -Psi_y): maps from w and nu to x - x^.
std::pair<Fir, Fir> estimation_error_maps(const Dcf & dcf, const Fir & S);

// [I - Y_Q + (I - M) Q N~, X_Q + (I - M) Q M~], m x (m + p).
Fir objective_transfer(const Dcf & dcf, const Fir & Q);
Fir objective_transfer(const Dcf & dcf, const Fir & Q, Index horizon);

// F [Psi_u, -Psi_y] for the S observer; equals [I - Y_Q, X_Q] when F S = Q + X~.
Fir observer_objective(const Dcf & dcf, const Fir & S, Index horizon);

}  // namespace robs
