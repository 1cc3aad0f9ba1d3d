#pragma once

#include "robs/simulate.hpp"

#include <cstdint>
#include <string>

namespace robs
{

// One closed-loop experiment; columns are time samples. u is the controller
// output, the plant input is u + w.
struct Trajectory
{
  Matrix u, y, r, w, nu, delta, x;
  std::uint64_t seed = 0;

  Index length() const {return u.cols();}
  void validate() const;
};

// Gaussian r, w, nu, delta drawn per step in that order from one stream.
// Throws std::overflow_error through the simulation guard.
Trajectory simulate_closed_loop(
  const System & plant, const YoulaRealization & controller, const NoiseConfig & noise, Index T,
  double guard = 1e8);

struct DualYoulaSignals
{
  Matrix e1;  // X r + Y w, m x T
  Matrix e2;  // M~ y - N~ (u + w), p x T
};

DualYoulaSignals dual_youla_signals(const Trajectory & traj, const Dcf & initial);

// Dual-Youla parameter of `plant` relative to the controller of `initial`:
// R = (M~ N_o - N~ M_o)(X N_o + Y M_o)^{-1} with (N_o, M_o) any right
// factorization of the plant. Throws when the controller does not stabilize it.
System dual_youla_parameter(const Dcf & initial, const System & plant);

// (M~ - R X)^{-1} (N~ + R Y)
System plant_from_dual_youla(const Dcf & initial, const System & R);

// Blocks (i, k) = R_{i+k+1}, i, k < d.
Matrix hankel_matrix(const Fir & R, Index d);

struct HankelEstimate
{
  Matrix H_hat;  // (p d) x (m d), past window
  Matrix G_hat;  // (p d) x (m d), in-window block lower triangle
  Index d = 0;
  Index T = 0;
  Index m = 0, p = 0;
  double residual = 0;  // RMS regression residual per window
  // Expected spectral norm of the estimation noise in H_hat: per-entry
  // residual over sqrt(lambda_min) of the regressor Gram, times sqrt(pd) + sqrt(md).
  double noise_floor = 0;

  Matrix block(Index i, Index k) const {return H_hat.block(i * p, k * m, p, m);}
  // Taps 0..2d-1: R_0 from the diagonal of G_hat, R_j from anti-diagonals of H_hat.
  Fir markov() const;
};

// Regresses each future window of e2 on the preceding d samples of e1 and
// on the d in-window samples (which carry R_0..R_{d-1}); ridge on the
// normal equations. Throws std::invalid_argument unless T > 2d and
// std::runtime_error on a rank-deficient regressor.
HankelEstimate ols_hankel(const Matrix & e1, const Matrix & e2, Index d, double ridge = 1e-10);

struct HoKalman
{
  Matrix A, B, C;
  Vector singular_values;  // of the full Hankel estimate

  // Markov parameters C A^{j-1} B with the given feedthrough.
  System realization(const Matrix & D) const {return System(A, B, C, D);}
};

// Throws std::invalid_argument when order exceeds the numerical rank or d < 2.
HoKalman ho_kalman(const Matrix & H, Index p, Index m, Index order);

// Number of singular values at or above max(fraction * sigma_1, floor).
Index numerical_order(const Vector & singular_values, double fraction, double floor = 0);

struct SampleComplexityParams
{
  double beta = 1.0;
  double script_R = 1.0;
  double c_const = 1.0;
  double delta_fail = 0.05;
  Index m = 1, p = 1;

  void validate() const;
};

// ||[X Y]||_inf 12 c beta R sqrt((m d + p d^2 + d ln(T / delta)) / T)
double gamma_hat_formula(double xy_norm, const SampleComplexityParams & k, Index d_hat, double T);

// 144 ||[X Y]||_inf^2 c^2 beta^2 R^2
double s_constant(double xy_norm, const SampleComplexityParams & k);

// Rightmost root of gamma^2 T - s d ln(T / delta) - s (m d + p d^2); 0 without one.
double min_horizon(double gamma, double s, Index d_hat, Index m, Index p, double delta_fail);

// ceil(ln(T / delta)), capped so that the regression stays overdetermined.
Index log_depth(Index T, double delta_fail, Index m);

struct RecoveredFactors
{
  Dcf model;             // factors implied by R_hat; controller factors unchanged
  double shift = 0;      // ||R_hat [-X, Y]||_inf, distance from the initial model
  double xy_norm = 0;    // ||[X Y]||_inf
  double gamma_hat = 0;  // sample-complexity radius
  double gamma = 0;      // max(gamma_hat, floor), the radius handed to synthesis
};

RecoveredFactors recover_factors(
  const Dcf & initial, const System & R_hat, const SampleComplexityParams & k, Index d_hat, Index T,
  double gamma_floor = 0);

struct IdentifyConfig
{
  double sv_fraction = 0.05;
  Index depth = -1;  // -1: automatic
  Index order = -1;  // -1: from the singular values
  double gamma_floor = 0;
  double ridge = 1e-10;
  SampleComplexityParams params;
};

struct IdentifiedModel
{
  HankelEstimate hankel;
  HoKalman hk;
  System R_hat;
  Index d_hat = 0;
  Index order = 0;
  RecoveredFactors factors;
};

IdentifiedModel identify(const Trajectory & traj, const Dcf & initial, const IdentifyConfig & cfg);
// Same, starting from recorded e1, e2.
IdentifiedModel identify(const DualYoulaSignals & sig, const Dcf & initial, const IdentifyConfig & cfg);

// ||H_{d,d} - H_{inf,inf}||_2 for a known R, with infinity replaced by `far`
// block rows and columns. Synthetic ground truth only.
double hankel_tail_error(const Fir & R, Index d, Index far);

// Smallest d with 16 beta R f(d) >= ||H_{d,d} - H_{inf,inf}||_2,
// f(d) = sqrt(d) sqrt((m + d p + ln(T / delta)) / T); -1 if none up to d_max.
Index d_star(const Fir & R, const SampleComplexityParams & k, double T, Index d_max);

// t,u..,y..,r..,e1..,e2..
std::string trajectory_csv(const Trajectory & traj, const DualYoulaSignals & sig);

}  // namespace robs
