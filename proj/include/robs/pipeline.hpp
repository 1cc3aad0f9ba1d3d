#pragma once

#include "robs/synthesis.hpp"
#include "robs/sysid.hpp"

#include <string>

namespace robs
{

/* -------------------------------------------------------------------------- */
/*                                    Costs                                   */
/* -------------------------------------------------------------------------- */

// Performance output z = [C x; u], i.e. state weight C^T C and unit input
// weight. All loop maps below take the input disturbance w only.

// u = F x
System state_feedback_loop(const System & plant, const Matrix & F);

// u from the factor-form controller (X_Q, Y_Q) acting on y.
System controller_loop(const System & plant, const YoulaRealization & ctrl);

// w -> u - F x under the factor-form controller.
System feedback_error_loop(const System & plant, const YoulaRealization & ctrl, const Matrix & F);

// sum_k sum_t |z_t|^2 for w = e_k delta_t, stopped once both the increment and
// the squared state norm fall below tol. Throws std::overflow_error on divergence.
double h2_cost_simulated(const System & loop, double tol = 1e-12, Index max_steps = 1000000);

struct LqrReference
{
  Matrix S, F;
  double J_opt = 0;       // tr(B^T S B)
  double weight = 0;      // largest eigenvalue of I + B^T S B
  double residual = 0;
};

// DARE with weights (C^T C, I).
LqrReference lqr_reference(const System & plant);

/* -------------------------------------------------------------------------- */
/*                                Gap and bound                               */
/* -------------------------------------------------------------------------- */

struct GapRow
{
  double J_u = 0;        // u = F x
  double J_uhat = 0;     // factor-form controller with Q
  double gap = 0;
  double err_sq = 0;     // impulse sum of |u - F x|^2 under the controller
  double bound = 0;      // upper bound value B at (Q, alpha, gamma)
  double bound_sq = 0;   // B^2
  double bound_weighted = 0;  // lambda_max(I + B^T S B) B^2, valid when F is the LQR gain
  bool dominated = false;     // gap <= bound_weighted + 1e-6
};

// Throws std::domain_error when the alpha premise of the bound fails.
GapRow gap_and_bound(
  const System & plant_true, const Matrix & F, const Dcf & nominal, const Fir & Q, double alpha,
  double gamma, Index horizon);

/* -------------------------------------------------------------------------- */
/*                                  T sweep                                   */
/* -------------------------------------------------------------------------- */

// One identification-synthesis-evaluation experiment family. The true plant
// is unknown to the pipeline except through simulation; F is its state
// feedback gain and also the gain of the initial factorization.
struct Experiment
{
  System true_plant;
  Dcf initial;
  NoiseConfig noise;
  IdentifyConfig identify;
  SynthesisConfig synthesis;  // gamma is replaced by the identified radius
  int alpha_points = 12;      // default grid size when synthesis.alpha_grid is empty
};

// F: LQR gain of the true plant with weights (C^T C, I). L: Kalman predictor
// gain of the model with process noise B B^T and unit measurement noise.
GainPair riccati_gains(const System & true_plant, const System & model);

// True plant x+ = 0.5 x + u, y = x; initial model with pole 0.6; Riccati
// gains; factor FIR length 40, Q length 16; script_R calibrated for it.
Experiment reference_experiment();

struct SweepConfig
{
  std::vector<Index> T_list;
  std::vector<std::uint64_t> seeds;
  int threads = 1;

  void validate() const;
};

struct SweepRow
{
  Index T = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  Index d_hat = 0, order = 0;
  double hankel_error = 0;   // against the true dual-Youla parameter
  double gamma_hat = 0;
  double gamma_true = 0;     // ||(R - R_hat) [-X, Y]||_inf
  double alpha_star = 0;
  double J_u = 0, J_uhat = 0, gap = 0, excess = 0;
  double err_sq = 0, bound = 0, bound_sq = 0, bound_weighted = 0;
};

struct SlopeFit
{
  double slope = 0;
  double stderr_ = 0;
  double lo = 0, hi = 0;  // 95% interval
  int points = 0;
};

// Least squares of log y against log x.
SlopeFit fit_loglog(const std::vector<double> & x, const std::vector<double> & y);

struct SweepReport
{
  std::vector<SweepRow> rows;
  double gap_limit = 0;  // gap of the gamma = 0 design on the exact factors
  std::vector<Index> T;
  std::vector<double> median_gap, median_excess, median_gamma_hat, median_hankel_error;
  SlopeFit gap_fit, excess_fit, gamma_fit, hankel_fit;
  bool gap_monotone = false;
  bool excess_monotone = false;
  bool all_dominated = false;
};

// margin * quantile over seeds of gamma_true / gamma_hat evaluated with
// script_R = 1: the sample-complexity constant that covers the true error.
double calibrate_script_r(
  const Experiment & ex, Index T, const std::vector<std::uint64_t> & seeds, double quantile = 0.95,
  double margin = 1.25);

// Runs one cell; failures are recorded in status.
SweepRow sweep_cell(const Experiment & ex, Index T, std::uint64_t seed, double gap_limit);

// gap of the limiting design: exact dual-Youla factors and gamma = 0.
double limiting_gap(const Experiment & ex);

SweepReport sweep_T(const Experiment & ex, const SweepConfig & cfg);

// Recomputes medians, fits and flags of `rep` from its rows (failed cells skipped).
void summarize(SweepReport & rep, const std::vector<Index> & T_list);

// T,seed,status,d_hat,order,hankel_error,gamma_hat,gamma_true,alpha_star,
// J_u,J_uhat,gap,excess,err_sq,bound,bound_sq,bound_weighted
std::string sweep_csv(const SweepReport & report);

// sqrt(log T / T)
inline double rate(double T) {return std::sqrt(std::log(T) / T);}

}  // namespace robs
