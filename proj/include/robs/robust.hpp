#pragma once

#include "robs/coprime.hpp"

#include <random>

namespace robs
{

struct UncertaintySet
{
  double gamma = 0;
  Dcf nominal;

  void validate() const
  {
    if (!(gamma > 0)) {
      throw std::invalid_argument("UncertaintySet: gamma must be positive");
    }
  }
};

// Left-factor perturbation and the derived right-factor companions.
struct Perturbation
{
  Fir d_mt;  // p x p
  Fir d_nt;  // p x m
  Fir d_m;   // m x m
  Fir d_n;   // p x m
  double right_residual = 0;
  // Norm of the last derived tap; large values flag right factors that are
  // not stable under the (X, Y) normalization.
  double right_tail = 0;

  double left_norm() const;  // ||[d_mt d_nt]||_inf
};

Perturbation zero_perturbation(const Dcf & nominal);

// Random FIR pair of the given order scaled to ||[d_mt d_nt]||_inf = fraction * gamma.
Perturbation sample_perturbation(
  const UncertaintySet & set, Index order, double fraction, std::mt19937_64 & rng);

// Solves the off-diagonal blocks of the perturbed Bezout product for
// (d_n, d_m) under the normalization X d_n + Y d_m = 0 (Phi22 = I at Q = 0),
// tap by tap with least squares on the leading block.
void derive_right_factors(const Dcf & nominal, Perturbation & pert);

struct PerturbedPlant
{
  System mt;  // M~ + d_mt
  System nt;  // N~ + d_nt

  // (M~ + d_mt)^{-1} (N~ + d_nt) at z; throws when singular.
  CMatrix evaluate(std::complex<double> z) const;

  // Realization of the quotient; its extra modes are those of nt.
  System realization() const;
};

PerturbedPlant perturbed_plant(const Dcf & nominal, const Perturbation & pert);

// I_p + [d_mt d_nt][Y~_Q; X~_Q]
Fir phi11(const Perturbation & pert, const YoulaFactors & yf, Index horizon);
// I_m + [X_Q Y_Q][d_n; d_m]
Fir phi22(const Perturbation & pert, const YoulaFactors & yf, Index horizon);

// Truncated Neumann series of a square FIR with ||I - phi||_inf < 1;
// stops when the tap norm of a term drops below tol.
Fir neumann_inverse(const Fir & phi, Index horizon, double tol = 1e-12, int max_terms = 20000);

struct RobustCheck
{
  double stack_norm = 0;  // ||[Y~_Q; X~_Q]||_inf
  double margin = 0;      // 1/gamma - stack_norm
  bool robust = false;
};

RobustCheck is_robustly_stabilizing(const YoulaFactors & yf, double gamma);

bool small_gain_check(const Fir & g1, const Fir & g2);
bool small_gain_check(const System & g1, const System & g2);

struct TruePlantFactors
{
  Fir Mt, Nt, M, N;
  Fir phi11_inv;
  double bezout = 0;  // residual against (X_Q, Y_Q, X~_Q, Y~_Q)
};

TruePlantFactors true_plant_dcf(
  const Dcf & nominal, const Perturbation & pert, const YoulaFactors & yf, Index horizon);

// H2 norm of
// [I - Y_Q + (I - M) Q Phi11^{-1} (N~ + d_nt), X_Q + (I - M) Q Phi11^{-1} (M~ + d_mt)].
double robust_objective_value(
  const Dcf & nominal, const Fir & Q, const Perturbation & pert, Index horizon);

struct MonteCarloRow
{
  std::uint64_t seed = 0;
  double fraction = 0;
  double pert_norm = 0;
  double product_norm = 0;  // ||[d_mt d_nt][Y~_Q; X~_Q]||_inf
  bool phi_invertible = false;
  bool loop_stable = false;
};

// One perturbation per seed; loop stability from the realized closed loop.
std::vector<MonteCarloRow> robust_monte_carlo(
  const UncertaintySet & set, const Fir & Q, double fraction, Index order,
  std::uint64_t first_seed, int draws);

}  // namespace robs
