#pragma once

#include "robs/coprime.hpp"
#include "robs/conic.hpp"

#include <limits>
#include <string>

namespace robs
{

struct SynthesisConstants
{
  double lambda1 = 0;       // ||I - M||_inf
  double lambda2 = 0;       // ||[N; M]||_inf
  double lambda2_left = 0;  // ||[N~ M~]||_inf, the one used by the bound
  double stack_norm = 0;    // ||[Y~; X~]||_inf of the central controller
};

SynthesisConstants constants(const Dcf & nominal);

struct SynthesisConfig
{
  double gamma = 0;
  std::vector<double> alpha_grid;  // empty: default grid
  Index fir_len = kDefaultFirLength;  // horizon n of every truncated stack
  Index q_order = -1;                 // taps of Q minus one; -1 means fir_len
  SolverSettings solver = tight_solver();
  int threads = 1;

  static SolverSettings tight_solver()
  {
    SolverSettings s;
    s.tol = 1e-8;
    s.max_iter = 50000;
    return s;
  }

  Index q_taps() const {return (q_order < 0 ? fir_len : q_order) + 1;}
  void validate() const;
};

// 24 log-spaced points in [stack_norm, 0.98 / gamma]; empty when that
// interval is empty.
std::vector<double> default_alpha_grid(const SynthesisConstants & k, double gamma, int count = 24);

// Affine maps of the Q taps (variables at first_var, vec(Q_k) by tap):
//   taps 0..n of [I - Y_Q, X_Q] = [I - Y, X] + Q [N~, M~]
//   taps 0..n of [Y~_Q; X~_Q] = [Y~; X~] + [-N; M] Q
AffineFir objective_map(const Dcf & nominal, Index n, Index q_taps, Index first_var);
AffineFir stack_map(const Dcf & nominal, Index n, Index q_taps, Index first_var);

struct InnerProgram
{
  ConicProgram prog;
  Index q_first = 0, q_count = 0, q_taps = 0;
  Index eps1 = 0, eps2 = 0;
  Index m = 0, p = 0, n = 0;
  double alpha = 0, gamma = 0;
  bool has_lmi = true;
  LmiBlocks lmi;
  SynthesisConstants k;
  AffineFir objective;  // for recomputation
};

// min (1 - gamma alpha) e1 + lambda1 (lambda2_left + gamma) e2
//  s.t. ||vec [I - Y_Q, X_Q]|| <= e1, ||q|| <= e2, ||[Y~_Q; X~_Q]||_inf <= alpha.
// alpha = +inf drops the LMI.
InnerProgram assemble_inner(
  const Dcf & nominal, const SynthesisConstants & k, double gamma, double alpha, Index n, Index q_taps);

struct InnerResult
{
  SolveStatus status = SolveStatus::max_iter;
  Fir Q;
  double value = std::numeric_limits<double>::infinity();  // solver objective
  double recomputed = std::numeric_limits<double>::infinity();
  double eps1 = 0, eps2 = 0;
  int iterations = 0;
};

InnerResult solve_inner(const InnerProgram & ip, const SolverSettings & st = {});

// inner and outer are recomputed from the returned Q rather than read off
// the solver slacks.
struct AlphaTrace
{
  double alpha = 0;
  SolveStatus status = SolveStatus::max_iter;
  double inner = std::numeric_limits<double>::infinity();
  double outer = std::numeric_limits<double>::infinity();
  double stack_norm = std::numeric_limits<double>::quiet_NaN();  // of the inner optimizer
  int iterations = 0;
};

struct SynthesisResult
{
  Fir q_star;
  double alpha_star = 0;
  double inner_value = 0;
  double bound_value = 0;
  double stack_norm = 0;  // ||[Y~_Q*; X~_Q*]||_inf at horizon fir_len
  SynthesisConstants k;
  double gamma = 0;
  std::vector<AlphaTrace> trace;
};

// Throws std::runtime_error when no alpha is feasible.
SynthesisResult outer_search(const SynthesisConfig & config, const Dcf & nominal);

// ||[I - Y_Q, X_Q]||_2 + lambda1 ||Q||_2 (lambda2_left + gamma) / (1 - gamma alpha)
// over `horizon` taps; throws std::domain_error when ||[Y~_Q; X~_Q]||_inf > alpha.
double upper_bound_value(const Dcf & nominal, const Fir & Q, double alpha, double gamma, Index horizon);

// alpha,status,inner,outer,stack_norm,iterations
std::string trace_csv(const SynthesisResult & r);

}  // namespace robs
