#pragma once

#include "robs/lti.hpp"

#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace robs
{

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

enum class ConeKind { zero, nonneg, soc, psd };

// soc(k): (t, v) with |v| <= t, k = 1 + dim v.
// psd(side): svec of a symmetric matrix, lower triangle by columns,
// off-diagonal entries scaled by sqrt(2).
struct Cone
{
  ConeKind kind = ConeKind::zero;
  Index dim = 0;   // rows occupied
  Index side = 0;  // psd only

  static Cone zero(Index n) {return {ConeKind::zero, n, 0};}
  static Cone nonneg(Index n) {return {ConeKind::nonneg, n, 0};}
  static Cone soc(Index n) {return {ConeKind::soc, n, 0};}
  static Cone psd(Index side) {return {ConeKind::psd, side * (side + 1) / 2, side};}
};

const char * to_string(ConeKind k);

// min c'x  s.t.  A x + s = b,  s in K = K_1 x ... x K_r.
struct ConicProgram
{
  Vector c;
  SparseMatrix A;
  Vector b;
  std::vector<Cone> cones;

  Index variables() const {return c.size();}
  Index rows() const {return b.size();}
  void validate() const;
};

enum class SolveStatus { optimal, infeasible, max_iter };

const char * to_string(SolveStatus s);

struct SolverSettings
{
  double tol = 1e-6;          // relative primal/dual/gap tolerance
  int max_iter = 20000;
  double rho = 1.0;
  double sigma = 1e-6;
  double relax = 1.6;
  double rho_eq_scale = 1e3;  // step on zero-cone rows relative to rho
  int check_every = 25;
  int adapt_every = 100;
  double infeasible_tol = 1e-5;
  int equilibration_passes = 15;
};

struct Solution
{
  Vector x, s, y;  // y lies in the polar cone; c = A'y at optimality
  SolveStatus status = SolveStatus::max_iter;
  double primal_residual = 0;
  double dual_residual = 0;
  double objective = 0;       // c'x
  double dual_objective = 0;  // b'y
  int iterations = 0;
};

Solution solve(const ConicProgram & prog, const SolverSettings & settings = {});
Solution solve(const ConicProgram & prog, double tol, int max_iter);

/* ----------------------------- projections ------------------------------ */

Index svec_size(Index side);
Vector svec(const Matrix & M);
Matrix smat(const Eigen::Ref<const Vector> & v, Index side);

// Symmetrizes first; `was_symmetric` reports whether that changed anything.
Matrix project_psd(const Matrix & M, bool * was_symmetric = nullptr);
Vector project_soc(const Vector & v);
void project_cone(const Cone & cone, Eigen::Ref<Vector> v);
void project_polar(const Cone & cone, Eigen::Ref<Vector> v);

/* ------------------------------ encoding -------------------------------- */

// s = b - A x, assembled row by row from affine expressions.
class ProgramBuilder
{
public:
  Index add_variables(Index k);
  Index variables() const {return n_;}

  void set_cost(Index var, double c);

  // Appends a cone block; returns its first row.
  Index add_cone(const Cone & cone);
  Index rows() const {return m_;}

  // Adds coef * x_var to the affine expression of a row.
  void add_term(Index row, Index var, double coef);
  void add_constant(Index row, double value);

  ConicProgram build() const;

private:
  Index n_ = 0, m_ = 0;
  std::vector<Triplet> triplets_;
  std::vector<std::pair<Index, double>> cost_;
  std::vector<std::pair<Index, double>> offset_;
  std::vector<Cone> cones_;
};

// F(theta) = F0 + sum_i theta_i F_i over `taps` taps of a rows x cols FIR.
// Entry (j, r, c) sits at j * rows * cols + c * rows + r; theta_i is program
// variable first_var + i.
struct AffineFir
{
  Index rows = 0, cols = 0, taps = 0;
  Vector constant;
  Matrix linear;
  Index first_var = 0;

  Index entry(Index j, Index r, Index c) const {return j * rows * cols + c * rows + r;}
  Fir evaluate(const Vector & theta) const;
};

AffineFir constant_fir(const Fir & f, Index taps);

// Scalar that is either a constant or constant + coef * x_var.
struct AffineScalar
{
  double constant = 0;
  Index var = -1;
  double coef = 1;
};

struct LmiBlocks
{
  Index s_first_var = 0;  // lower-triangle entries of S, by columns
  Index s_side = 0;
  Index schur_row = 0;    // first row of the PSD cone
  Index trace_row = 0;    // first row of the zero cone
  Index trace_rows = 0;
};

// ||F||_inf <= alpha for an FIR F with taps F_0..F_n (k x w each):
//   sum_{i=0}^{n-k} S_{i+k,i} = alpha delta[k] I_k,   k = 0..n
//   [[S, Fbar], [Fbar', alpha I_w]] >= 0,   Fbar = [F_0; ...; F_n]
// S >= 0 follows from the Schur block and is not emitted separately.
LmiBlocks hinf_lmi_blocks(ProgramBuilder & pb, const AffineFir & F, const AffineScalar & alpha);

// Feasibility program for a fixed FIR and alpha.
ConicProgram hinf_lmi_program(const Fir & F, double alpha);

// min alpha s.t. the LMI; the optimum is the FIR H-infinity norm.
ConicProgram hinf_lmi_min_alpha(const Fir & F);

// Q^ with blocks (j, i) = I_width (x) Q_{j-i}, so vec(taps of Q * P) = Q^ * vec_stack(P).
Matrix build_qhat(const Fir & Q, Index width, Index taps);

// [vec(G_0); vec(G_1); ...], column-major within each tap.
Vector vec_stack(const Fir & f, Index taps);
Vector vec_stack(const Fir & f);

/* ------------------------------- JSON ----------------------------------- */

// {"n":..,"m":..,"c":[..],"b":[..],"A":{"i":[..],"j":[..],"v":[..]},
//  "cones":[{"kind":"psd","dim":..,"side":..}, ...]}
std::string to_json(const ConicProgram & prog);
ConicProgram conic_program_from_json(const std::string & text);

}  // namespace robs
