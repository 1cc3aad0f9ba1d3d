#include "test_support.hpp"

#include "robs/robust.hpp"
#include "robs/synthesis.hpp"

#include <doctest.h>

using namespace robs;
using namespace robs::testing;

namespace
{

double brute_hinf(const System & g, int points)
{
  double best = 0;
  for (int i = 0; i <= points; ++i) {
    Eigen::JacobiSVD<CMatrix> svd(g.evaluate(std::polar(1.0, M_PI * i / points)));
    best = std::max(best, svd.singularValues()(0));
  }
  return best;
}

Vector q_vector(const Fir & Q)
{
  return vec_stack(Q);
}

const double kScalarObjective = 3.1224989991991992;  // sqrt(9.75)

}  // namespace

TEST_CASE("synthesis constants")
{
  const Dcf d = build_dcf(scalar_plant(), scalar_gains());
  const SynthesisConstants k = constants(d);
  CHECK(k.lambda1 == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(k.stack_norm == doctest::Approx(std::sqrt(4.0 * 4.0 + 4.5 * 4.5)).epsilon(1e-9));

  const System stable(
    Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1));
  const Dcf z = build_dcf(stable, GainPair{Matrix::Zero(1, 1), Matrix::Zero(1, 1)});
  CHECK(constants(z).lambda1 == 0.0);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const System g = random_plant(3, 2, 2, rng);
    const Dcf r = build_dcf(g, riccati_gains(g));
    const SynthesisConstants kr = constants(r);
    CHECK(std::abs(kr.lambda2 - brute_hinf(stack_rows(r.N, r.M), 100000)) <= 1e-6 * kr.lambda2);
    CHECK(std::abs(kr.lambda2_left - brute_hinf(stack_cols(r.Nt, r.Mt), 100000)) <= 1e-6 * kr.lambda2_left);
  }
}

TEST_CASE("affine maps match the Youla factors")
{
  std::mt19937_64 rng(5);
  const System g = random_plant(3, 2, 1, rng);
  const Dcf d = build_dcf(g, riccati_gains(g), 20);
  const Index n = 12;
  const Fir Q = random_fir(2, 1, 6, rng, 0.3);
  const YoulaFactors yf = youla_factors(d, Q, n);

  const AffineFir obj = objective_map(d, n, Q.size(), 0);
  const Fir want = truncate(fir_stack_cols(Fir::identity(2, 1) - yf.YQ, yf.XQ), n + 1);
  CHECK(max_tap_distance(obj.evaluate(q_vector(Q)), want) < 1e-12);

  // Same vector through the Q-hat encoding.
  const Fir C = fir_stack_cols(Fir::identity(2, 1) - d.fY, d.fX);
  const Fir P = fir_stack_cols(d.fNt, d.fMt);
  const Vector bridge = vec_stack(C, n + 1) + build_qhat(Q, 3, n + 1) * vec_stack(P, n + 1);
  CHECK((bridge - vec_stack(want)).norm() < 1e-12);

  const AffineFir st = stack_map(d, n, Q.size(), 0);
  const Fir stack = truncate(fir_stack_rows(yf.YtQ, yf.XtQ), n + 1);
  CHECK(max_tap_distance(st.evaluate(q_vector(Q)), stack) < 1e-12);
}

TEST_CASE("inner program sizes")
{
  // (p, m, n) = (1, 1, 4), Q with five taps:
  //   variables = 5 (Q) + 2 (eps) + svec(10) = 62
  //   rows = 11 (soc e1) + 6 (soc e2) + svec(11) (Schur) + 3 + 4*4 (traces) = 102
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), 8);
  const InnerProgram ip = assemble_inner(d, constants(d), 0.1, 6.5, 4, 5);
  CHECK(ip.prog.variables() == 62);
  CHECK(ip.prog.rows() == 102);
  CHECK(ip.prog.cones.size() == 4);
  CHECK_THROWS_AS(assemble_inner(d, constants(d), 0.1, 10.0, 4, 5), std::invalid_argument);
  CHECK_THROWS_AS(assemble_inner(d, constants(d), 0.1, -1.0, 4, 5), std::invalid_argument);
}

TEST_CASE("scalar inner problems")
{
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), 40);
  const SynthesisConstants k = constants(d);
  const Index n = 16;

  const SolverSettings st = SynthesisConfig::tight_solver();
  const InnerResult feasible = solve_inner(assemble_inner(d, k, 0.1, 6.5, n, n + 1), st);
  REQUIRE(feasible.status == SolveStatus::optimal);
  // Q = 0 is feasible and costs (1 - 0.65) * objective at Q = 0.
  CHECK(feasible.value <= (1 - 0.65) * kScalarObjective + 1e-5);
  CHECK(std::abs(feasible.value - feasible.recomputed) <= 1e-6 * (1 + feasible.value));

  const InnerResult tight = solve_inner(assemble_inner(d, k, 0.1, 1.0, n, n + 1), st);
  if (tight.status == SolveStatus::optimal) {
    const YoulaFactors yf = youla_factors(d, tight.Q, n);
    CHECK(hinf_norm(truncate(fir_stack_rows(yf.YtQ, yf.XtQ), n + 1)) <= 1.0 + 1e-4);
  } else {
    CHECK(tight.status == SolveStatus::infeasible);
  }

  // gamma = 0 without an H-infinity constraint.
  const InnerResult free = solve_inner(
    assemble_inner(d, k, 0.0, std::numeric_limits<double>::infinity(), n, n + 1), st);
  REQUIRE(free.status == SolveStatus::optimal);
  CHECK(free.recomputed <= kScalarObjective * (1 + 1e-7));
}

TEST_CASE("upper bound value")
{
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), 60);
  const Fir zero = Fir::scalar({0.0});
  CHECK(upper_bound_value(d, zero, 6.5, 0.1, 60) == doctest::Approx(kScalarObjective).epsilon(1e-9));
  CHECK(upper_bound_value(d, zero, std::numeric_limits<double>::infinity(), 0.0, 60) ==
    doctest::Approx(kScalarObjective).epsilon(1e-9));
  CHECK_THROWS_AS(upper_bound_value(d, zero, 5.0, 0.1, 60), std::domain_error);
}

TEST_CASE("outer search")
{
  std::mt19937_64 rng(41);
  const System g = random_plant(2, 1, 1, rng);
  const Dcf d = build_dcf(g, riccati_gains(g), 40);
  const SynthesisConstants k = constants(d);
  const Index n = 12;

  SynthesisConfig cfg;
  cfg.fir_len = n;
  cfg.gamma = 0.5 / k.stack_norm;
  const SynthesisResult r = outer_search(cfg, d);
  CHECK(r.trace.size() == 24);
  CHECK(r.alpha_star * cfg.gamma < 1.0);
  CHECK(r.stack_norm <= r.alpha_star + 1e-6);
  const double nominal = h2_norm(truncate(objective_transfer(d, r.q_star, n), n + 1));
  CHECK(r.bound_value >= nominal * (1 - 1e-9));
  CHECK(r.bound_value <= upper_bound_value(d, Fir::scalar({0.0}), r.trace.front().alpha, cfg.gamma, n) + 1e-6);

  // Larger alpha means a larger feasible set.
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    if (r.trace[i].status == SolveStatus::optimal && r.trace[i - 1].status == SolveStatus::optimal) {
      CHECK(r.trace[i].inner / (1 - cfg.gamma * r.trace[i].alpha) * (1 - cfg.gamma * r.trace[i - 1].alpha) <=
        r.trace[i - 1].inner + 1e-5);
    }
  }
  CHECK(trace_csv(r).rfind("alpha,status,inner,outer,stack_norm,iterations\n", 0) == 0);

  // The bound dominates the robust objective on sampled admissible perturbations.
  const UncertaintySet set{cfg.gamma, d};
  const double bound = upper_bound_value(d, r.q_star, r.alpha_star, cfg.gamma, d.fir_len);
  for (int draw = 0; draw < 30; ++draw) {
    const Perturbation pert = sample_perturbation(set, 8, 0.95, rng);
    CHECK(robust_objective_value(d, r.q_star, pert, d.fir_len) <= bound + 1e-6);
  }

  // gamma = 0: the nominal convex problem without the H-infinity constraint.
  SynthesisConfig c0 = cfg;
  c0.gamma = 0;
  const SynthesisResult r0 = outer_search(c0, d);
  REQUIRE(r0.trace.size() == 1);
  const InnerResult direct = solve_inner(
    assemble_inner(d, k, 0.0, std::numeric_limits<double>::infinity(), n, n + 1), cfg.solver);
  CHECK(r0.bound_value == doctest::Approx(direct.recomputed).epsilon(1e-9));
}

TEST_CASE("configuration validation")
{
  SynthesisConfig c;
  c.gamma = 0.1;
  c.alpha_grid = {1.0, 11.0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.alpha_grid = {2.0, 1.0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.alpha_grid = {1.0, 2.0};
  CHECK_NOTHROW(c.validate());

  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), 16);
  SynthesisConfig bad;
  bad.gamma = 0.2;  // 0.98 / 0.2 < 6.02
  bad.fir_len = 8;
  CHECK_THROWS_AS(outer_search(bad, d), std::runtime_error);
}
