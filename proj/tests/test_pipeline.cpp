#include "test_support.hpp"

#include "robs/pipeline.hpp"
#include "robs/robust.hpp"

#include <doctest.h>

using namespace robs;
using namespace robs::testing;

namespace
{

const double kScalarDare = 4.2360679774997897;  // 2 + sqrt(5)

}  // namespace

TEST_CASE("simulated H2 cost")
{
  const System g = scalar_plant();
  const LqrReference ref = lqr_reference(g);
  CHECK(ref.S(0, 0) == doctest::Approx(kScalarDare).epsilon(1e-12));
  CHECK(ref.J_opt == doctest::Approx(kScalarDare).epsilon(1e-12));
  CHECK(ref.residual < 1e-9);
  CHECK(h2_cost_simulated(state_feedback_loop(g, ref.F)) == doctest::Approx(kScalarDare).epsilon(1e-9));

  // Zero output weight leaves only the input energy; C = 0 and F = 0 gives nothing.
  const System blind(g.A * 0.25, g.B, Matrix::Zero(1, 1), g.D);
  CHECK(h2_cost_simulated(state_feedback_loop(blind, Matrix::Zero(1, 1))) == 0.0);

  // Agrees with the Gramian H2 norm on a random multivariable loop.
  std::mt19937_64 rng(5);
  const System s = random_stable(4, 2, 3, rng, 0.9);
  const double h2 = h2_norm(s);
  CHECK(h2_cost_simulated(s) == doctest::Approx(h2 * h2).epsilon(1e-6));

  CHECK_THROWS_AS(h2_cost_simulated(state_feedback_loop(g, Matrix::Zero(1, 1))), std::overflow_error);
}

TEST_CASE("gap against the LQR benchmark")
{
  const Experiment ex = reference_experiment();
  const LqrReference ref = lqr_reference(ex.true_plant);
  const Fir zero = Fir::scalar({0.0});
  const double alpha = 2.0 * constants(ex.initial).stack_norm;

  const GapRow g = gap_and_bound(ex.true_plant, ref.F, ex.initial, zero, alpha, 0.0, 16);
  CHECK(g.J_u == doctest::Approx(ref.J_opt).epsilon(1e-9));
  CHECK(g.gap >= -1e-12);
  // Completion of squares with the LQR gain.
  CHECK(g.gap == doctest::Approx(ref.weight * g.err_sq).epsilon(1e-7));
  CHECK(g.bound_weighted == doctest::Approx(ref.weight * g.bound_sq).epsilon(1e-12));

  // Even on the exact plant the output-feedback loop cannot see w, so the gap
  // stays positive; it is still dominated.
  const Dcf exact = build_dcf(ex.true_plant, riccati_gains(ex.true_plant, ex.true_plant), 40);
  const GapRow e = gap_and_bound(ex.true_plant, ref.F, exact, zero, alpha, 0.0, 16);
  CHECK(e.gap > 0);
  CHECK(e.gap == doctest::Approx(ref.weight * e.err_sq).epsilon(1e-7));
  CHECK(e.gap <= e.bound_weighted);
  CHECK(e.gap <= e.bound);
}

TEST_CASE("log-log slope fit")
{
  std::vector<double> x, y;
  for (int k = 1; k <= 6; ++k) {
    x.push_back(std::pow(2.0, k));
    y.push_back(3.0 * std::pow(x.back(), -0.5));
  }
  const SlopeFit f = fit_loglog(x, y);
  CHECK(f.points == 6);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(f.stderr_ < 1e-10);

  y[2] = -1.0;  // dropped
  CHECK(fit_loglog(x, y).points == 5);
  CHECK(std::isnan(fit_loglog({1.0}, {1.0}).slope));
  CHECK(rate(16.0) == doctest::Approx(std::sqrt(std::log(16.0) / 16.0)));
}

TEST_CASE("sweep output is deterministic across thread counts")
{
  const Experiment ex = reference_experiment();
  SweepConfig c;
  c.T_list = {256, 512};
  c.seeds = {0, 1, 2};
  const SweepReport a = sweep_T(ex, c);
  c.threads = 3;
  const SweepReport b = sweep_T(ex, c);
  REQUIRE(a.rows.size() == 6);
  CHECK(sweep_csv(a) == sweep_csv(b));
  CHECK(sweep_csv(a).rfind("T,seed,status,d_hat,order,hankel_error,gamma_hat,gamma_true,alpha_star,", 0) == 0);
  for (const SweepRow & r : a.rows) {
    CHECK(r.status == "ok");
    CHECK(r.gap <= r.bound + 1e-6);
    CHECK(r.excess == doctest::Approx(r.gap - a.gap_limit));
  }

  SweepConfig bad;
  bad.T_list = {512, 256};
  bad.seeds = {0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("calibrated radius covers the true error")
{
  const Experiment ex = reference_experiment();
  const System R = dual_youla_parameter(ex.initial, ex.true_plant);
  const Index T = 16384;
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    NoiseConfig nc = ex.noise;
    nc.seed = seed;
    const Trajectory traj = simulate_closed_loop(
      ex.true_plant, youla_realization(ex.initial, Fir::scalar({0.0})), nc, T);
    const IdentifiedModel im = identify(traj, ex.initial, ex.identify);
    const double truth = hinf_norm((R - im.R_hat) * stack_cols(-ex.initial.X, ex.initial.Y));
    covered += truth <= im.factors.gamma_hat;
  }
  CHECK(covered >= 19);
}

TEST_CASE("identified radius yields a robust controller for the true plant")
{
  const Experiment ex = reference_experiment();
  NoiseConfig nc = ex.noise;
  nc.seed = 3;
  const Trajectory traj = simulate_closed_loop(
    ex.true_plant, youla_realization(ex.initial, Fir::scalar({0.0})), nc, 4096);
  const IdentifiedModel im = identify(traj, ex.initial, ex.identify);
  const Dcf & model = im.factors.model;
  const double gamma = im.factors.gamma;

  SynthesisConfig sc = ex.synthesis;
  sc.gamma = gamma;
  sc.alpha_grid = default_alpha_grid(constants(model), gamma, 12);
  const SynthesisResult s = outer_search(sc, model);
  CHECK(s.alpha_star * gamma < 1.0);

  const auto rows = robust_monte_carlo(UncertaintySet{gamma, model}, s.q_star, 0.95, 6, 500, 20);
  for (const auto & r : rows) {
    CHECK(r.product_norm < 1.0);
    CHECK(r.loop_stable);
  }

  // The true plant sits inside the ball and the loop with it is stable.
  const System R = dual_youla_parameter(ex.initial, ex.true_plant);
  CHECK(hinf_norm((R - im.R_hat) * stack_cols(-ex.initial.X, ex.initial.Y)) <= gamma);
  const ClosedLoop cl = closed_loop(ex.true_plant, factor_controller(youla_realization(model, s.q_star)));
  CHECK(is_stable(cl.sys));
}
