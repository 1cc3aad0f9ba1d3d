#include "test_support.hpp"

#include "robs/simulate.hpp"

#include <doctest.h>

using namespace robs;
using namespace robs::testing;

namespace
{

constexpr Index kN = 40;

// (z + 1) / (z - 0.5)^2 as a power series in z^{-1}.
Fir scalar_psi_u(Index N)
{
  std::vector<double> t(static_cast<std::size_t>(N + 1), 0.0);
  for (Index j = 1; j <= N; ++j) {
    // coefficient of z^{-j}: from z^{-1} * (j-1+1) 0.5^{j-1} + z^{-2} * (j-2+1) 0.5^{j-2}
    double c = double(j) * std::pow(0.5, double(j - 1));
    if (j >= 2) {
      c += double(j - 1) * std::pow(0.5, double(j - 2));
    }
    t[static_cast<std::size_t>(j)] = c;
  }
  return Fir::scalar(t);
}

struct RandomCase
{
  System plant;
  Dcf dcf;
};

RandomCase random_case(std::mt19937_64 & rng, Index n, Index m, Index p, Index N = kN)
{
  for (;;) {
    const System g = random_plant(n, m, p, rng);
    try {
      const GainPair gp = riccati_gains(g);
      return {g, build_dcf(g, gp, N)};
    } catch (const std::domain_error &) {
      continue;
    }
  }
}

}  // namespace

TEST_CASE("scalar worked factorization")
{
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), kN);
  CHECK(max_tap_distance(d.fM, scalar_ratio(-2, 1, 0.5, kN)) < 1e-14);
  CHECK(max_tap_distance(d.fN, scalar_ratio(1, 0, 0.5, kN)) < 1e-14);
  CHECK(max_tap_distance(d.fY, scalar_ratio(1, 1, 0.5, kN)) < 1e-14);
  CHECK(max_tap_distance(d.fX, scalar_ratio(2.25, 0, 0.5, kN)) < 1e-14);
  CHECK(max_tap_distance(d.fXt, d.fX) < 1e-14);
  CHECK(max_tap_distance(d.fYt, d.fY) < 1e-14);
  CHECK(max_tap_distance(d.fMt, d.fM) < 1e-14);
  CHECK(max_tap_distance(d.fNt, d.fN) < 1e-14);
  CHECK(bezout_residual(d, kN) <= 1e-12);

  // M~ Y~ + N~ X~ = ((z-2)(z+1) + 2.25) / (z - 0.5)^2 = 1
  const Fir one = fir_series(d.fMt, d.fYt, kN) + fir_series(d.fNt, d.fXt, kN);
  CHECK(max_tap_distance(one, Fir::identity(1, kN + 1)) < 1e-12);
}

TEST_CASE("build_dcf rejects non-stabilizing gains")
{
  GainPair bad = scalar_gains();
  bad.F(0, 0) = 0.0;
  CHECK_THROWS_AS(build_dcf(scalar_plant(), bad), std::domain_error);
  bad = scalar_gains();
  bad.L(0, 0) = 0.2;
  CHECK_THROWS_AS(build_dcf(scalar_plant(), bad), std::domain_error);
  CHECK_THROWS_AS(build_dcf(scalar_plant(), GainPair{Matrix::Zero(2, 1), Matrix::Zero(1, 1)}), dimension_error);
}

TEST_CASE("bezout residual on random systems and detection of a corrupted factor")
{
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const RandomCase c = random_case(rng, 1 + trial % 5, 1 + trial % 2, 1 + trial % 3);
    CHECK(bezout_residual(c.dcf, kN) <= 1e-8);
  }
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), kN);
  Fir X = d.fX;
  X[0](0, 0) += 0.1;
  const double r = bezout_residual(d.fM, d.fN, d.fMt, d.fNt, X, d.fY, d.fXt, d.fYt, kN);
  // The corruption enters as 0.1 * N and -0.1 * Y~; largest tap is |Y~_1| = 1.5.
  CHECK(r > 1e-3);
  CHECK(r == doctest::Approx(0.15).epsilon(1e-12));
}

TEST_CASE("youla factors")
{
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), kN);
  const YoulaFactors y0 = youla_factors(d, Fir(1, 1, 5));
  CHECK(max_tap_distance(y0.XQ, d.fX) == 0.0);
  CHECK(max_tap_distance(y0.YtQ, d.fYt) == 0.0);

  const YoulaFactors yc = youla_factors(d, Fir::scalar({0.1}));
  for (Index j = 0; j <= kN; ++j) {
    CHECK(yc.XQ[j](0, 0) == doctest::Approx(d.fX[j](0, 0) + 0.1 * d.fMt[j](0, 0)));
  }
  CHECK_THROWS_AS(youla_factors(d, Fir(2, 1, 1)), dimension_error);

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const RandomCase c = random_case(rng, 3, 2, 2);
    const Fir Q = random_fir(2, 2, 6, rng);
    const YoulaFactors y = youla_factors(c.dcf, Q);
    CHECK(
      bezout_residual(c.dcf.fM, c.dcf.fN, c.dcf.fMt, c.dcf.fNt, y.XQ, y.YQ, y.XtQ, y.YtQ, kN) <= 1e-8);
    const YoulaRealization yr = youla_realization(c.dcf, Q);
    CHECK(max_tap_distance(markov(yr.YtQ, kN), y.YtQ) < 1e-10);
  }
}

TEST_CASE("P system identities")
{
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), kN);
  const Fir P = markov(p_system(d.plant, d.gains.F), kN);
  CHECK(max_tap_distance(P, scalar_ratio(1, 0, 0.5, kN)) < 1e-14);
  const Fir FP = d.gains.F * P;
  CHECK(FP[1](0, 0) == doctest::Approx(-1.5));
  CHECK(FP[2](0, 0) == doctest::Approx(-0.75));
  CHECK(max_tap_distance(FP, d.fM - Fir::identity(1, kN + 1)) < 1e-14);

  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const RandomCase c = random_case(rng, 4, 2, 3);
    const System Ps = p_system(c.plant, c.dcf.gains.F);
    const Fir Pf = markov(Ps, kN);
    CHECK(max_tap_distance(c.dcf.gains.F * Pf, c.dcf.fM - Fir::identity(2, kN + 1)) < 1e-10);
    // P M^{-1} = (zI - A)^{-1} B on the Markov parameters.
    const System open(c.plant.A, c.plant.B, Matrix::Identity(4, 4), Matrix::Zero(4, 2));
    CHECK(max_tap_distance(markov(Ps * inverse(c.dcf.M), 12), markov(open, 12)) < 1e-8);
  }

  const System g0 = scalar_plant();
  const Fir FP0 = Matrix::Zero(1, 1) * markov(p_system(g0, Matrix::Zero(1, 1)), 5);
  CHECK(h2_norm(FP0) == 0.0);
}

TEST_CASE("observer parameterization")
{
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), kN);
  const ObserverPair o = observer_from_s(d, Fir(1, 1, 1), kN);
  CHECK(max_tap_distance(o.psi_u, scalar_psi_u(kN)) < 1e-12);
  const Fir psi_y = fir_series(scalar_ratio(1, 0, 0.5, kN), scalar_ratio(2.25, 0, 0.5, kN), kN);
  CHECK(max_tap_distance(o.psi_y, psi_y) < 1e-12);
  CHECK(observer_residual(d, o) < 1e-12);

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const RandomCase c = random_case(rng, 3, 1, 2);
    const Fir S = random_fir(3, 2, 5, rng);
    CHECK(observer_residual(c.dcf, observer_from_s(c.dcf, S, kN)) <= 1e-8);
    const Fir Q = random_fir(1, 2, 5, rng);
    CHECK(observer_residual(c.dcf, observer_from_q(c.dcf, Q, kN)) <= 1e-8);
  }
  CHECK_THROWS_AS(observer_from_s(d, Fir(2, 1, 1)), dimension_error);
}

TEST_CASE("S and Q correspondence")
{
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), kN);
  const QToS zero = q_to_s(d, -d.fXt);
  CHECK(h2_norm(zero.S) < 1e-15);
  const QToS s0 = q_to_s(d, Fir(1, 1, 1));
  CHECK(max_tap_distance(s0.S, scalar_ratio(-1.5, 0, 0.5, kN)) < 1e-14);
  CHECK(s0.residual < 1e-14);

  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const RandomCase c = random_case(rng, 4, 2, 2);
    const Fir Q = random_fir(2, 2, 7, rng);
    const QToS qs = q_to_s(c.dcf, Q);
    CHECK(qs.residual <= 1e-10);
    CHECK(max_tap_distance(s_to_q(c.dcf, qs.S), truncate(Q, kN + 1)) <= 1e-10);
  }

  // Rank-deficient F: no bijection.
  System g(Matrix::Identity(2, 2) * 0.5, Matrix::Identity(2, 2), Matrix::Identity(1, 2), Matrix::Zero(1, 2));
  GainPair gp{Matrix::Zero(2, 2), Matrix::Constant(2, 1, 0.1)};
  const Dcf dz = build_dcf(g, gp, 8);
  CHECK_THROWS_AS(q_to_s(dz, Fir(2, 1, 2)), std::domain_error);
}

TEST_CASE("estimation error maps match the simulated loop")
{
  std::mt19937_64 rng(41);
  const Index T = 50;
  for (int trial = 0; trial < 5; ++trial) {
    const RandomCase c = random_case(rng, 3, 2, 2, T + 5);
    const Fir S = random_fir(3, 2, 4, rng, 0.5);
    const auto maps = estimation_error_maps(c.dcf, S);
    const ObserverPair o = observer_from_s(c.dcf, S, T + 5);
    for (Index k = 0; k < 2; ++k) {
      Matrix w = Matrix::Zero(2, T);
      w(k, 0) = 1.0;
      const ObserverTrace tr = simulate_observer_loop(
        c.plant, c.dcf.gains.F, o, w, Matrix::Zero(2, T), Matrix::Zero(3, T));
      double err = 0;
      for (Index t = 0; t < T; ++t) {
        err = std::max(err, (tr.x.col(t) - tr.xhat.col(t) - maps.first[t].col(k)).norm());
      }
      CHECK(err <= 1e-6);

      Matrix nu = Matrix::Zero(2, T);
      nu(k, 0) = 1.0;
      const ObserverTrace tn = simulate_observer_loop(
        c.plant, c.dcf.gains.F, o, Matrix::Zero(2, T), nu, Matrix::Zero(3, T));
      err = 0;
      for (Index t = 0; t < T; ++t) {
        err = std::max(err, (tn.x.col(t) - tn.xhat.col(t) - maps.second[t].col(k)).norm());
      }
      CHECK(err <= 1e-6);
    }
  }
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), kN);
  const auto m0 = estimation_error_maps(d, Fir(1, 1, 1));
  const ObserverPair o0 = observer_from_s(d, Fir(1, 1, 1));
  CHECK(max_tap_distance(m0.first, o0.psi_u) == 0.0);
  CHECK(max_tap_distance(m0.second, -o0.psi_y) == 0.0);
}

TEST_CASE("objective transfer")
{
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), 200);
  const Fir t0 = objective_transfer(d, Fir(1, 1, 1));
  const Fir ref = fir_stack_cols(Fir::identity(1, 201) - d.fY, d.fX);
  CHECK(max_tap_distance(t0, ref) < 1e-14);
  CHECK(h2_norm(t0) == doctest::Approx(std::sqrt((1.5 * 1.5 + 2.25 * 2.25) * 4.0 / 3.0)).epsilon(1e-12));
  CHECK(h2_norm(t0) == doctest::Approx(3.1225).epsilon(1e-4));

  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 8; ++trial) {
    const RandomCase c = random_case(rng, 3, 2, 2);
    const Fir Q1 = random_fir(2, 2, 4, rng);
    const Fir Q2 = random_fir(2, 2, 4, rng);
    const Fir o0 = objective_transfer(c.dcf, Fir(2, 2, 1));
    const Fir lhs = objective_transfer(c.dcf, Q1 + Q2) - o0;
    const Fir rhs = (objective_transfer(c.dcf, Q1) - o0) + (objective_transfer(c.dcf, Q2) - o0);
    CHECK(max_tap_distance(lhs, rhs) <= 1e-9);

    // The stated formula is the F-weighted error map of the observer built
    // with Y_Q, X_Q.
    const ObserverPair oq = observer_from_q(c.dcf, Q1, kN);
    const Fir viaq = fir_stack_cols(c.dcf.gains.F * oq.psi_u, c.dcf.gains.F * (-oq.psi_y));
    CHECK(max_tap_distance(viaq, objective_transfer(c.dcf, Q1, kN)) <= 1e-8);

    // The observer of the S parameterization with F S = Q + X~ has error map
    // [I - Y_Q, X_Q].
    const YoulaFactors yf = youla_factors(c.dcf, Q1, kN);
    const Fir viaS = observer_objective(c.dcf, q_to_s(c.dcf, Q1).S, kN);
    CHECK(max_tap_distance(viaS, fir_stack_cols(Fir::identity(2, kN + 1) - yf.YQ, yf.XQ)) <= 1e-8);
  }
}

TEST_CASE("every stable Q stabilizes the plant")
{
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 15; ++trial) {
    const RandomCase c = random_case(rng, 1 + trial % 4, 1 + trial % 2, 1 + trial % 2);
    const Fir Q = random_fir(c.plant.inputs(), c.plant.outputs(), 5, rng, 2.0);
    const ClosedLoop cl = closed_loop(c.plant, factor_controller(youla_realization(c.dcf, Q)));
    CHECK(spectral_radius(cl.sys.A) < 1.0);
    Matrix v = randn(cl.sys.inputs(), 400, rng);
    const Matrix out = simulate(cl.sys, v);
    CHECK(out.allFinite());
  }
}
