#include "test_support.hpp"

#include "robs/conic.hpp"

#include <doctest.h>

using namespace robs;
using namespace robs::testing;

namespace
{

ConicProgram soc_example()
{
  // min t  s.t.  |(3, 4)| <= t
  ProgramBuilder pb;
  const Index t = pb.add_variables(1);
  pb.set_cost(t, 1.0);
  const Index r = pb.add_cone(Cone::soc(3));
  pb.add_term(r, t, 1.0);
  pb.add_constant(r + 1, 3.0);
  pb.add_constant(r + 2, 4.0);
  return pb.build();
}

ConicProgram psd_example()
{
  // min trace X  s.t.  X - I >= 0, X 2x2 with entries (x11, x21, x22)
  ProgramBuilder pb;
  const Index x = pb.add_variables(3);
  pb.set_cost(x, 1.0);
  pb.set_cost(x + 2, 1.0);
  const Index r = pb.add_cone(Cone::psd(2));
  pb.add_term(r, x, 1.0);
  pb.add_constant(r, -1.0);
  pb.add_term(r + 1, x + 1, std::sqrt(2.0));
  pb.add_term(r + 2, x + 2, 1.0);
  pb.add_constant(r + 2, -1.0);
  return pb.build();
}

}  // namespace

TEST_CASE("projections")
{
  Matrix M(2, 2);
  M << 1, 0, 0, -2;
  CHECK((project_psd(M) - Matrix(Eigen::Vector2d(1, 0).asDiagonal())).norm() < 1e-14);

  Vector v(3);
  v << 5, 3, 4;
  CHECK(project_soc(v) == v);
  v << -5, 3, 4;
  CHECK(project_soc(v).norm() == 0.0);
  v << 0, 3, 4;
  const Vector p = project_soc(v);
  CHECK(p(0) == doctest::Approx(2.5));
  CHECK(p.tail(2).norm() == doctest::Approx(2.5));

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix A = randn(4, 4, rng);
    bool sym = true;
    const Matrix P = project_psd(A, &sym);
    CHECK_FALSE(sym);
    CHECK((project_psd(P) - P).norm() < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues().minCoeff() > -1e-12);
    const Vector w = randn(5, 1, rng);
    const Vector q = project_soc(w);
    CHECK((project_soc(q) - q).norm() < 1e-12);
    // Moreau decomposition is orthogonal.
    Vector pol = w;
    project_polar(Cone::soc(5), pol);
    CHECK(std::abs(pol.dot(q)) < 1e-12);
    CHECK((pol + q - w).norm() < 1e-12);
  }

  const Matrix S = project_psd(randn(3, 3, rng));
  CHECK((smat(svec(S), 3) - S).norm() < 1e-14);
  CHECK(svec(S).norm() == doctest::Approx(S.norm()));
}

TEST_CASE("small conic examples")
{
  const Solution a = solve(soc_example());
  REQUIRE(a.status == SolveStatus::optimal);
  CHECK(a.x(0) == doctest::Approx(5.0).epsilon(1e-5));
  CHECK(a.objective == doctest::Approx(a.dual_objective).epsilon(1e-5));

  const Solution b = solve(psd_example());
  REQUIRE(b.status == SolveStatus::optimal);
  CHECK(b.objective == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("linear program against an offline oracle")
{
  // max c'x s.t. A x <= b, x >= 0; optimum of min -c'x from a simplex solver.
  const double A[8][5] = {
    {-0.802, -1.324, -0.248, 0.42, 1.136}, {0.11, -0.553, -0.785, 0.749, 1.635},
    {0.273, -1.233, -0.958, 1.6, 0.203}, {-1.732, -0.084, -1.163, -0.629, -0.488},
    {-0.713, 0.553, -0.063, -0.589, 0.41}, {0.83, -1.643, -0.257, -0.981, -0.173},
    {-1.289, 0.021, -0.038, -0.304, -1.048}, {-0.396, -1.091, -1.355, 0.225, -1.109}};
  const double b[8] = {0.085, 1.545, -0.071, -1.836, 1.121, -1.353, -0.761, -1.907};
  const double c[5] = {-2.122, -4.497, -3.25, 0.927, 0.157};
  const double oracle = 3.7496871335405992;

  ProgramBuilder pb;
  const Index x = pb.add_variables(5);
  for (Index j = 0; j < 5; ++j) {
    pb.set_cost(x + j, -c[j]);
  }
  const Index r = pb.add_cone(Cone::nonneg(13));
  for (Index i = 0; i < 8; ++i) {
    pb.add_constant(r + i, b[i]);
    for (Index j = 0; j < 5; ++j) {
      pb.add_term(r + i, x + j, -A[i][j]);
    }
  }
  for (Index j = 0; j < 5; ++j) {
    pb.add_term(r + 8 + j, x + j, 1.0);
  }
  SolverSettings st;
  st.tol = 1e-8;
  const Solution s = solve(pb.build(), st);
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK(std::abs(s.objective - oracle) <= 1e-5);
  CHECK(std::abs(s.dual_objective - s.objective) <= 1e-5);
}

TEST_CASE("infeasible programs are reported")
{
  // x >= 1 and x <= -1
  ProgramBuilder pb;
  const Index x = pb.add_variables(1);
  const Index r = pb.add_cone(Cone::nonneg(2));
  pb.add_term(r, x, 1.0);
  pb.add_constant(r, -1.0);
  pb.add_term(r + 1, x, -1.0);
  pb.add_constant(r + 1, -1.0);
  CHECK(solve(pb.build()).status == SolveStatus::infeasible);
}

TEST_CASE("max iterations is reported, never silent")
{
  const Solution s = solve(psd_example(), 1e-12, 5);
  CHECK(s.status == SolveStatus::max_iter);
  CHECK(s.iterations == 5);
}

TEST_CASE("H-infinity LMI encoding")
{
  const Fir half = Fir::scalar({0.5});
  CHECK(solve(hinf_lmi_program(half, 0.6)).status == SolveStatus::optimal);
  CHECK(solve(hinf_lmi_program(half, 0.4)).status == SolveStatus::infeasible);
  for (double a : {0.01, 1.0, 10.0}) {
    CHECK(solve(hinf_lmi_program(Fir(2, 1, 4), a)).status == SolveStatus::optimal);
  }
  CHECK_THROWS_AS(hinf_lmi_program(half, 0.0), std::invalid_argument);

  // Monotone in alpha.
  const Fir f = Fir::scalar({1.0, 0.5, -0.25});
  const double h = hinf_norm(f);
  bool seen_feasible = false;
  for (double a = 0.8 * h; a <= 1.2 * h; a += 0.1 * h) {
    const bool ok = solve(hinf_lmi_program(f, a)).status == SolveStatus::optimal;
    CHECK(!(seen_feasible && !ok));
    seen_feasible = seen_feasible || ok;
  }
  CHECK(seen_feasible);
}

TEST_CASE("LMI calibration against the frequency-grid norm")
{
  std::mt19937_64 rng(31);
  int agree = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index rows = 1 + trial % 3;
    const Fir f = random_fir(rows, 1 + (trial / 3) % 2, 2 + trial % 4, rng);
    SolverSettings st;
    st.tol = 1e-7;
    const Solution s = solve(hinf_lmi_min_alpha(f), st);
    REQUIRE(s.status == SolveStatus::optimal);
    const double h = hinf_norm(f);
    agree += std::abs(s.objective - h) <= 0.01 * h;
  }
  CHECK(agree == 50);
}

TEST_CASE("Q-hat and vectorization")
{
  CHECK(build_qhat(Fir::scalar({2.0}), 1, 1) == Matrix::Constant(1, 1, 2.0));
  const Vector v = vec_stack(Fir::identity(2));
  CHECK(v == Eigen::Vector4d(1, 0, 0, 1));

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Index m = 1 + trial % 2, p = 1 + trial % 3, w = 2 + trial % 2, taps = 6;
    const Fir Q = random_fir(m, p, 3, rng);
    const Fir P = random_fir(p, w, 5, rng);
    const Fir C = random_fir(m, w, 5, rng);
    const Vector lhs = vec_stack(C, taps) + build_qhat(Q, w, taps) * vec_stack(P, taps);
    const Fir direct = truncate(C + Q * P, taps);
    CHECK(std::abs(lhs.norm() - h2_norm(direct)) <= 1e-12 * (1 + lhs.norm()));
    CHECK((lhs - vec_stack(direct)).norm() <= 1e-12);
  }
}

TEST_CASE("program JSON round trip")
{
  const ConicProgram p = psd_example();
  const ConicProgram q = conic_program_from_json(to_json(p));
  CHECK(q.c == p.c);
  CHECK(q.b == p.b);
  CHECK(Matrix(q.A) == Matrix(p.A));
  REQUIRE(q.cones.size() == 1);
  CHECK(q.cones[0].kind == ConeKind::psd);
  CHECK(q.cones[0].side == 2);
  CHECK_THROWS(conic_program_from_json(R"({"n":1,"m":1,"c":[1],"b":[1,2],"A":{"i":[],"j":[],"v":[]},"cones":[]})"));

  ConicProgram bad = p;
  bad.cones[0] = Cone::nonneg(2);
  CHECK_THROWS_AS(bad.validate(), dimension_error);
}
