#include "test_support.hpp"

#include "robs/io.hpp"

#include <doctest.h>

using namespace robs;
using namespace robs::testing;

namespace
{

double max_diff(const System & a, const System & b)
{
  return std::max({
      (a.A - b.A).cwiseAbs().maxCoeff(), (a.B - b.B).cwiseAbs().maxCoeff(),
      (a.C - b.C).cwiseAbs().maxCoeff(), (a.D - b.D).cwiseAbs().maxCoeff()});
}

std::string field_of(const std::function<void()> & f)
{
  try {
    f();
  } catch (const ConfigError & e) {
    return e.field;
  }
  return "";
}

}  // namespace

TEST_CASE("state space and FIR round trips are exact")
{
  std::mt19937_64 rng(2);
  const System s = random_plant(3, 2, 2, rng);
  const System back = system_from_json(Json::parse(to_json(s).dump()));
  CHECK(max_diff(s, back) == 0.0);

  // A static gain keeps its shape.
  const System g = System::gain(Matrix::Constant(2, 3, 0.5));
  const System gb = system_from_json(Json::parse(to_json(g).dump()));
  CHECK(gb.states() == 0);
  CHECK(gb.inputs() == 3);
  CHECK(gb.outputs() == 2);

  const Fir f = random_fir(2, 3, 4, rng);
  const Fir fb = fir_from_json(Json::parse(to_json(f).dump()));
  REQUIRE(fb.size() == f.size());
  for (Index k = 0; k < f.size(); ++k) {
    CHECK((f[k] - fb[k]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("factorization round trip keeps the Bezout identity")
{
  const Experiment ex = reference_experiment();
  NoiseConfig nc = ex.noise;
  nc.seed = 1;
  const Trajectory traj = simulate_closed_loop(
    ex.true_plant, youla_realization(ex.initial, Fir::scalar({0.0})), nc, 1024);
  const Dcf & model = identify(traj, ex.initial, ex.identify).factors.model;
  const Dcf back = dcf_from_json(Json::parse(to_json(model).dump()));
  CHECK(max_diff(model.Mt, back.Mt) == 0.0);
  CHECK(max_diff(model.Yt, back.Yt) == 0.0);
  CHECK(back.fir_len == model.fir_len);
  CHECK(bezout_residual(back, 40) < 1e-10);
}

TEST_CASE("synthesis result and reports")
{
  const Dcf d = build_dcf(scalar_plant(), scalar_gains(), 16);
  SynthesisConfig cfg;
  cfg.fir_len = 8;
  const SynthesisResult r = outer_search(cfg, d);
  const Json j = Json::parse(to_json(r).dump());
  CHECK(j["alpha_star"].is_null());  // gamma = 0 runs at alpha = inf
  const SynthesisResult b = synthesis_from_json(j);
  CHECK(std::isinf(b.alpha_star));
  CHECK(b.bound_value == r.bound_value);
  CHECK(b.q_star.size() == r.q_star.size());

  const std::vector<MonteCarloRow> rows{{7, 0.95, 0.1, 0.5, true, true}};
  CHECK(monte_carlo_csv(rows) == "seed,fraction,pert_norm,product_norm,phi_invertible,loop_stable\n7,0.95,0.1,0.5,1,1\n");
}

TEST_CASE("trajectory CSV feeds identification")
{
  const Experiment ex = reference_experiment();
  NoiseConfig nc = ex.noise;
  nc.seed = 4;
  const Trajectory traj = simulate_closed_loop(
    ex.true_plant, youla_realization(ex.initial, Fir::scalar({0.0})), nc, 512);
  const DualYoulaSignals sig = dual_youla_signals(traj, ex.initial);
  const DualYoulaSignals back = signals_from_csv(trajectory_csv(traj, sig), 1, 1);
  CHECK((back.e1 - sig.e1).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((back.e2 - sig.e2).cwiseAbs().maxCoeff() < 1e-14);
  const IdentifiedModel a = identify(traj, ex.initial, ex.identify);
  const IdentifiedModel b = identify(back, ex.initial, ex.identify);
  CHECK(a.factors.gamma_hat == doctest::Approx(b.factors.gamma_hat).epsilon(1e-12));

  const Json rep = identification_report(a, ex.initial, &ex.true_plant);
  for (const char * k : {"d_hat", "order", "singular_values", "gamma_hat", "hankel_error", "gamma_true"}) {
    CHECK(rep.contains(k));
  }
  CHECK(field_of([] {signals_from_csv("t,u,y,r\n0,1,2,3\n", 1, 1);}) == "trajectory.e1");
}

TEST_CASE("experiment config")
{
  const ExperimentConfig ref = parse_experiment_config(Json::object());
  CHECK(ref.T_list.front() == 256);
  CHECK(ref.seeds.size() == 10);
  CHECK(ref.identify.params.script_R == 0.0042);
  CHECK(ref.gains.F(0, 0) == doctest::Approx(reference_experiment().initial.gains.F(0, 0)));

  const ExperimentConfig custom = parse_experiment_config(Json::parse(R"({
      "plant": {"A": [[0.9, 0.1], [0, 0.5]], "B": [[0], [1]], "C": [[1, 0]]},
      "T": [100, 200], "seeds": [3],
      "synthesis": {"alpha_grid": "log:5", "gamma": 0.01}})"));
  CHECK(custom.true_plant.states() == 2);
  CHECK(custom.model.states() == 2);
  CHECK(custom.gains_mode == "riccati");
  CHECK(custom.alpha_points == 5);
  CHECK(custom.gamma_override.value() == 0.01);
  CHECK_NOTHROW(custom.experiment());

  const ExperimentConfig scalar = parse_experiment_config(Json::parse(R"({"plant": "scalar"})"));
  CHECK(scalar.gains.F(0, 0) == -1.5);
  CHECK(scalar.gains_mode == "given");

  auto bad = [](const char * text) {
      return field_of([text] {parse_experiment_config(Json::parse(text));});
    };
  CHECK(bad(R"({"T": [512, 256]})") == "T");
  CHECK(bad(R"({"seeds": []})") == "seeds");
  CHECK(bad(R"({"noise": {"sigma_w": -1}})") == "noise.sigma_w");
  CHECK(bad(R"({"noise": {"sigma_x": 1}})") == "noise.sigma_x");
  CHECK(bad(R"({"plant": "nope"})") == "plant");
  CHECK(bad(R"({"plant": {"A": [[1, 2]], "B": [[1]], "C": [[1]]}})") == "plant.A");
  CHECK(bad(R"({"plant": {"A": [[0.5]], "B": [[1, "x"]], "C": [[1]]}})") == "plant.B[0][1]");
  CHECK(bad(R"({"gains": {"mode": "given", "F": [[1]]}})") == "gains.L");
  CHECK(bad(R"({"synthesis": {"alpha_grid": "3:1:4"}})") == "synthesis.alpha_grid");
  CHECK(bad(R"({"synthesis": {"fir_len": 0}})") == "synthesis.fir_len");
  CHECK(bad(R"({"identification": {"delta_fail": 2}})") == "identification");
  CHECK(bad(R"({"tpyo": 1})") == "tpyo");
}

TEST_CASE("alpha grid specs")
{
  CHECK(parse_alpha_grid("log:7").default_points == 7);
  const AlphaGridSpec g = parse_alpha_grid("1:100:3");
  REQUIRE(g.values.size() == 3);
  CHECK(g.values[1] == doctest::Approx(10.0));
  CHECK(parse_alpha_grid("1.5,2,4").values == std::vector<double>{1.5, 2.0, 4.0});
  CHECK_THROWS_AS(parse_alpha_grid("2,1"), ConfigError);
  CHECK_THROWS_AS(parse_alpha_grid("log:x"), ConfigError);
}
