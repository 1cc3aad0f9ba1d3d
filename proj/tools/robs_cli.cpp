// Command-line driver. Every stage reads its inputs from files in the output
// directory and writes its results there, so any stage can be rerun alone.
//
// Exit codes: 0 success, 2 validation error, 3 solver failure.

#include "robs/io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

using namespace robs;

namespace
{

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

struct SolverFailure : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct Options
{
  std::string config;
  std::string plant;
  std::string out;
  std::string seeds;
  std::string alpha_grid;
  Index fir_len = -1;
  double gamma = -1;
  Index T = -1;
  bool quiet = false;
};

std::vector<std::uint64_t> parse_seeds(const std::string & s)
{
  std::vector<std::uint64_t> v;
  std::istringstream in(s);
  for (std::string cell; std::getline(in, cell, ',');) {
    std::size_t used = 0;
    long long x = -1;
    try {
      x = std::stoll(cell, &used);
    } catch (const std::exception &) {
    }
    if (x < 0 || used != cell.size()) {
      throw ConfigError("--seeds", "expected a comma list of nonnegative integers, got '" + cell + "'");
    }
    v.push_back(std::uint64_t(x));
  }
  if (v.empty()) {
    throw ConfigError("--seeds", "empty list");
  }
  return v;
}

// Config file (or named plant), then flags on top.
ExperimentConfig resolve(const Options & o, const std::string & default_plant)
{
  ExperimentConfig c = !o.config.empty() ? load_experiment_config(o.config) :
    named_experiment(o.plant.empty() ? default_plant : o.plant);
  if (!o.config.empty() && !o.plant.empty()) {
    throw ConfigError("--plant", "give either --config or --plant");
  }
  if (!o.out.empty()) {
    c.out_dir = o.out;
  }
  if (!o.seeds.empty()) {
    c.seeds = parse_seeds(o.seeds);
  }
  if (o.fir_len > 0) {
    c.synthesis.fir_len = o.fir_len;
  }
  if (!o.alpha_grid.empty()) {
    const AlphaGridSpec g = parse_alpha_grid(o.alpha_grid, "--alpha-grid");
    c.synthesis.alpha_grid = g.values;
    if (g.default_points > 0) {
      c.alpha_points = g.default_points;
    }
  }
  if (o.gamma >= 0) {
    c.gamma_override = o.gamma;
  }
  c.validate();
  return c;
}

std::string at(const ExperimentConfig & c, const char * file)
{
  return (std::filesystem::path(c.out_dir) / file).string();
}

Json load_json(const std::string & path)
{
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error & e) {
    throw ConfigError(path, std::string("not valid JSON: ") + e.what());
  }
}

void say(const Options & o, const std::string & s)
{
  if (!o.quiet) {
    std::cout << s << '\n';
  }
}

std::string num(double v)
{
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

/* --------------------------------- stages --------------------------------- */

Dcf stage_factorize(const Options & o, const ExperimentConfig & c)
{
  const Dcf d = c.experiment().initial;
  write_file(at(c, "dcf.json"), to_json(d).dump(2) + "\n");
  say(o, "factorize: wrote " + at(c, "dcf.json") + " (gains " + c.gains_mode + ", stack norm " +
    num(constants(d).stack_norm) + ")");
  return d;
}

Dcf initial_dcf(const Options & o, const ExperimentConfig & c)
{
  const std::string path = at(c, "dcf.json");
  if (std::filesystem::exists(path)) {
    return dcf_from_json(load_json(path), "dcf.json");
  }
  return stage_factorize(o, c);
}

void stage_simulate(const Options & o, const ExperimentConfig & c)
{
  const Dcf d = initial_dcf(o, c);
  NoiseConfig nc = c.noise;
  nc.seed = c.seeds.front();
  const Index T = o.T > 0 ? o.T : c.T_list.back();
  const Trajectory traj = simulate_closed_loop(c.true_plant, youla_realization(d, Fir::scalar({0.0})), nc, T);
  write_file(at(c, "trajectory.csv"), trajectory_csv(traj, dual_youla_signals(traj, d)));
  say(o, "simulate: wrote " + at(c, "trajectory.csv") + " (T " + std::to_string(T) + ", seed " +
    std::to_string(nc.seed) + ")");
}

void stage_identify(const Options & o, const ExperimentConfig & c)
{
  const Dcf d = initial_dcf(o, c);
  const DualYoulaSignals sig = signals_from_csv(read_file(at(c, "trajectory.csv")), d.m(), d.p());
  const IdentifiedModel im = identify(sig, d, c.identify);
  write_file(at(c, "identification.json"), identification_report(im, d, &c.true_plant).dump(2) + "\n");
  write_file(at(c, "model.json"), to_json(im.factors.model).dump(2) + "\n");
  say(o, "identify: d_hat " + std::to_string(im.d_hat) + ", order " + std::to_string(im.order) +
    ", gamma_hat " + num(im.factors.gamma_hat) + "; wrote identification.json and model.json");
}

void stage_synthesize(const Options & o, const ExperimentConfig & c)
{
  const Dcf model = dcf_from_json(load_json(at(c, "model.json")), "model.json");
  double gamma = 0;
  if (c.gamma_override) {
    gamma = *c.gamma_override;
  } else {
    const Json rep = load_json(at(c, "identification.json"));
    gamma = rep.at("gamma").get<double>();
  }
  SynthesisConfig sc = c.synthesis;
  sc.gamma = gamma;
  if (gamma == 0) {
    sc.alpha_grid.clear();
  } else if (sc.alpha_grid.empty()) {
    sc.alpha_grid = default_alpha_grid(constants(model), gamma, c.alpha_points);
    if (sc.alpha_grid.empty()) {
      throw SolverFailure(
        "synthesize: the central controller already has ||[Y~; X~]||_inf >= 0.98/gamma (gamma = " +
        num(gamma) + "), so no alpha satisfies the robustness premise; reduce gamma or collect more data");
    }
  }
  SynthesisResult r;
  try {
    r = outer_search(sc, model);
  } catch (const std::invalid_argument &) {
    throw;
  } catch (const std::runtime_error & e) {
    throw SolverFailure(
      std::string(e.what()) + "\nEvery alpha on the grid was infeasible. The constraint "
      "||[Y~_Q; X~_Q]||_inf <= alpha shrinks the admissible set as alpha decreases, and a small "
      "alpha may leave the feasible set empty: every controller factor pair obeys a Bezout identity "
      "that bounds this norm from below. Move the grid toward 1/gamma or use --alpha-grid log:N.");
  }
  write_file(at(c, "synthesis.json"), to_json(r).dump(2) + "\n");
  write_file(at(c, "alpha_trace.csv"), trace_csv(r));
  say(o, "synthesize: gamma " + num(gamma) + ", alpha* " + num(r.alpha_star) + ", bound " +
    num(r.bound_value) + "; wrote synthesis.json and alpha_trace.csv");
}

void stage_evaluate(const Options & o, const ExperimentConfig & c)
{
  const Dcf d = initial_dcf(o, c);
  const Dcf model = dcf_from_json(load_json(at(c, "model.json")), "model.json");
  const SynthesisResult s = synthesis_from_json(load_json(at(c, "synthesis.json")), "synthesis.json");
  const GapRow g = gap_and_bound(c.true_plant, d.gains.F, model, s.q_star, s.alpha_star, s.gamma, c.synthesis.fir_len);
  const LqrReference ref = lqr_reference(c.true_plant);
  Json j = to_json(g);
  j["J_opt"] = ref.J_opt;
  j["lqr_weight"] = ref.weight;
  j["gamma"] = s.gamma;
  j["alpha_star"] = s.alpha_star;
  if (s.gamma > 0) {
    const auto rows = robust_monte_carlo(UncertaintySet{s.gamma, model}, s.q_star, 0.95, 6, 0, 20);
    write_file(at(c, "montecarlo.csv"), monte_carlo_csv(rows));
    bool stable = true;
    for (const auto & r : rows) {
      stable = stable && r.loop_stable;
    }
    j["montecarlo_all_stable"] = stable;
  }
  write_file(at(c, "evaluation.json"), j.dump(2) + "\n");
  say(o, "evaluate: J_u " + num(g.J_u) + ", J_uhat " + num(g.J_uhat) + ", gap " + num(g.gap) + ", bound " +
    num(g.bound) + "; wrote evaluation.json");
  if (g.gap > g.bound + 1e-6) {
    std::cerr << "evaluate: warning: gap exceeds the bound B (weighted bound " << g.bound_weighted << ")\n";
  }
}

void stage_sweep(const Options & o, const ExperimentConfig & c)
{
  const auto t0 = std::chrono::steady_clock::now();
  const SweepReport rep = sweep_T(c.experiment(), c.sweep());
  write_file(at(c, "sweep.csv"), sweep_csv(rep));
  auto fit = [](const SlopeFit & f) {
      return Json{{"slope", f.slope}, {"lo", f.lo}, {"hi", f.hi}, {"points", f.points}};
    };
  std::size_t failed = 0;
  for (const SweepRow & r : rep.rows) {
    failed += r.status != "ok";
  }
  const Json summary{
    {"T", rep.T},
    {"gap_limit", rep.gap_limit},
    {"median_gap", rep.median_gap},
    {"median_excess", rep.median_excess},
    {"median_gamma_hat", rep.median_gamma_hat},
    {"median_hankel_error", rep.median_hankel_error},
    {"gap_fit", fit(rep.gap_fit)},
    {"excess_fit", fit(rep.excess_fit)},
    {"gamma_fit", fit(rep.gamma_fit)},
    {"hankel_fit_vs_T", fit(rep.hankel_fit)},
    {"gap_monotone", rep.gap_monotone},
    {"excess_monotone", rep.excess_monotone},
    {"all_dominated", rep.all_dominated},
    {"failed_cells", failed}};
  write_file(at(c, "sweep_summary.json"), summary.dump(2) + "\n");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  say(o, "sweep: " + std::to_string(rep.rows.size()) + " cells (" + std::to_string(failed) + " failed) in " +
    num(secs) + " s; excess slope " + num(rep.excess_fit.slope) + ", gamma_hat slope " +
    num(rep.gamma_fit.slope) + "; wrote sweep.csv and sweep_summary.json");
}

int run(const std::function<void()> & body)
{
  try {
    body();
    return 0;
  } catch (const SolverFailure & e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const ConfigError & e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const Json::exception & e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument & e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception & e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Robust controller synthesis from closed-loop identification"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App * sub) {
      sub->add_option("--config", o.config, "experiment config JSON");
      sub->add_option("--plant", o.plant, "named experiment: reference or scalar");
      sub->add_option("--out", o.out, "output directory (overrides the config)");
      sub->add_option("--seeds", o.seeds, "comma list of seeds");
      sub->add_option("--fir-len", o.fir_len, "synthesis horizon");
      sub->add_option("--alpha-grid", o.alpha_grid, "log:N, lo:hi:N or a,b,c");
      sub->add_option("--gamma", o.gamma, "uncertainty radius override");
      sub->add_flag("--quiet", o.quiet, "no progress output");
    };

  CLI::App * factorize = app.add_subcommand("factorize", "doubly coprime factorization of the model");
  CLI::App * simulate = app.add_subcommand("simulate", "closed-loop experiment on the true plant");
  CLI::App * identify_cmd = app.add_subcommand("identify", "dual-Youla identification from trajectory.csv");
  CLI::App * synthesize = app.add_subcommand("synthesize", "robust Youla parameter for the identified model");
  CLI::App * evaluate = app.add_subcommand("evaluate", "H2 gap against state feedback on the true plant");
  CLI::App * sweep = app.add_subcommand("sweep", "sample-complexity sweep over T and seeds");
  CLI::App * demo = app.add_subcommand("demo-scalar", "all stages on the scalar example");
  for (CLI::App * s : {factorize, simulate, identify_cmd, synthesize, evaluate, sweep, demo}) {
    common(s);
  }
  simulate->add_option("--T", o.T, "horizon (default: the largest T of the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  return run([&]() {
      if (*demo) {
        const auto t0 = std::chrono::steady_clock::now();
        if (o.out.empty() && o.config.empty()) {
          o.out = "demo-scalar";
        }
        const ExperimentConfig c = resolve(o, "scalar");
        stage_factorize(o, c);
        stage_simulate(o, c);
        stage_identify(o, c);
        stage_synthesize(o, c);
        stage_evaluate(o, c);
        say(o, "demo-scalar: done in " +
          num(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
        return;
      }
      const ExperimentConfig c = resolve(o, "reference");
      if (*factorize) {
        stage_factorize(o, c);
      } else if (*simulate) {
        stage_simulate(o, c);
      } else if (*identify_cmd) {
        stage_identify(o, c);
      } else if (*synthesize) {
        stage_synthesize(o, c);
      } else if (*evaluate) {
        stage_evaluate(o, c);
      } else if (*sweep) {
        stage_sweep(o, c);
      }
    });
}
