#include "robs/pipeline.hpp"

#include "robs/riccati.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace robs
{

/* -------------------------------------------------------------------------- */
/*                                    Costs                                   */
/* -------------------------------------------------------------------------- */

namespace
{

// Restricts the closed loop to w and maps its outputs through `rows`.
System loop_from_closed(const ClosedLoop & cl, const Matrix & rows)
{
  const Matrix B = cl.sys.B.middleCols(cl.input_w(), cl.m);
  const Matrix D = cl.sys.D.middleCols(cl.input_w(), cl.m);
  const Matrix xu_C = cl.sys.C.topRows(cl.n + cl.m);
  const Matrix xu_D = D.topRows(cl.n + cl.m);
  return System(cl.sys.A, B, rows * xu_C, rows * xu_D);
}

}  // namespace

System state_feedback_loop(const System & plant, const Matrix & F)
{
  require_dims(F.rows() == plant.inputs() && F.cols() == plant.states(), "state_feedback_loop: F must be m x n");
  Matrix Cz(plant.outputs() + plant.inputs(), plant.states());
  Cz << plant.C, F;
  return System(plant.A + plant.B * F, plant.B, Cz, Matrix::Zero(Cz.rows(), plant.inputs()));
}

System controller_loop(const System & plant, const YoulaRealization & ctrl)
{
  const ClosedLoop cl = closed_loop(plant, factor_controller(ctrl));
  Matrix rows = Matrix::Zero(cl.p + cl.m, cl.n + cl.m);
  rows.topLeftCorner(cl.p, cl.n) = plant.C;
  rows.bottomRightCorner(cl.m, cl.m).setIdentity();
  return loop_from_closed(cl, rows);
}

System feedback_error_loop(const System & plant, const YoulaRealization & ctrl, const Matrix & F)
{
  const ClosedLoop cl = closed_loop(plant, factor_controller(ctrl));
  require_dims(F.rows() == cl.m && F.cols() == cl.n, "feedback_error_loop: F must be m x n");
  Matrix rows(cl.m, cl.n + cl.m);
  rows << -F, Matrix::Identity(cl.m, cl.m);
  return loop_from_closed(cl, rows);
}

double h2_cost_simulated(const System & loop, double tol, Index max_steps)
{
  double J = 0;
  for (Index k = 0; k < loop.inputs(); ++k) {
    Vector x = loop.B.col(k);
    J += loop.D.col(k).squaredNorm();
    Index t = 1;
    for (;; ++t) {
      const double inc = (loop.C * x).squaredNorm();
      J += inc;
      const double xs = x.squaredNorm();
      if (inc < tol && xs < tol) {
        break;
      }
      if (t >= max_steps || !std::isfinite(xs) || xs > 1e24) {
        throw std::overflow_error("h2_cost_simulated: impulse response does not decay (unstable loop)");
      }
      x = loop.A * x;
    }
  }
  return J;
}

LqrReference lqr_reference(const System & plant)
{
  const Index m = plant.inputs();
  const auto sol = dare<double>(
    plant.A, plant.B, plant.C.transpose() * plant.C, Matrix::Identity(m, m));
  LqrReference r;
  r.S = sol.S;
  r.F = sol.F;
  r.residual = sol.residual;
  const Matrix G = plant.B.transpose() * sol.S * plant.B;
  r.J_opt = G.trace();
  r.weight = Eigen::SelfAdjointEigenSolver<Matrix>(Matrix::Identity(m, m) + G).eigenvalues().maxCoeff();
  return r;
}

/* -------------------------------------------------------------------------- */
/*                                Gap and bound                               */
/* -------------------------------------------------------------------------- */

GapRow gap_and_bound(
  const System & plant_true, const Matrix & F, const Dcf & nominal, const Fir & Q, double alpha,
  double gamma, Index horizon)
{
  GapRow g;
  g.bound = upper_bound_value(nominal, Q, alpha, gamma, horizon);
  g.bound_sq = g.bound * g.bound;
  const YoulaRealization ctrl = youla_realization(nominal, Q);
  g.J_u = h2_cost_simulated(state_feedback_loop(plant_true, F));
  g.J_uhat = h2_cost_simulated(controller_loop(plant_true, ctrl));
  g.gap = g.J_uhat - g.J_u;
  g.err_sq = h2_cost_simulated(feedback_error_loop(plant_true, ctrl, F));
  g.bound_weighted = lqr_reference(plant_true).weight * g.bound_sq;
  g.dominated = g.gap <= g.bound_weighted + 1e-6;
  return g;
}


/* -------------------------------------------------------------------------- */
/*                                  T sweep                                   */
/* -------------------------------------------------------------------------- */

GainPair riccati_gains(const System & true_plant, const System & model)
{
  require_dims(true_plant.states() == model.states() && true_plant.inputs() == model.inputs() &&
    true_plant.outputs() == model.outputs(), "riccati_gains: plant and model dimensions differ");
  const Index p = model.outputs();
  const auto est = dare<double>(
    model.A.transpose(), model.C.transpose(), model.B * model.B.transpose(), Matrix::Identity(p, p));
  return GainPair{lqr_reference(true_plant).F, -est.F.transpose()};
}

Experiment reference_experiment()
{
  const Matrix one = Matrix::Constant(1, 1, 1.0);
  const System g(Matrix::Constant(1, 1, 0.5), one, one, Matrix::Zero(1, 1));
  const System g0(Matrix::Constant(1, 1, 0.6), one, one, Matrix::Zero(1, 1));
  Experiment ex;
  ex.true_plant = g;
  ex.initial = build_dcf(g0, riccati_gains(g, g0), 40);
  ex.identify.params.script_R = 0.0042;
  ex.synthesis.fir_len = 16;
  return ex;
}

void SweepConfig::validate() const
{
  if (T_list.empty() || seeds.empty()) {
    throw std::invalid_argument("SweepConfig: T list and seeds must be nonempty");
  }
  for (std::size_t i = 1; i < T_list.size(); ++i) {
    if (T_list[i] <= T_list[i - 1]) {
      throw std::invalid_argument("SweepConfig: T list must be increasing");
    }
  }
  if (threads < 1) {
    throw std::invalid_argument("SweepConfig: threads must be positive");
  }
}

namespace
{

// Two-sided 95% Student quantiles for 1..30 degrees of freedom.
double t_quantile(int dof)
{
  static const double table[30] = {
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
    2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  return dof >= 1 && dof <= 30 ? table[dof - 1] : 1.96;
}

double median_of(std::vector<double> v)
{
  if (v.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

bool non_increasing(const std::vector<double> & v)
{
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] <= v[i - 1])) {
      return false;
    }
  }
  return true;
}

SynthesisConfig synthesis_for(const Experiment & ex, const Dcf & model, double gamma)
{
  SynthesisConfig cfg = ex.synthesis;
  cfg.gamma = gamma;
  if (gamma > 0 && cfg.alpha_grid.empty()) {
    cfg.alpha_grid = default_alpha_grid(constants(model), gamma, ex.alpha_points);
  }
  if (gamma == 0) {
    cfg.alpha_grid.clear();
  }
  return cfg;
}

}  // namespace

SlopeFit fit_loglog(const std::vector<double> & x, const std::vector<double> & y)
{
  require_dims(x.size() == y.size(), "fit_loglog: sizes differ");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0 && y[i] > 0 && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  SlopeFit f;
  f.points = static_cast<int>(lx.size());
  if (f.points < 2) {
    f.slope = f.lo = f.hi = std::numeric_limits<double>::quiet_NaN();
    return f;
  }
  const double n = double(f.points);
  double mx = 0, my = 0;
  for (int i = 0; i < f.points; ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0, sxy = 0;
  for (int i = 0; i < f.points; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  f.slope = sxy / sxx;
  if (f.points > 2) {
    double sse = 0;
    for (int i = 0; i < f.points; ++i) {
      const double r = ly[i] - my - f.slope * (lx[i] - mx);
      sse += r * r;
    }
    f.stderr_ = std::sqrt(sse / (n - 2) / sxx);
  }
  const double t = t_quantile(f.points - 2);
  f.lo = f.slope - t * f.stderr_;
  f.hi = f.slope + t * f.stderr_;
  return f;
}

double limiting_gap(const Experiment & ex)
{
  const System R = dual_youla_parameter(ex.initial, ex.true_plant);
  SampleComplexityParams k = ex.identify.params;
  k.m = ex.initial.m();
  k.p = ex.initial.p();
  const Dcf exact = recover_factors(ex.initial, R, k, 1, 1).model;
  const SynthesisResult s = outer_search(synthesis_for(ex, exact, 0.0), exact);
  return gap_and_bound(
    ex.true_plant, ex.initial.gains.F, exact, s.q_star, s.alpha_star, 0.0, ex.synthesis.fir_len).gap;
}

double calibrate_script_r(
  const Experiment & ex, Index T, const std::vector<std::uint64_t> & seeds, double quantile, double margin)
{
  require_dims(!seeds.empty() && quantile > 0 && quantile <= 1, "calibrate_script_r: seeds and quantile");
  Experiment unit = ex;
  unit.identify.params.script_R = 1.0;
  const System R = dual_youla_parameter(ex.initial, ex.true_plant);
  std::vector<double> ratio;
  for (std::uint64_t seed : seeds) {
    NoiseConfig nc = ex.noise;
    nc.seed = seed;
    const Trajectory traj = simulate_closed_loop(
      ex.true_plant, youla_realization(ex.initial, Fir::scalar({0.0})), nc, T);
    const IdentifiedModel im = identify(traj, ex.initial, unit.identify);
    const double truth = hinf_norm((R - im.R_hat) * stack_cols(-ex.initial.X, ex.initial.Y));
    ratio.push_back(truth / im.factors.gamma_hat);
  }
  std::sort(ratio.begin(), ratio.end());
  const std::size_t k = std::min(ratio.size() - 1, static_cast<std::size_t>(std::ceil(quantile * double(ratio.size()))) - 1);
  return margin * ratio[k];
}

SweepRow sweep_cell(const Experiment & ex, Index T, std::uint64_t seed, double gap_limit)
{
  SweepRow row;
  row.T = T;
  row.seed = seed;
  const Dcf & init = ex.initial;
  // Each failure is reported under the stage that raised it.
  const char * stage = "simulation";
  try {
    NoiseConfig nc = ex.noise;
    nc.seed = seed;
    const Trajectory traj = simulate_closed_loop(ex.true_plant, youla_realization(init, Fir::scalar({0.0})), nc, T);
    stage = "identification";
    const IdentifiedModel im = identify(traj, init, ex.identify);
    row.d_hat = im.d_hat;
    row.order = im.order;
    row.gamma_hat = im.factors.gamma_hat;

    const System R = dual_youla_parameter(init, ex.true_plant);
    const Matrix H = hankel_matrix(markov(R, 2 * im.d_hat), im.d_hat);
    row.hankel_error = Eigen::JacobiSVD<Matrix>(im.hankel.H_hat - H).singularValues()(0);
    row.gamma_true = hinf_norm((R - im.R_hat) * stack_cols(-init.X, init.Y));

    stage = "synthesis";
    const Dcf & model = im.factors.model;
    const SynthesisResult s = outer_search(synthesis_for(ex, model, im.factors.gamma), model);
    row.alpha_star = s.alpha_star;

    stage = "evaluation";
    const GapRow g = gap_and_bound(
      ex.true_plant, init.gains.F, model, s.q_star, s.alpha_star, im.factors.gamma, ex.synthesis.fir_len);
    row.J_u = g.J_u;
    row.J_uhat = g.J_uhat;
    row.gap = g.gap;
    row.excess = g.gap - gap_limit;
    row.err_sq = g.err_sq;
    row.bound = g.bound;
    row.bound_sq = g.bound_sq;
    row.bound_weighted = g.bound_weighted;
  } catch (const std::exception &) {
    row.status = std::string(stage) + "_failed";
  }
  return row;
}

void summarize(SweepReport & rep, const std::vector<Index> & T_list)
{
  const std::size_t nt = T_list.size();
  rep.T.clear();
  rep.median_gap.clear();
  rep.median_excess.clear();
  rep.median_gamma_hat.clear();
  rep.median_hankel_error.clear();
  rep.all_dominated = true;
  std::vector<double> rates, Ts;
  for (std::size_t a = 0; a < nt; ++a) {
    std::vector<double> gap, excess, gh, he;
    for (const SweepRow & r : rep.rows) {
      if (r.T != T_list[a] || r.status != "ok") {
        continue;
      }
      gap.push_back(r.gap);
      excess.push_back(r.excess);
      gh.push_back(r.gamma_hat);
      he.push_back(r.hankel_error);
      rep.all_dominated = rep.all_dominated && r.gap <= r.bound + 1e-6 && r.gap <= r.bound_weighted + 1e-6;
    }
    rep.T.push_back(T_list[a]);
    rates.push_back(rate(double(T_list[a])));
    Ts.push_back(double(T_list[a]));
    rep.median_gap.push_back(median_of(gap));
    rep.median_excess.push_back(median_of(excess));
    rep.median_gamma_hat.push_back(median_of(gh));
    rep.median_hankel_error.push_back(median_of(he));
  }
  rep.gap_fit = fit_loglog(rates, rep.median_gap);
  rep.excess_fit = fit_loglog(rates, rep.median_excess);
  rep.gamma_fit = fit_loglog(rates, rep.median_gamma_hat);
  rep.hankel_fit = fit_loglog(Ts, rep.median_hankel_error);
  rep.gap_monotone = non_increasing(rep.median_gap);
  rep.excess_monotone = non_increasing(rep.median_excess);
}

SweepReport sweep_T(const Experiment & ex, const SweepConfig & cfg)
{
  cfg.validate();
  SweepReport rep;
  rep.gap_limit = limiting_gap(ex);

  const std::size_t nt = cfg.T_list.size(), ns = cfg.seeds.size();
  rep.rows.resize(nt * ns);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
      for (std::size_t i = next++; i < rep.rows.size(); i = next++) {
        rep.rows[i] = sweep_cell(ex, cfg.T_list[i / ns], cfg.seeds[i % ns], rep.gap_limit);
      }
    };
  std::vector<std::thread> pool;
  for (int t = 1; t < cfg.threads; ++t) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto & th : pool) {
    th.join();
  }

  summarize(rep, cfg.T_list);
  return rep;
}

std::string sweep_csv(const SweepReport & report)
{
  std::ostringstream os;
  os.precision(12);
  os << "T,seed,status,d_hat,order,hankel_error,gamma_hat,gamma_true,alpha_star,"
        "J_u,J_uhat,gap,excess,err_sq,bound,bound_sq,bound_weighted\n";
  for (const SweepRow & r : report.rows) {
    os << r.T << ',' << r.seed << ',' << r.status << ',' << r.d_hat << ',' << r.order << ','
       << r.hankel_error << ',' << r.gamma_hat << ',' << r.gamma_true << ',' << r.alpha_star << ','
       << r.J_u << ',' << r.J_uhat << ',' << r.gap << ',' << r.excess << ',' << r.err_sq << ','
       << r.bound << ',' << r.bound_sq << ',' << r.bound_weighted << '\n';
  }
  return os.str();
}

}  // namespace robs
