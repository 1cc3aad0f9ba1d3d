#include "robs/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace robs
{

namespace
{

Json matrix_json(const Matrix & M)
{
  Json rows = Json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    Json r = Json::array();
    for (Index k = 0; k < M.cols(); ++k) {
      r.push_back(M(i, k));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

Json number_or_null(double v)
{
  return std::isfinite(v) ? Json(v) : Json(nullptr);
}

double number_from(const Json & j, const std::string & where)
{
  if (j.is_null()) {
    return std::numeric_limits<double>::infinity();
  }
  if (!j.is_number()) {
    throw ConfigError(where, "expected a number");
  }
  return j.get<double>();
}

const Json & field(const Json & j, const char * key, const std::string & where)
{
  if (!j.is_object()) {
    throw ConfigError(where, "expected an object");
  }
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ConfigError(where + "." + key, "missing");
  }
  return *it;
}

// Any shape; rows must agree in length. `rows`, `cols` >= 0 force a shape.
Matrix matrix_from(const Json & j, const std::string & where, Index rows = -1, Index cols = -1)
{
  if (j.is_number() && (rows < 0 || rows == 1) && (cols < 0 || cols == 1)) {
    return Matrix::Constant(1, 1, j.get<double>());
  }
  if (!j.is_array()) {
    throw ConfigError(where, "expected an array of rows");
  }
  const Index r = Index(j.size());
  Index c = r > 0 ? -1 : std::max<Index>(cols, 0);
  Matrix M;
  for (Index i = 0; i < r; ++i) {
    const Json & row = j[std::size_t(i)];
    if (!row.is_array()) {
      throw ConfigError(where + "[" + std::to_string(i) + "]", "expected an array of numbers");
    }
    if (c < 0) {
      c = Index(row.size());
      M.resize(r, c);
    }
    if (Index(row.size()) != c) {
      throw ConfigError(where + "[" + std::to_string(i) + "]", "row length differs from the first row");
    }
    for (Index k = 0; k < c; ++k) {
      const Json & v = row[std::size_t(k)];
      if (!v.is_number()) {
        throw ConfigError(
          where + "[" + std::to_string(i) + "][" + std::to_string(k) + "]", "expected a number");
      }
      M(i, k) = v.get<double>();
    }
  }
  if (r == 0) {
    M.resize(std::max<Index>(rows, 0), c);
  }
  if ((rows >= 0 && M.rows() != rows) || (cols >= 0 && M.cols() != cols)) {
    throw ConfigError(
      where, "expected shape " + std::to_string(rows) + " x " + std::to_string(cols) + ", got " +
      std::to_string(M.rows()) + " x " + std::to_string(M.cols()));
  }
  return M;
}

Index index_from(const Json & j, const std::string & where, Index lo)
{
  if (!j.is_number_integer()) {
    throw ConfigError(where, "expected an integer");
  }
  const Index v = j.get<Index>();
  if (v < lo) {
    throw ConfigError(where, "must be at least " + std::to_string(lo));
  }
  return v;
}

double real_from(const Json & j, const std::string & where)
{
  if (!j.is_number()) {
    throw ConfigError(where, "expected a number");
  }
  return j.get<double>();
}

void only_keys(const Json & j, const std::set<std::string> & allowed, const std::string & where)
{
  if (!j.is_object()) {
    throw ConfigError(where, "expected an object");
  }
  for (const auto & [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

std::string join(const std::string & a, const char * b)
{
  return a.empty() ? std::string(b) : a + "." + b;
}

}  // namespace

/* -------------------------------------------------------------------------- */
/*                                   Schemas                                  */
/* -------------------------------------------------------------------------- */

Json to_json(const System & s)
{
  return Json{
    {"states", s.states()}, {"inputs", s.inputs()}, {"outputs", s.outputs()},
    {"A", matrix_json(s.A)}, {"B", matrix_json(s.B)}, {"C", matrix_json(s.C)}, {"D", matrix_json(s.D)}};
}

System system_from_json(const Json & j, const std::string & where)
{
  only_keys(j, {"states", "inputs", "outputs", "A", "B", "C", "D"}, where);
  Index n = j.contains("states") ? index_from(j["states"], join(where, "states"), 0) : -1;
  Index m = j.contains("inputs") ? index_from(j["inputs"], join(where, "inputs"), 1) : -1;
  Index p = j.contains("outputs") ? index_from(j["outputs"], join(where, "outputs"), 1) : -1;
  const Matrix A = matrix_from(field(j, "A", where), join(where, "A"), n, n);
  n = A.rows();
  if (A.cols() != n) {
    throw ConfigError(join(where, "A"), "must be square");
  }
  const Matrix B = matrix_from(field(j, "B", where), join(where, "B"), n, m);
  m = B.cols();
  const Matrix C = matrix_from(field(j, "C", where), join(where, "C"), p, n);
  p = C.rows();
  const Matrix D = j.contains("D") ? matrix_from(j["D"], join(where, "D"), p, m) : Matrix::Zero(p, m);
  return System(A, B, C, D);
}

Json to_json(const Fir & f)
{
  Json taps = Json::array();
  for (Index k = 0; k < f.size(); ++k) {
    taps.push_back(matrix_json(f[k]));
  }
  return Json{{"rows", f.rows()}, {"cols", f.cols()}, {"taps", taps}};
}

Fir fir_from_json(const Json & j, const std::string & where)
{
  only_keys(j, {"rows", "cols", "taps"}, where);
  const Index r = index_from(field(j, "rows", where), join(where, "rows"), 1);
  const Index c = index_from(field(j, "cols", where), join(where, "cols"), 1);
  const Json & taps = field(j, "taps", where);
  if (!taps.is_array() || taps.empty()) {
    throw ConfigError(join(where, "taps"), "expected a nonempty array of matrices");
  }
  std::vector<Matrix> t;
  for (std::size_t k = 0; k < taps.size(); ++k) {
    t.push_back(matrix_from(taps[k], join(where, "taps") + "[" + std::to_string(k) + "]", r, c));
  }
  return Fir(std::move(t));
}

Json to_json(const Dcf & d)
{
  return Json{
    {"plant", to_json(d.plant)},
    {"gains", {{"F", matrix_json(d.gains.F)}, {"L", matrix_json(d.gains.L)}}},
    {"fir_len", d.fir_len},
    {"factors", {
        {"M", to_json(d.M)}, {"N", to_json(d.N)}, {"Mt", to_json(d.Mt)}, {"Nt", to_json(d.Nt)},
        {"X", to_json(d.X)}, {"Y", to_json(d.Y)}, {"Xt", to_json(d.Xt)}, {"Yt", to_json(d.Yt)}}}};
}

Dcf dcf_from_json(const Json & j, const std::string & where)
{
  only_keys(j, {"plant", "gains", "fir_len", "factors"}, where);
  const System plant = system_from_json(field(j, "plant", where), join(where, "plant"));
  const std::string gw = join(where, "gains");
  const Json & g = field(j, "gains", where);
  // The gains belong to the initial model and need not match the states of `plant`.
  GainPair gains{matrix_from(field(g, "F", gw), gw + ".F"), matrix_from(field(g, "L", gw), gw + ".L")};
  const Index fir_len = index_from(field(j, "fir_len", where), join(where, "fir_len"), 1);
  const std::string fw = join(where, "factors");
  const Json & f = field(j, "factors", where);
  auto sys = [&](const char * k) {return system_from_json(field(f, k, fw), fw + "." + k);};
  try {
    return dcf_from_factors(
      plant, gains, sys("M"), sys("N"), sys("Mt"), sys("Nt"), sys("X"), sys("Y"), sys("Xt"), sys("Yt"),
      fir_len);
  } catch (const ConfigError &) {
    throw;
  } catch (const std::invalid_argument & e) {
    throw ConfigError(fw, e.what());
  }
}

Json to_json(const Perturbation & p)
{
  return Json{
    {"d_mt", to_json(p.d_mt)}, {"d_nt", to_json(p.d_nt)}, {"d_m", to_json(p.d_m)}, {"d_n", to_json(p.d_n)},
    {"left_norm", p.left_norm()}, {"right_residual", p.right_residual}, {"right_tail", p.right_tail}};
}

Json to_json(const SynthesisResult & r)
{
  Json trace = Json::array();
  for (const AlphaTrace & t : r.trace) {
    trace.push_back(Json{
      {"alpha", number_or_null(t.alpha)}, {"status", to_string(t.status)},
      {"inner", number_or_null(t.inner)}, {"outer", number_or_null(t.outer)},
      {"stack_norm", number_or_null(t.stack_norm)}, {"iterations", t.iterations}});
  }
  return Json{
    {"q_star", to_json(r.q_star)},
    {"alpha_star", number_or_null(r.alpha_star)},
    {"inner_value", number_or_null(r.inner_value)},
    {"bound_value", number_or_null(r.bound_value)},
    {"stack_norm", number_or_null(r.stack_norm)},
    {"gamma", r.gamma},
    {"constants", {
        {"lambda1", r.k.lambda1}, {"lambda2", r.k.lambda2}, {"lambda2_left", r.k.lambda2_left},
        {"stack_norm", r.k.stack_norm}}},
    {"trace", trace}};
}

SynthesisResult synthesis_from_json(const Json & j, const std::string & where)
{
  SynthesisResult r;
  r.q_star = fir_from_json(field(j, "q_star", where), join(where, "q_star"));
  r.alpha_star = number_from(field(j, "alpha_star", where), join(where, "alpha_star"));
  r.inner_value = number_from(field(j, "inner_value", where), join(where, "inner_value"));
  r.bound_value = number_from(field(j, "bound_value", where), join(where, "bound_value"));
  r.stack_norm = number_from(field(j, "stack_norm", where), join(where, "stack_norm"));
  r.gamma = real_from(field(j, "gamma", where), join(where, "gamma"));
  return r;
}

Json identification_report(const IdentifiedModel & im, const Dcf & initial, const System * truth)
{
  const Vector & sv = im.hk.singular_values;
  Json j{
    {"T", im.hankel.T},
    {"d_hat", im.d_hat},
    {"order", im.order},
    {"singular_values", std::vector<double>(sv.data(), sv.data() + sv.size())},
    {"residual", im.hankel.residual},
    {"noise_floor", im.hankel.noise_floor},
    {"gamma_hat", im.factors.gamma_hat},
    {"gamma", im.factors.gamma},
    {"shift", im.factors.shift},
    {"xy_norm", im.factors.xy_norm},
    {"R_hat", to_json(im.R_hat)}};
  if (truth) {
    const System R = dual_youla_parameter(initial, *truth);
    const Matrix H = hankel_matrix(markov(R, 2 * im.d_hat), im.d_hat);
    j["hankel_error"] = Eigen::JacobiSVD<Matrix>(im.hankel.H_hat - H).singularValues()(0);
    j["gamma_true"] = hinf_norm((R - im.R_hat) * stack_cols(-initial.X, initial.Y));
  }
  return j;
}

Json to_json(const GapRow & g)
{
  return Json{
    {"J_u", g.J_u}, {"J_uhat", g.J_uhat}, {"gap", g.gap}, {"err_sq", g.err_sq},
    {"bound", g.bound}, {"bound_sq", g.bound_sq}, {"bound_weighted", g.bound_weighted},
    {"dominated", g.dominated}};
}

std::string monte_carlo_csv(const std::vector<MonteCarloRow> & rows)
{
  std::ostringstream os;
  os.precision(12);
  os << "seed,fraction,pert_norm,product_norm,phi_invertible,loop_stable\n";
  for (const MonteCarloRow & r : rows) {
    os << r.seed << ',' << r.fraction << ',' << r.pert_norm << ',' << r.product_norm << ','
       << int(r.phi_invertible) << ',' << int(r.loop_stable) << '\n';
  }
  return os.str();
}

DualYoulaSignals signals_from_csv(const std::string & text, Index m, Index p)
{
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError("trajectory", "empty CSV");
  }
  std::vector<std::string> head;
  {
    std::istringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) {
      head.push_back(cell);
    }
  }
  auto columns = [&](const std::string & name, Index k) {
      std::vector<std::size_t> idx;
      for (Index i = 0; i < k; ++i) {
        const std::string want = k > 1 ? name + "_" + std::to_string(i) : name;
        const auto it = std::find(head.begin(), head.end(), want);
        if (it == head.end()) {
          throw ConfigError("trajectory." + want, "column missing");
        }
        idx.push_back(std::size_t(it - head.begin()));
      }
      return idx;
    };
  const auto c1 = columns("e1", m), c2 = columns("e2", p);
  std::vector<std::vector<double>> rows;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::vector<double> v;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception &) {
        throw ConfigError("trajectory line " + std::to_string(lineno), "not a number: " + cell);
      }
    }
    if (v.size() != head.size()) {
      throw ConfigError("trajectory line " + std::to_string(lineno), "wrong number of columns");
    }
    rows.push_back(std::move(v));
  }
  DualYoulaSignals s;
  s.e1.resize(m, Index(rows.size()));
  s.e2.resize(p, Index(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (Index i = 0; i < m; ++i) {
      s.e1(i, Index(t)) = rows[t][c1[std::size_t(i)]];
    }
    for (Index i = 0; i < p; ++i) {
      s.e2(i, Index(t)) = rows[t][c2[std::size_t(i)]];
    }
  }
  return s;
}

/* -------------------------------------------------------------------------- */
/*                             Experiment config                              */
/* -------------------------------------------------------------------------- */

void ExperimentConfig::validate() const
{
  if (true_plant.states() != model.states() || true_plant.inputs() != model.inputs() ||
    true_plant.outputs() != model.outputs())
  {
    throw ConfigError("model", "dimensions differ from the plant");
  }
  if (gains.F.rows() != model.inputs() || gains.F.cols() != model.states()) {
    throw ConfigError("gains.F", "must be inputs x states");
  }
  if (gains.L.rows() != model.states() || gains.L.cols() != model.outputs()) {
    throw ConfigError("gains.L", "must be states x outputs");
  }
  if (factor_len < 1) {
    throw ConfigError("factor_len", "must be positive");
  }
  if (T_list.empty()) {
    throw ConfigError("T", "must be nonempty");
  }
  for (std::size_t i = 0; i < T_list.size(); ++i) {
    if (T_list[i] < 8 || (i > 0 && T_list[i] <= T_list[i - 1])) {
      throw ConfigError("T", "must be increasing with every entry at least 8");
    }
  }
  if (seeds.empty()) {
    throw ConfigError("seeds", "must be nonempty");
  }
  if (threads < 1) {
    throw ConfigError("threads", "must be positive");
  }
  if (alpha_points < 2) {
    throw ConfigError("synthesis.alpha_grid", "a default grid needs at least 2 points");
  }
  if (synthesis.fir_len < 1) {
    throw ConfigError("synthesis.fir_len", "must be positive");
  }
  if (gamma_override && !(std::isfinite(*gamma_override) && *gamma_override >= 0)) {
    throw ConfigError("synthesis.gamma", "must be finite and nonnegative");
  }
  try {
    noise.validate();
  } catch (const std::invalid_argument & e) {
    throw ConfigError("noise", e.what());
  }
  try {
    identify.params.validate();
  } catch (const std::invalid_argument & e) {
    throw ConfigError("identification", e.what());
  }
}

Experiment ExperimentConfig::experiment() const
{
  validate();
  Experiment ex;
  ex.true_plant = true_plant;
  try {
    ex.initial = build_dcf(model, gains, factor_len);
  } catch (const std::invalid_argument & e) {
    throw ConfigError("gains", e.what());
  }
  ex.noise = noise;
  ex.identify = identify;
  ex.synthesis = synthesis;
  ex.alpha_points = alpha_points;
  return ex;
}

SweepConfig ExperimentConfig::sweep() const
{
  SweepConfig c;
  c.T_list = T_list;
  c.seeds = seeds;
  c.threads = threads;
  return c;
}

ExperimentConfig named_experiment(const std::string & name)
{
  ExperimentConfig c;
  for (int k = 8; k <= 14; ++k) {
    c.T_list.push_back(Index(1) << k);
  }
  for (std::uint64_t s = 0; s < 10; ++s) {
    c.seeds.push_back(s);
  }
  const Matrix one = Matrix::Constant(1, 1, 1.0);
  if (name == "reference") {
    const Experiment ex = reference_experiment();
    c.true_plant = ex.true_plant;
    c.model = ex.initial.plant;
    c.gains = ex.initial.gains;
    c.factor_len = ex.initial.fir_len;
    c.identify = ex.identify;
    c.synthesis = ex.synthesis;
    c.alpha_points = ex.alpha_points;
  } else if (name == "scalar") {
    c.true_plant = System(Matrix::Constant(1, 1, 2.0), one, one, Matrix::Zero(1, 1));
    c.model = System(Matrix::Constant(1, 1, 2.05), one, one, Matrix::Zero(1, 1));
    c.gains_mode = "given";
    c.gains = GainPair{Matrix::Constant(1, 1, -1.5), Matrix::Constant(1, 1, 1.5)};
    c.identify.params.script_R = 0.0042;
    c.synthesis.fir_len = 16;
    c.T_list = {4096};
    c.seeds = {0};
  } else {
    throw ConfigError("plant", "unknown named plant '" + name + "' (expected reference or scalar)");
  }
  return c;
}

namespace
{

System plant_spec(const Json & j, const std::string & where, const std::string & base_dir)
{
  if (j.is_object() && j.contains("file")) {
    only_keys(j, {"file"}, where);
    const std::filesystem::path f = std::filesystem::path(base_dir) / j["file"].get<std::string>();
    Json inner;
    try {
      inner = Json::parse(read_file(f.string()));
    } catch (const Json::exception & e) {
      throw ConfigError(where + ".file", e.what());
    }
    return system_from_json(inner, where + ".file");
  }
  return system_from_json(j, where);
}

}  // namespace

ExperimentConfig parse_experiment_config(const Json & j, const std::string & base_dir)
{
  only_keys(
    j, {"plant", "model", "gains", "factor_len", "noise", "T", "seeds", "identification", "synthesis",
      "threads", "out"}, "");
  ExperimentConfig c;
  bool custom_plant = false;
  if (j.contains("plant") && j["plant"].is_string()) {
    c = named_experiment(j["plant"].get<std::string>());
  } else {
    c = named_experiment("reference");
    if (j.contains("plant")) {
      c.true_plant = plant_spec(j["plant"], "plant", base_dir);
      c.model = c.true_plant;
      custom_plant = true;
    }
  }
  if (j.contains("model")) {
    c.model = plant_spec(j["model"], "model", base_dir);
  }
  if (j.contains("gains")) {
    const Json & g = j["gains"];
    only_keys(g, {"mode", "F", "L"}, "gains");
    c.gains_mode = g.value("mode", std::string("riccati"));
    if (c.gains_mode == "given") {
      c.gains.F = matrix_from(field(g, "F", "gains"), "gains.F", c.model.inputs(), c.model.states());
      c.gains.L = matrix_from(field(g, "L", "gains"), "gains.L", c.model.states(), c.model.outputs());
    } else if (c.gains_mode != "riccati") {
      throw ConfigError("gains.mode", "expected given or riccati");
    }
  } else if (custom_plant || j.contains("model")) {
    c.gains_mode = "riccati";
  }
  if (c.gains_mode == "riccati") {
    try {
      c.gains = riccati_gains(c.true_plant, c.model);
    } catch (const std::exception & e) {
      throw ConfigError("gains", std::string("Riccati gains unavailable: ") + e.what());
    }
  }
  if (j.contains("factor_len")) {
    c.factor_len = index_from(j["factor_len"], "factor_len", 1);
  }
  if (j.contains("noise")) {
    const Json & n = j["noise"];
    only_keys(n, {"sigma_w", "sigma_r", "sigma_nu", "sigma_delta"}, "noise");
    for (auto [key, slot] : {
        std::pair{"sigma_w", &c.noise.sigma_w}, std::pair{"sigma_r", &c.noise.sigma_r},
        std::pair{"sigma_nu", &c.noise.sigma_nu}, std::pair{"sigma_delta", &c.noise.sigma_delta}})
    {
      if (n.contains(key)) {
        *slot = real_from(n[key], std::string("noise.") + key);
        if (*slot < 0) {
          throw ConfigError(std::string("noise.") + key, "must be nonnegative");
        }
      }
    }
  }
  if (j.contains("T")) {
    if (!j["T"].is_array()) {
      throw ConfigError("T", "expected an array of integers");
    }
    c.T_list.clear();
    for (std::size_t i = 0; i < j["T"].size(); ++i) {
      c.T_list.push_back(index_from(j["T"][i], "T[" + std::to_string(i) + "]", 1));
    }
  }
  if (j.contains("seeds")) {
    if (!j["seeds"].is_array()) {
      throw ConfigError("seeds", "expected an array of integers");
    }
    c.seeds.clear();
    for (std::size_t i = 0; i < j["seeds"].size(); ++i) {
      c.seeds.push_back(std::uint64_t(index_from(j["seeds"][i], "seeds[" + std::to_string(i) + "]", 0)));
    }
  }
  if (j.contains("identification")) {
    const Json & d = j["identification"];
    only_keys(
      d, {"beta", "script_R", "c_const", "delta_fail", "sv_fraction", "depth", "order", "gamma_floor", "ridge"},
      "identification");
    auto & k = c.identify.params;
    for (auto [key, slot] : {
        std::pair{"beta", &k.beta}, std::pair{"script_R", &k.script_R}, std::pair{"c_const", &k.c_const},
        std::pair{"delta_fail", &k.delta_fail}, std::pair{"sv_fraction", &c.identify.sv_fraction},
        std::pair{"gamma_floor", &c.identify.gamma_floor}, std::pair{"ridge", &c.identify.ridge}})
    {
      if (d.contains(key)) {
        *slot = real_from(d[key], std::string("identification.") + key);
      }
    }
    if (d.contains("depth")) {
      c.identify.depth = index_from(d["depth"], "identification.depth", 1);
    }
    if (d.contains("order")) {
      c.identify.order = index_from(d["order"], "identification.order", 1);
    }
    if (!(c.identify.sv_fraction > 0 && c.identify.sv_fraction < 1)) {
      throw ConfigError("identification.sv_fraction", "must lie in (0, 1)");
    }
  }
  if (j.contains("synthesis")) {
    const Json & s = j["synthesis"];
    only_keys(s, {"fir_len", "q_order", "alpha_grid", "gamma", "threads"}, "synthesis");
    if (s.contains("fir_len")) {
      c.synthesis.fir_len = index_from(s["fir_len"], "synthesis.fir_len", 1);
    }
    if (s.contains("q_order")) {
      c.synthesis.q_order = index_from(s["q_order"], "synthesis.q_order", 0);
    }
    if (s.contains("threads")) {
      c.synthesis.threads = int(index_from(s["threads"], "synthesis.threads", 1));
    }
    if (s.contains("gamma") && !s["gamma"].is_null()) {
      c.gamma_override = real_from(s["gamma"], "synthesis.gamma");
    }
    if (s.contains("alpha_grid")) {
      const Json & g = s["alpha_grid"];
      if (g.is_string()) {
        const AlphaGridSpec spec = parse_alpha_grid(g.get<std::string>(), "synthesis.alpha_grid");
        c.synthesis.alpha_grid = spec.values;
        if (spec.default_points > 0) {
          c.alpha_points = spec.default_points;
        }
      } else if (g.is_array()) {
        c.synthesis.alpha_grid.clear();
        for (std::size_t i = 0; i < g.size(); ++i) {
          c.synthesis.alpha_grid.push_back(real_from(g[i], "synthesis.alpha_grid[" + std::to_string(i) + "]"));
        }
      } else {
        throw ConfigError("synthesis.alpha_grid", "expected a string spec or an array");
      }
    }
  }
  if (j.contains("threads")) {
    c.threads = int(index_from(j["threads"], "threads", 1));
  }
  if (j.contains("out")) {
    if (!j["out"].is_string()) {
      throw ConfigError("out", "expected a path string");
    }
    c.out_dir = j["out"].get<std::string>();
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string & path)
{
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error & e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return parse_experiment_config(j, std::filesystem::path(path).parent_path().string());
}

AlphaGridSpec parse_alpha_grid(const std::string & spec, const std::string & where)
{
  AlphaGridSpec g;
  auto number = [&](const std::string & s) {
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
          throw std::invalid_argument(s);
        }
        return v;
      } catch (const std::exception &) {
        throw ConfigError(where, "not a number: '" + s + "'");
      }
    };
  if (spec.rfind("log:", 0) == 0) {
    const double n = number(spec.substr(4));
    if (n < 2 || n != std::floor(n)) {
      throw ConfigError(where, "log:N needs an integer N >= 2");
    }
    g.default_points = int(n);
    return g;
  }
  std::vector<std::string> parts;
  const char sep = spec.find(':') != std::string::npos ? ':' : ',';
  std::istringstream in(spec);
  for (std::string cell; std::getline(in, cell, sep);) {
    parts.push_back(cell);
  }
  if (sep == ':') {
    if (parts.size() != 3) {
      throw ConfigError(where, "expected lo:hi:N");
    }
    const double lo = number(parts[0]), hi = number(parts[1]), n = number(parts[2]);
    if (!(lo > 0 && hi > lo && n >= 2 && n == std::floor(n))) {
      throw ConfigError(where, "need 0 < lo < hi and an integer N >= 2");
    }
    for (int i = 0; i < int(n); ++i) {
      g.values.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
    }
    return g;
  }
  for (const std::string & s : parts) {
    g.values.push_back(number(s));
  }
  if (g.values.empty()) {
    throw ConfigError(where, "empty grid");
  }
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    if (!(g.values[i] > 0) || (i > 0 && g.values[i] <= g.values[i - 1])) {
      throw ConfigError(where, "values must be positive and increasing");
    }
  }
  return g;
}

std::string read_file(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(path, "cannot open file");
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string & path, const std::string & text)
{
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << text;
}

}  // namespace robs
