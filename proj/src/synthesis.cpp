#include "robs/synthesis.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

namespace robs
{

SynthesisConstants constants(const Dcf & nominal)
{
  const Index m = nominal.m();
  SynthesisConstants k;
  k.lambda1 = hinf_norm(System::identity(m) - nominal.M);
  k.lambda2 = hinf_norm(stack_rows(nominal.N, nominal.M));
  k.lambda2_left = hinf_norm(stack_cols(nominal.Nt, nominal.Mt));
  k.stack_norm = hinf_norm(stack_rows(nominal.Yt, nominal.Xt));
  return k;
}

void SynthesisConfig::validate() const
{
  if (!(gamma >= 0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("SynthesisConfig: gamma must be finite and nonnegative");
  }
  require_dims(fir_len >= 1, "SynthesisConfig: fir_len must be at least 1");
  require_dims(q_order >= -1, "SynthesisConfig: q_order must be -1 or nonnegative");
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    const double a = alpha_grid[i];
    if (!(a > 0) || (gamma > 0 && !(a * gamma < 1)) || (i > 0 && !(a > alpha_grid[i - 1]))) {
      throw std::invalid_argument("SynthesisConfig: alpha grid must increase within (0, 1/gamma)");
    }
  }
  if (threads < 1) {
    throw std::invalid_argument("SynthesisConfig: threads must be positive");
  }
}

std::vector<double> default_alpha_grid(const SynthesisConstants & k, double gamma, int count)
{
  std::vector<double> g;
  if (!(gamma > 0)) {
    return g;
  }
  const double lo = k.stack_norm;
  const double hi = 0.98 / gamma;
  if (!(lo < hi) || count < 1) {
    return g;
  }
  if (count == 1) {
    return {lo};
  }
  const double r = std::log(hi / lo);
  for (int i = 0; i < count; ++i) {
    g.push_back(lo * std::exp(r * i / (count - 1)));
  }
  return g;
}

namespace
{

// Offset of vec(Q_k)(a, b) from the first Q variable.
Index q_index(Index k, Index a, Index b, Index m, Index p)
{
  return k * m * p + b * m + a;
}

// ||[Y~_Q; X~_Q]||_inf over taps 0..n
double stack_norm_at(const Dcf & dcf, const Fir & Q, Index n)
{
  const YoulaFactors yf = youla_factors(dcf, Q, n);
  return hinf_norm(truncate(fir_stack_rows(yf.YtQ, yf.XtQ), n + 1));
}

}  // namespace

AffineFir objective_map(const Dcf & nominal, Index n, Index q_taps, Index first_var)
{
  const Index m = nominal.m();
  const Index p = nominal.p();
  const Fir C = fir_stack_cols(Fir::identity(m, 1) - nominal.fY, nominal.fX);
  const Fir P = fir_stack_cols(nominal.fNt, nominal.fMt);
  const Index w = m + p;
  AffineFir f = constant_fir(C, n + 1);
  f.first_var = first_var;
  f.linear = Matrix::Zero(f.constant.size(), q_taps * m * p);
  // (Q_k E) contributes Q_k(a, b) P_{j-k}(b, c) to entry (j, a, c).
  for (Index k = 0; k < q_taps; ++k) {
    for (Index b = 0; b < p; ++b) {
      for (Index a = 0; a < m; ++a) {
        const Index v = q_index(k, a, b, m, p);
        for (Index j = k; j <= n; ++j) {
          const Matrix Pj = P.tap(j - k);
          for (Index c = 0; c < w; ++c) {
            f.linear(f.entry(j, a, c), v) = Pj(b, c);
          }
        }
      }
    }
  }
  return f;
}

AffineFir stack_map(const Dcf & nominal, Index n, Index q_taps, Index first_var)
{
  const Index m = nominal.m();
  const Index p = nominal.p();
  const Fir H = fir_stack_rows(nominal.fYt, nominal.fXt);
  const Fir K = fir_stack_rows(-nominal.fN, nominal.fM);
  AffineFir f = constant_fir(H, n + 1);
  f.first_var = first_var;
  f.linear = Matrix::Zero(f.constant.size(), q_taps * m * p);
  // K_{j-k} Q_k(a, b) lands in column b: rows r get K_{j-k}(r, a).
  for (Index k = 0; k < q_taps; ++k) {
    for (Index b = 0; b < p; ++b) {
      for (Index a = 0; a < m; ++a) {
        const Index v = q_index(k, a, b, m, p);
        for (Index j = k; j <= n; ++j) {
          const Matrix Kj = K.tap(j - k);
          for (Index r = 0; r < p + m; ++r) {
            f.linear(f.entry(j, r, b), v) = Kj(r, a);
          }
        }
      }
    }
  }
  return f;
}

InnerProgram assemble_inner(
  const Dcf & nominal, const SynthesisConstants & k, double gamma, double alpha, Index n, Index q_taps)
{
  if (!(gamma >= 0)) {
    throw std::invalid_argument("assemble_inner: gamma must be nonnegative");
  }
  if (!(alpha > 0) || (gamma > 0 && std::isfinite(alpha) && !(gamma * alpha < 1))) {
    throw std::invalid_argument("assemble_inner: alpha must lie in (0, 1/gamma)");
  }
  if (gamma > 0 && !std::isfinite(alpha)) {
    throw std::invalid_argument("assemble_inner: alpha = inf needs gamma = 0");
  }
  require_dims(n >= 0 && q_taps >= 1 && q_taps <= n + 1, "assemble_inner: need 1 <= q_taps <= n + 1");
  require_dims(n <= nominal.fir_len, "assemble_inner: horizon exceeds the factor FIR length");

  InnerProgram ip;
  ip.m = nominal.m();
  ip.p = nominal.p();
  ip.n = n;
  ip.alpha = alpha;
  ip.gamma = gamma;
  ip.q_taps = q_taps;
  ip.k = k;
  ip.has_lmi = std::isfinite(alpha);

  ProgramBuilder pb;
  ip.q_count = q_taps * ip.m * ip.p;
  ip.q_first = pb.add_variables(ip.q_count);
  ip.eps1 = pb.add_variables(1);
  ip.eps2 = pb.add_variables(1);
  const double w1 = ip.has_lmi ? 1.0 - gamma * alpha : 1.0;
  pb.set_cost(ip.eps1, w1);
  pb.set_cost(ip.eps2, k.lambda1 * (k.lambda2_left + gamma));

  ip.objective = objective_map(nominal, n, q_taps, ip.q_first);
  {
    const AffineFir & f = ip.objective;
    const Index r = pb.add_cone(Cone::soc(1 + f.constant.size()));
    pb.add_term(r, ip.eps1, 1.0);
    for (Index e = 0; e < f.constant.size(); ++e) {
      pb.add_constant(r + 1 + e, f.constant(e));
      for (Index v = 0; v < f.linear.cols(); ++v) {
        if (f.linear(e, v) != 0.0) {
          pb.add_term(r + 1 + e, f.first_var + v, f.linear(e, v));
        }
      }
    }
  }
  {
    const Index r = pb.add_cone(Cone::soc(1 + ip.q_count));
    pb.add_term(r, ip.eps2, 1.0);
    for (Index v = 0; v < ip.q_count; ++v) {
      pb.add_term(r + 1 + v, ip.q_first + v, 1.0);
    }
  }
  if (ip.has_lmi) {
    ip.lmi = hinf_lmi_blocks(pb, stack_map(nominal, n, q_taps, ip.q_first), AffineScalar{alpha});
  }
  ip.prog = pb.build();
  return ip;
}

InnerResult solve_inner(const InnerProgram & ip, const SolverSettings & st)
{
  InnerResult r;
  const Solution s = solve(ip.prog, st);
  r.status = s.status;
  r.iterations = s.iterations;
  r.Q = Fir(ip.m, ip.p, ip.q_taps);
  for (Index k = 0; k < ip.q_taps; ++k) {
    r.Q[k] = Eigen::Map<const Matrix>(s.x.data() + ip.q_first + k * ip.m * ip.p, ip.m, ip.p);
  }
  r.eps1 = s.x(ip.eps1);
  r.eps2 = s.x(ip.eps2);
  if (s.status == SolveStatus::optimal) {
    r.value = s.objective;
    const Vector q = s.x.segment(ip.q_first, ip.q_count);
    const double e1 = (ip.objective.constant + ip.objective.linear * q).norm();
    const double w1 = ip.has_lmi ? 1.0 - ip.gamma * ip.alpha : 1.0;
    r.recomputed = w1 * e1 + ip.k.lambda1 * (ip.k.lambda2_left + ip.gamma) * q.norm();
  }
  return r;
}

SynthesisResult outer_search(const SynthesisConfig & config, const Dcf & nominal)
{
  config.validate();
  const Index n = config.fir_len;
  const Dcf dcf = nominal.fir_len >= n ? nominal : with_fir_len(nominal, n);

  SynthesisResult res;
  res.k = constants(dcf);
  res.gamma = config.gamma;
  std::vector<double> grid = config.alpha_grid;
  if (grid.empty()) {
    if (config.gamma > 0) {
      grid = default_alpha_grid(res.k, config.gamma);
      if (grid.empty()) {
        throw std::runtime_error(
                "outer_search: central controller violates the robustness premise (stack norm >= 0.98/gamma)");
      }
    } else {
      grid = {std::numeric_limits<double>::infinity()};
    }
  }

  std::vector<AlphaTrace> trace(grid.size());
  std::vector<InnerResult> inner(grid.size());
  auto work = [&](std::size_t i) {
      const double a = grid[i];
      const InnerProgram ip = assemble_inner(dcf, res.k, config.gamma, a, n, config.q_taps());
      inner[i] = solve_inner(ip, config.solver);
      AlphaTrace & t = trace[i];
      t.alpha = a;
      t.status = inner[i].status;
      t.iterations = inner[i].iterations;
      if (t.status == SolveStatus::optimal) {
        t.inner = inner[i].recomputed;
        t.outer = std::isfinite(a) ? t.inner / (1 - config.gamma * a) : t.inner;
        t.stack_norm = stack_norm_at(dcf, inner[i].Q, n);
      }
    };
  const std::size_t workers = std::min<std::size_t>(std::size_t(config.threads), grid.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      work(i);
    }
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
          for (std::size_t i = w; i < grid.size(); i += workers) {
            work(i);
          }
        });
    }
    for (auto & th : pool) {
      th.join();
    }
  }

  std::size_t best = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (trace[i].status == SolveStatus::optimal && (best == grid.size() || trace[i].outer < trace[best].outer)) {
      best = i;
    }
  }
  res.trace = trace;
  if (best == grid.size()) {
    throw std::runtime_error("outer_search: every alpha on the grid is infeasible");
  }
  res.q_star = inner[best].Q;
  res.alpha_star = grid[best];
  res.inner_value = trace[best].inner;
  res.bound_value = trace[best].outer;
  res.stack_norm = trace[best].stack_norm;
  return res;
}

double upper_bound_value(const Dcf & nominal, const Fir & Q, double alpha, double gamma, Index horizon)
{
  if (!(gamma >= 0) || (gamma > 0 && !(gamma * alpha < 1))) {
    throw std::invalid_argument("upper_bound_value: need 0 <= gamma and gamma alpha < 1");
  }
  const YoulaFactors yf = youla_factors(nominal, Q, horizon);
  const double stack = stack_norm_at(nominal, Q, horizon);
  if (stack > alpha * (1 + 1e-9)) {
    throw std::domain_error("upper_bound_value: ||[Y~_Q; X~_Q]||_inf exceeds alpha");
  }
  const SynthesisConstants k = constants(nominal);
  const Index m = nominal.m();
  const double term1 = h2_norm(truncate(fir_stack_cols(Fir::identity(m, 1) - yf.YQ, yf.XQ), horizon + 1));
  const double scale = std::isfinite(alpha) ? 1.0 / (1.0 - gamma * alpha) : 1.0;
  return term1 + k.lambda1 * h2_norm(Q) * (k.lambda2_left + gamma) * scale;
}

std::string trace_csv(const SynthesisResult & r)
{
  std::ostringstream os;
  os << std::setprecision(12);
  os << "alpha,status,inner,outer,stack_norm,iterations\n";
  for (const auto & t : r.trace) {
    os << t.alpha << ',' << to_string(t.status) << ',' << t.inner << ',' << t.outer << ','
       << t.stack_norm << ',' << t.iterations << '\n';
  }
  return os.str();
}

}  // namespace robs
