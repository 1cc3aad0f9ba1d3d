#include "robs/robust.hpp"

#include "robs/simulate.hpp"

namespace robs
{

double Perturbation::left_norm() const
{
  return hinf_norm(fir_stack_cols(d_mt, d_nt));
}

Perturbation zero_perturbation(const Dcf & nominal)
{
  const Index m = nominal.m();
  const Index p = nominal.p();
  Perturbation d;
  d.d_mt = Fir(p, p, 1);
  d.d_nt = Fir(p, m, 1);
  d.d_m = Fir(m, m, 1);
  d.d_n = Fir(p, m, 1);
  return d;
}

Perturbation sample_perturbation(
  const UncertaintySet & set, Index order, double fraction, std::mt19937_64 & rng)
{
  set.validate();
  require_dims(order >= 0, "sample_perturbation: order must be nonnegative");
  if (!(fraction >= 0)) {
    throw std::invalid_argument("sample_perturbation: fraction must be nonnegative");
  }
  const Index m = set.nominal.m();
  const Index p = set.nominal.p();
  std::normal_distribution<double> g;
  auto draw = [&](Index r, Index c) {
      Fir f(r, c, order + 1);
      for (auto & t : f.taps) {
        t = Matrix::NullaryExpr(r, c, [&]() {return g(rng);});
      }
      return f;
    };
  Perturbation d;
  d.d_mt = draw(p, p);
  d.d_nt = draw(p, m);
  const double s = fraction * set.gamma / d.left_norm();
  d.d_mt = s * d.d_mt;
  d.d_nt = s * d.d_nt;
  derive_right_factors(set.nominal, d);
  return d;
}

void derive_right_factors(const Dcf & nominal, Perturbation & pert)
{
  const Index m = nominal.m();
  const Index p = nominal.p();
  const Index L = nominal.fir_len;
  require_dims(
    pert.d_mt.rows() == p && pert.d_mt.cols() == p && pert.d_nt.rows() == p && pert.d_nt.cols() == m,
    "derive_right_factors: perturbation shape does not match the plant");

  // [-M~'  N~'] [dN]   [dM~ N - dN~ M]
  // [  X    Y ] [dM] = [      0      ]
  const Fir Mtp = truncate(nominal.fMt + pert.d_mt, L + 1);
  const Fir Ntp = truncate(nominal.fNt + pert.d_nt, L + 1);
  const Fir W = fir_stack_rows(fir_stack_cols(-Mtp, Ntp), fir_stack_cols(nominal.fX, nominal.fY));
  const Fir rhs_top = fir_series(pert.d_mt, nominal.fN, L) - fir_series(pert.d_nt, nominal.fM, L);
  const Fir rhs = truncate(fir_stack_rows(rhs_top, Fir(m, m, L + 1)), L + 1);

  const Eigen::ColPivHouseholderQR<Matrix> lead(W[0]);
  if (lead.rank() < p + m) {
    throw std::domain_error("derive_right_factors: I + dM~_0 is singular");
  }
  Fir Z(p + m, m, L + 1);
  for (Index j = 0; j <= L; ++j) {
    Matrix acc = rhs.tap(j);
    for (Index i = 1; i <= j; ++i) {
      acc.noalias() -= W.tap(i) * Z[j - i];
    }
    Z[j] = lead.solve(acc);
  }
  double res = 0;
  for (Index j = 0; j <= L; ++j) {
    Matrix acc = -rhs.tap(j);
    for (Index i = 0; i <= j; ++i) {
      acc.noalias() += W.tap(i) * Z[j - i];
    }
    res = std::max(res, acc.norm());
  }
  pert.d_n = Fir(p, m, L + 1);
  pert.d_m = Fir(m, m, L + 1);
  for (Index j = 0; j <= L; ++j) {
    pert.d_n[j] = Z[j].topRows(p);
    pert.d_m[j] = Z[j].bottomRows(m);
  }
  pert.right_residual = res;
  pert.right_tail = Z[L].norm();
}

CMatrix PerturbedPlant::evaluate(std::complex<double> z) const
{
  const CMatrix a = mt.evaluate(z);
  const Eigen::FullPivLU<CMatrix> lu(a);
  if (!lu.isInvertible()) {
    throw std::domain_error("PerturbedPlant: M~ + dM~ is singular at z");
  }
  return lu.solve(nt.evaluate(z));
}

System PerturbedPlant::realization() const
{
  return inverse(mt) * nt;
}

PerturbedPlant perturbed_plant(const Dcf & nominal, const Perturbation & pert)
{
  require_dims(
    pert.d_mt.rows() == nominal.p() && pert.d_nt.cols() == nominal.m(),
    "perturbed_plant: perturbation shape does not match the plant");
  return {nominal.Mt + realize(pert.d_mt), nominal.Nt + realize(pert.d_nt)};
}

Fir phi11(const Perturbation & pert, const YoulaFactors & yf, Index horizon)
{
  const Fir left = fir_stack_cols(pert.d_mt, pert.d_nt);
  const Fir right = fir_stack_rows(yf.YtQ, yf.XtQ);
  return Fir::identity(left.rows(), horizon + 1) + fir_series(left, right, horizon);
}

Fir phi22(const Perturbation & pert, const YoulaFactors & yf, Index horizon)
{
  const Fir left = fir_stack_cols(yf.XQ, yf.YQ);
  const Fir right = fir_stack_rows(pert.d_n, pert.d_m);
  return Fir::identity(left.rows(), horizon + 1) + fir_series(left, right, horizon);
}

Fir neumann_inverse(const Fir & phi, Index horizon, double tol, int max_terms)
{
  require_dims(phi.rows() == phi.cols(), "neumann_inverse: square system required");
  const Index k = phi.rows();
  const Fir E = truncate(Fir::identity(k, 1) - phi, horizon + 1);
  Fir sum = Fir::identity(k, horizon + 1);
  Fir term = Fir::identity(k, horizon + 1);
  for (int it = 0; it < max_terms; ++it) {
    term = fir_series(term, E, horizon);
    sum = sum + term;
    double mx = 0;
    for (const auto & t : term.taps) {
      mx = std::max(mx, t.norm());
    }
    if (mx < tol) {
      return sum;
    }
    if (!(mx < 1e12)) {
      break;
    }
  }
  throw std::domain_error("neumann_inverse: series did not converge");
}

RobustCheck is_robustly_stabilizing(const YoulaFactors & yf, double gamma)
{
  if (!(gamma > 0)) {
    throw std::invalid_argument("is_robustly_stabilizing: gamma must be positive");
  }
  RobustCheck c;
  c.stack_norm = hinf_norm(fir_stack_rows(yf.YtQ, yf.XtQ));
  c.margin = 1.0 / gamma - c.stack_norm;
  c.robust = c.margin > 0;
  return c;
}

bool small_gain_check(const Fir & g1, const Fir & g2)
{
  return hinf_norm(g1) * hinf_norm(g2) < 1.0;
}

bool small_gain_check(const System & g1, const System & g2)
{
  return hinf_norm(g1) * hinf_norm(g2) < 1.0;
}

TruePlantFactors true_plant_dcf(
  const Dcf & nominal, const Perturbation & pert, const YoulaFactors & yf, Index horizon)
{
  TruePlantFactors t;
  t.phi11_inv = neumann_inverse(phi11(pert, yf, horizon), horizon);
  const Fir phi22_inv = neumann_inverse(phi22(pert, yf, horizon), horizon);
  t.Mt = fir_series(t.phi11_inv, nominal.fMt + pert.d_mt, horizon);
  t.Nt = fir_series(t.phi11_inv, nominal.fNt + pert.d_nt, horizon);
  t.M = fir_series(nominal.fM + pert.d_m, phi22_inv, horizon);
  t.N = fir_series(nominal.fN + pert.d_n, phi22_inv, horizon);
  t.bezout = bezout_residual(t.M, t.N, t.Mt, t.Nt, yf.XQ, yf.YQ, yf.XtQ, yf.YtQ, horizon);
  return t;
}

double robust_objective_value(
  const Dcf & nominal, const Fir & Q, const Perturbation & pert, Index horizon)
{
  const YoulaFactors yf = youla_factors(nominal, Q, horizon);
  const Fir inv = neumann_inverse(phi11(pert, yf, horizon), horizon);
  const Index m = nominal.m();
  const Fir IM = Fir::identity(m, 1) - nominal.fM;
  const Fir lead = fir_series(fir_series(IM, Q, horizon), inv, horizon);
  const Fir a = Fir::identity(m, 1) - yf.YQ + fir_series(lead, nominal.fNt + pert.d_nt, horizon);
  const Fir b = yf.XQ + fir_series(lead, nominal.fMt + pert.d_mt, horizon);
  return h2_norm(truncate(fir_stack_cols(a, b), horizon + 1));
}

std::vector<MonteCarloRow> robust_monte_carlo(
  const UncertaintySet & set, const Fir & Q, double fraction, Index order,
  std::uint64_t first_seed, int draws)
{
  set.validate();
  const Index H = set.nominal.fir_len + order;
  const YoulaFactors yf = youla_factors(set.nominal, Q, H);
  const Fir stack = fir_stack_rows(yf.YtQ, yf.XtQ);
  const System controller = factor_controller(youla_realization(set.nominal, Q));

  std::vector<MonteCarloRow> rows;
  for (int k = 0; k < draws; ++k) {
    MonteCarloRow r;
    r.seed = first_seed + static_cast<std::uint64_t>(k);
    r.fraction = fraction;
    std::mt19937_64 rng(r.seed);
    const Perturbation d = sample_perturbation(set, order, fraction, rng);
    r.pert_norm = d.left_norm();
    r.product_norm = hinf_norm(fir_series(fir_stack_cols(d.d_mt, d.d_nt), stack, H));
    r.phi_invertible = r.product_norm < 1.0;
    try {
      const ClosedLoop cl = closed_loop(perturbed_plant(set.nominal, d).realization(), controller);
      r.loop_stable = is_stable(cl.sys);
    } catch (const std::domain_error &) {
      r.loop_stable = false;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace robs
