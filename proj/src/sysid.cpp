#include "robs/sysid.hpp"

#include "robs/riccati.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <random>
#include <sstream>

namespace robs
{

void Trajectory::validate() const
{
  const Index T = u.cols();
  require_dims(y.cols() == T && r.cols() == T && w.cols() == T && nu.cols() == T &&
    delta.cols() == T, "Trajectory: signal lengths differ");
  require_dims(w.rows() == u.rows() && r.rows() == y.rows() && nu.rows() == y.rows(),
    "Trajectory: signal widths differ");
  if (!u.allFinite() || !y.allFinite()) {
    throw std::domain_error("Trajectory: non-finite samples");
  }
}

Trajectory simulate_closed_loop(
  const System & plant, const YoulaRealization & controller, const NoiseConfig & noise, Index T,
  double guard)
{
  noise.validate();
  require_dims(T >= 1, "simulate_closed_loop: T must be positive");
  const ClosedLoop cl = closed_loop(plant, factor_controller(controller));
  const Index n = cl.n, m = cl.m, p = cl.p;

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix in(2 * p + m + n, T);
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < p; ++i) {
      in(cl.input_r() + i, t) = noise.sigma_r * g(rng);
    }
    for (Index i = 0; i < m; ++i) {
      in(cl.input_w() + i, t) = noise.sigma_w * g(rng);
    }
    for (Index i = 0; i < p; ++i) {
      in(cl.input_nu() + i, t) = noise.sigma_nu * g(rng);
    }
    for (Index i = 0; i < n; ++i) {
      in(cl.input_delta() + i, t) = noise.sigma_delta * g(rng);
    }
  }
  const Matrix out = simulate(cl.sys, in, guard);

  Trajectory tr;
  tr.seed = noise.seed;
  tr.r = in.middleRows(cl.input_r(), p);
  tr.w = in.middleRows(cl.input_w(), m);
  tr.nu = in.middleRows(cl.input_nu(), p);
  tr.delta = in.middleRows(cl.input_delta(), n);
  tr.x = out.middleRows(cl.output_x(), n);
  tr.u = out.middleRows(cl.output_u(), m);
  tr.y = out.middleRows(cl.output_y(), p);
  return tr;
}

DualYoulaSignals dual_youla_signals(const Trajectory & traj, const Dcf & initial)
{
  traj.validate();
  const Index m = initial.m(), p = initial.p();
  require_dims(traj.u.rows() == m && traj.y.rows() == p, "dual_youla_signals: trajectory does not match the factors");
  const Index T = traj.length();

  Matrix rw(p + m, T);
  rw << traj.r, traj.w;
  Matrix yv(p + m, T);
  yv << traj.y, traj.u + traj.w;

  DualYoulaSignals s;
  s.e1 = simulate(stack_cols(initial.X, initial.Y), rw);
  s.e2 = simulate(stack_cols(initial.Mt, -initial.Nt), yv);
  return s;
}

System dual_youla_parameter(const Dcf & initial, const System & plant)
{
  require_dims(plant.inputs() == initial.m() && plant.outputs() == initial.p(),
    "dual_youla_parameter: plant dimensions differ from the factors");
  const Index n = plant.states();
  const Index m = plant.inputs();
  System Mo = System::identity(m);
  System No = System::gain(plant.D);
  if (n > 0) {
    const Matrix F = dare<double>(plant.A, plant.B, Matrix::Identity(n, n), Matrix::Identity(m, m)).F;
    const Matrix AF = plant.A + plant.B * F;
    Mo = System(AF, plant.B, F, Matrix::Identity(m, m));
    No = System(AF, plant.B, plant.C + plant.D * F, plant.D);
  }
  const System phi = initial.X * No + initial.Y * Mo;
  const System inv = inverse(phi);
  if (!is_stable(inv)) {
    throw std::domain_error("dual_youla_parameter: the initial controller does not stabilize the plant");
  }
  return (initial.Mt * No - initial.Nt * Mo) * inv;
}

System plant_from_dual_youla(const Dcf & initial, const System & R)
{
  return inverse(initial.Mt - R * initial.X) * (initial.Nt + R * initial.Y);
}

Matrix hankel_matrix(const Fir & R, Index d)
{
  const Index p = R.rows(), m = R.cols();
  Matrix H(p * d, m * d);
  for (Index i = 0; i < d; ++i) {
    for (Index k = 0; k < d; ++k) {
      H.block(i * p, k * m, p, m) = R.tap(i + k + 1);
    }
  }
  return H;
}

Fir HankelEstimate::markov() const
{
  Fir R(p, m, 2 * d);
  for (Index i = 0; i < d; ++i) {
    R[0] += G_hat.block(i * p, i * m, p, m) / double(d);
  }
  for (Index j = 1; j < 2 * d; ++j) {
    Matrix sum = Matrix::Zero(p, m);
    int count = 0;
    for (Index i = 0; i < d; ++i) {
      const Index k = j - 1 - i;
      if (k >= 0 && k < d) {
        sum += block(i, k);
        ++count;
      }
    }
    R[j] = sum / double(count);
  }
  return R;
}

HankelEstimate ols_hankel(const Matrix & e1, const Matrix & e2, Index d, double ridge)
{
  require_dims(e1.cols() == e2.cols(), "ols_hankel: e1 and e2 lengths differ");
  require_dims(d >= 1, "ols_hankel: depth must be positive");
  const Index T = e1.cols();
  const Index m = e1.rows(), p = e2.rows();
  if (T <= 2 * d) {
    throw std::invalid_argument("ols_hankel: need T > 2d");
  }
  const Index windows = T - 2 * d + 1;
  const Index nz = 2 * m * d;
  if (windows < nz) {
    throw std::runtime_error("ols_hankel: rank-deficient regressor (fewer windows than unknowns)");
  }

  // Window l covers future samples l..l+d-1 and past samples l-1..l-d.
  Matrix Z(nz, windows);
  Matrix Yw(p * d, windows);
  for (Index c = 0; c < windows; ++c) {
    const Index l = c + d;
    for (Index k = 0; k < d; ++k) {
      Z.block(k * m, c, m, 1) = e1.col(l - 1 - k);
      Z.block((d + k) * m, c, m, 1) = e1.col(l + k);
      Yw.block(k * p, c, p, 1) = e2.col(l + k);
    }
  }
  Matrix ZZ = Z * Z.transpose();
  const Eigen::SelfAdjointEigenSolver<Matrix> es(ZZ, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  const double bottom = es.eigenvalues().minCoeff();
  if (!(top > 0) || bottom <= 1e-13 * top) {
    throw std::runtime_error("ols_hankel: rank-deficient regressor");
  }
  ZZ.diagonal().array() += ridge;
  const Matrix theta = ZZ.ldlt().solve(Z * Yw.transpose()).transpose();

  HankelEstimate h;
  h.d = d;
  h.T = T;
  h.m = m;
  h.p = p;
  h.H_hat = theta.leftCols(m * d);
  h.G_hat = theta.rightCols(m * d);
  h.residual = (Yw - theta * Z).norm() / std::sqrt(double(windows));
  const double per_entry = (Yw - theta * Z).norm() / std::sqrt(double(windows * p * d));
  h.noise_floor = per_entry / std::sqrt(bottom) * (std::sqrt(double(p * d)) + std::sqrt(double(m * d)));
  return h;
}

HoKalman ho_kalman(const Matrix & H, Index p, Index m, Index order)
{
  require_dims(p >= 1 && m >= 1 && H.rows() % p == 0 && H.cols() % m == 0, "ho_kalman: block sizes");
  const Index d = H.rows() / p;
  if (d < 2) {
    throw std::invalid_argument("ho_kalman: need at least two block rows");
  }
  Eigen::JacobiSVD<Matrix> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector & s = svd.singularValues();
  if (order < 1 || order > s.size() || !(s(order - 1) > 1e-12 * std::max(1.0, s(0)))) {
    throw std::invalid_argument("ho_kalman: order exceeds the numerical rank of the Hankel matrix");
  }
  const Vector root = s.head(order).cwiseSqrt();
  const Matrix O = svd.matrixU().leftCols(order) * root.asDiagonal();
  const Matrix Cc = root.asDiagonal() * svd.matrixV().leftCols(order).transpose();

  HoKalman hk;
  hk.singular_values = s;
  hk.C = O.topRows(p);
  hk.B = Cc.leftCols(m);
  // Shift invariance of the observability factor.
  const Matrix up = O.topRows(p * (d - 1));
  const Matrix down = O.bottomRows(p * (d - 1));
  hk.A = up.completeOrthogonalDecomposition().solve(down);
  return hk;
}

Index numerical_order(const Vector & singular_values, double fraction, double floor)
{
  if (singular_values.size() == 0 || !(singular_values(0) > 0)) {
    return 0;
  }
  const double cut = std::max(fraction * singular_values(0), floor);
  Index r = 0;
  while (r < singular_values.size() && singular_values(r) >= cut && singular_values(r) > 0) {
    ++r;
  }
  return r;
}

void SampleComplexityParams::validate() const
{
  if (!(beta > 0 && script_R > 0 && c_const > 0)) {
    throw std::invalid_argument("SampleComplexityParams: beta, script_R and c_const must be positive");
  }
  if (!(delta_fail > 0 && delta_fail < 1)) {
    throw std::invalid_argument("SampleComplexityParams: delta_fail must lie in (0, 1)");
  }
  if (m < 1 || p < 1) {
    throw std::invalid_argument("SampleComplexityParams: m and p must be positive");
  }
}

double gamma_hat_formula(double xy_norm, const SampleComplexityParams & k, Index d_hat, double T)
{
  k.validate();
  require_dims(d_hat >= 1 && T > 0, "gamma_hat_formula: d_hat and T must be positive");
  const double d = double(d_hat);
  const double inner = (double(k.m) * d + double(k.p) * d * d + d * std::log(T / k.delta_fail)) / T;
  return xy_norm * 12.0 * k.c_const * k.beta * k.script_R * std::sqrt(inner);
}

double s_constant(double xy_norm, const SampleComplexityParams & k)
{
  const double a = xy_norm * k.c_const * k.beta * k.script_R;
  return 144.0 * a * a;
}

double min_horizon(double gamma, double s, Index d_hat, Index m, Index p, double delta_fail)
{
  require_dims(gamma > 0 && s >= 0 && delta_fail > 0, "min_horizon: gamma, s, delta must be positive");
  const double d = double(d_hat);
  const double c = s * (double(m) * d + double(p) * d * d);
  auto f = [&](double T) {return gamma * gamma * T - s * d * std::log(T / delta_fail) - c;};
  // f is concave with its minimum at s d / gamma^2.
  const double lo0 = std::max(s * d / (gamma * gamma), 1e-300);
  if (f(lo0) >= 0) {
    return 0.0;
  }
  double lo = lo0, hi = 2 * lo0;
  while (f(hi) < 0) {
    lo = hi;
    hi *= 2;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return hi;
}

Index log_depth(Index T, double delta_fail, Index m)
{
  const Index d = static_cast<Index>(std::ceil(std::log(double(T) / delta_fail)));
  // windows = T - 2d + 1 must cover 2 m d unknowns
  const Index cap = (T + 1) / (2 + 2 * m);
  return std::max<Index>(2, std::min(d, cap));
}

RecoveredFactors recover_factors(
  const Dcf & initial, const System & R_hat, const SampleComplexityParams & k, Index d_hat, Index T,
  double gamma_floor)
{
  require_dims(R_hat.outputs() == initial.p() && R_hat.inputs() == initial.m(),
    "recover_factors: R_hat must be p x m");
  const Dcf & d = initial;
  const System Mt = d.Mt - R_hat * d.X;
  const System Nt = d.Nt + R_hat * d.Y;
  const System M = d.M - d.Xt * R_hat;
  const System N = d.N + d.Yt * R_hat;
  const System plant = inverse(Mt) * Nt;

  RecoveredFactors rf;
  rf.model = dcf_from_factors(plant, d.gains, M, N, Mt, Nt, d.X, d.Y, d.Xt, d.Yt, d.fir_len);
  rf.xy_norm = hinf_norm(stack_cols(d.X, d.Y));
  const System delta = R_hat * stack_cols(-d.X, d.Y);
  rf.shift = hinf_norm(delta);
  rf.gamma_hat = gamma_hat_formula(rf.xy_norm, k, d_hat, double(T));
  rf.gamma = std::max(rf.gamma_hat, gamma_floor);
  return rf;
}

IdentifiedModel identify(const Trajectory & traj, const Dcf & initial, const IdentifyConfig & cfg)
{
  return identify(dual_youla_signals(traj, initial), initial, cfg);
}

IdentifiedModel identify(const DualYoulaSignals & sig, const Dcf & initial, const IdentifyConfig & cfg)
{
  cfg.params.validate();
  const Index T = sig.e1.cols();
  const Index m = initial.m(), p = initial.p();
  require_dims(sig.e1.rows() == m && sig.e2.rows() == p && sig.e2.cols() == T,
    "identify: e1 must be m x T and e2 p x T");

  IdentifiedModel im;
  im.d_hat = cfg.depth > 0 ? cfg.depth : log_depth(T, cfg.params.delta_fail, m);
  im.hankel = ols_hankel(sig.e1, sig.e2, im.d_hat, cfg.ridge);
  const Eigen::JacobiSVD<Matrix> svd(im.hankel.H_hat);
  Index rank_order = numerical_order(svd.singularValues(), cfg.sv_fraction);
  // adapted depth rule: never shallower than the retained order
  if (cfg.depth <= 0 && rank_order > im.d_hat) {
    im.d_hat = rank_order;
    im.hankel = ols_hankel(sig.e1, sig.e2, im.d_hat, cfg.ridge);
  }
  // adapted: the order also ignores directions below the estimation noise
  rank_order = numerical_order(
    Eigen::JacobiSVD<Matrix>(im.hankel.H_hat).singularValues(), cfg.sv_fraction, im.hankel.noise_floor);
  im.order = cfg.order > 0 ? cfg.order : rank_order;

  const Fir taps = im.hankel.markov();
  // adapted: lower the order until the realization is stable
  for (; im.order > 0; --im.order) {
    im.hk = ho_kalman(im.hankel.H_hat, p, m, im.order);
    im.R_hat = im.hk.realization(taps[0]);
    if (is_stable(im.R_hat)) {
      break;
    }
  }
  if (im.order == 0) {
    im.R_hat = System::gain(taps[0]);
    im.hk = HoKalman{};
    im.hk.singular_values = svd.singularValues();
  }
  SampleComplexityParams k = cfg.params;
  k.m = m;
  k.p = p;
  im.factors = recover_factors(initial, im.R_hat, k, im.d_hat, T, cfg.gamma_floor);
  return im;
}

double hankel_tail_error(const Fir & R, Index d, Index far)
{
  require_dims(far >= d, "hankel_tail_error: far must be at least d");
  Matrix big = hankel_matrix(R, far);
  big.topLeftCorner(R.rows() * d, R.cols() * d).setZero();
  return Eigen::JacobiSVD<Matrix>(big).singularValues()(0);
}

Index d_star(const Fir & R, const SampleComplexityParams & k, double T, Index d_max)
{
  k.validate();
  const Index far = std::max<Index>(2 * d_max, R.size());
  for (Index d = 1; d <= d_max; ++d) {
    const double f = std::sqrt(double(d)) *
      std::sqrt((double(k.m) + double(d * k.p) + std::log(T / k.delta_fail)) / T);
    if (16.0 * k.beta * k.script_R * f >= hankel_tail_error(R, d, far)) {
      return d;
    }
  }
  return -1;
}

std::string trajectory_csv(const Trajectory & traj, const DualYoulaSignals & sig)
{
  std::ostringstream os;
  os.precision(17);
  auto header = [&](const char * name, Index k) {
      for (Index i = 0; i < k; ++i) {
        os << ',' << name;
        if (k > 1) {
          os << '_' << i;
        }
      }
    };
  os << 't';
  header("u", traj.u.rows());
  header("y", traj.y.rows());
  header("r", traj.r.rows());
  header("e1", sig.e1.rows());
  header("e2", sig.e2.rows());
  os << '\n';
  for (Index t = 0; t < traj.length(); ++t) {
    os << t;
    for (const Matrix * s : {&traj.u, &traj.y, &traj.r, &sig.e1, &sig.e2}) {
      for (Index i = 0; i < s->rows(); ++i) {
        os << ',' << (*s)(i, t);
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace robs
