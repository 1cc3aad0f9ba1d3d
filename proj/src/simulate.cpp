#include "robs/simulate.hpp"

namespace robs
{

System factor_controller(const YoulaRealization & yr)
{
  const Index m = yr.YQ.outputs();
  return stack_cols(yr.XQ, System::identity(m) - yr.YQ);
}

ClosedLoop closed_loop(const System & plant, const System & controller)
{
  const Index n = plant.states();
  const Index m = plant.inputs();
  const Index p = plant.outputs();
  const Index nc = controller.states();
  require_dims(
    controller.outputs() == m && controller.inputs() == p + m,
    "closed_loop: controller must map [z; u] (p + m) to u (m)");

  const Matrix & A = plant.A;
  const Matrix & B = plant.B;
  const Matrix & C = plant.C;
  const Matrix & D = plant.D;
  const Matrix Bz = controller.B.leftCols(p);
  const Matrix Bu = controller.B.rightCols(m);
  const Matrix Dz = controller.D.leftCols(p);
  const Matrix Du = controller.D.rightCols(m);

  const Matrix loop = Matrix::Identity(m, m) - Du + Dz * D;
  Eigen::FullPivLU<Matrix> lu(loop);
  if (!lu.isInvertible()) {
    throw std::domain_error("closed_loop: algebraic loop is singular");
  }
  const Matrix E = lu.inverse();

  const Index ns = n + nc;
  const Index ni = 2 * p + m + n;
  // u = Ku * xi + Kv * v, v = [r; w; nu; delta]
  Matrix Ku(m, ns);
  Ku.leftCols(n) = -E * Dz * C;
  Ku.rightCols(nc) = E * controller.C;
  Matrix Kv = Matrix::Zero(m, ni);
  Kv.middleCols(0, p) = E * Dz;
  Kv.middleCols(p, m) = -E * Dz * D;
  Kv.middleCols(p + m, p) = -E * Dz;

  // y = Yx * xi + Yv * v
  Matrix Yx = D * Ku;
  Yx.leftCols(n) += C;
  Matrix Yv = D * Kv;
  Yv.middleCols(p, m) += D;
  Yv.middleCols(p + m, p) += Matrix::Identity(p, p);

  Matrix Acl = Matrix::Zero(ns, ns);
  Matrix Bcl = Matrix::Zero(ns, ni);
  Acl.topLeftCorner(n, n) = A;
  Acl.topRows(n) += B * Ku;
  Bcl.topRows(n) = B * Kv;
  Bcl.block(0, p, n, m) += B;
  Bcl.block(0, 2 * p + m, n, n) += Matrix::Identity(n, n);

  if (nc > 0) {
    // xc+ = Ac xc + Bz (r - y) + Bu u
    Acl.bottomRightCorner(nc, nc) = controller.A;
    Acl.bottomRows(nc) += -Bz * Yx + Bu * Ku;
    Bcl.bottomRows(nc) = -Bz * Yv + Bu * Kv;
    Bcl.block(n, 0, nc, p) += Bz;
  }

  Matrix Ccl = Matrix::Zero(n + m + p, ns);
  Ccl.topLeftCorner(n, n) = Matrix::Identity(n, n);
  Ccl.middleRows(n, m) = Ku;
  Ccl.bottomRows(p) = Yx;
  Matrix Dcl = Matrix::Zero(n + m + p, ni);
  Dcl.middleRows(n, m) = Kv;
  Dcl.bottomRows(p) = Yv;

  ClosedLoop cl;
  cl.sys = System(Acl, Bcl, Ccl, Dcl);
  cl.n = n;
  cl.m = m;
  cl.p = p;
  return cl;
}

Matrix simulate(const System & sys, const Matrix & inputs, double guard)
{
  require_dims(inputs.rows() == sys.inputs(), "simulate: input rows must match system inputs");
  const Index T = inputs.cols();
  Matrix out(sys.outputs(), T);
  Vector x = Vector::Zero(sys.states());
  for (Index t = 0; t < T; ++t) {
    out.col(t).noalias() = sys.C * x + sys.D * inputs.col(t);
    x = sys.A * x + sys.B * inputs.col(t);
    if (!(x.norm() <= guard)) {
      throw std::overflow_error("simulate: state norm exceeded the instability guard");
    }
  }
  return out;
}

ObserverTrace simulate_observer_loop(
  const System & plant, const Matrix & F, const ObserverPair & obs,
  const Matrix & w, const Matrix & nu, const Matrix & delta)
{
  const Index n = plant.states();
  const Index m = plant.inputs();
  const Index p = plant.outputs();
  const Index T = w.cols();
  require_dims(w.rows() == m && nu.rows() == p && delta.rows() == n, "simulate_observer_loop: signal shapes");
  require_dims(nu.cols() == T && delta.cols() == T, "simulate_observer_loop: signal lengths differ");
  require_dims(obs.psi_u.size() >= T && obs.psi_y.size() >= T, "simulate_observer_loop: too few observer taps");

  ObserverTrace tr;
  tr.x = Matrix::Zero(n, T);
  tr.xhat = Matrix::Zero(n, T);
  tr.u = Matrix::Zero(m, T);
  tr.y = Matrix::Zero(p, T);

  const Matrix & Pu0 = obs.psi_u[0];
  const Matrix & Py0 = obs.psi_y[0];
  const Matrix loop = Matrix::Identity(n, n) - (Pu0 + Py0 * plant.D) * F;
  Eigen::PartialPivLU<Matrix> lu(loop);

  Vector x = Vector::Zero(n);
  for (Index t = 0; t < T; ++t) {
    Vector a = Vector::Zero(n);
    for (Index j = 1; j <= t; ++j) {
      a.noalias() += obs.psi_u[j] * tr.u.col(t - j) + obs.psi_y[j] * tr.y.col(t - j);
    }
    const Vector known = plant.C * x + plant.D * w.col(t) + nu.col(t);
    const Vector xh = lu.solve(a + Py0 * known);
    const Vector u = F * xh;
    tr.x.col(t) = x;
    tr.xhat.col(t) = xh;
    tr.u.col(t) = u;
    tr.y.col(t) = known + plant.D * u;
    x = plant.A * x + plant.B * (u + w.col(t)) + delta.col(t);
  }
  return tr;
}

}  // namespace robs
