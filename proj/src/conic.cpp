#include "robs/conic.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

namespace robs
{

namespace
{

constexpr double kSqrt2 = 1.4142135623730951;

double inf_norm(const Vector & v)
{
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace

const char * to_string(ConeKind k)
{
  switch (k) {
    case ConeKind::zero: return "zero";
    case ConeKind::nonneg: return "nonneg";
    case ConeKind::soc: return "soc";
    case ConeKind::psd: return "psd";
  }
  return "?";
}

const char * to_string(SolveStatus s)
{
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::max_iter: return "max_iter";
  }
  return "?";
}

void ConicProgram::validate() const
{
  require_dims(A.cols() == c.size(), "ConicProgram: A column count must equal length of c");
  require_dims(A.rows() == b.size(), "ConicProgram: A row count must equal length of b");
  Index total = 0;
  for (const Cone & k : cones) {
    if (k.kind == ConeKind::psd) {
      require_dims(k.dim == svec_size(k.side), "ConicProgram: psd cone dim must be side(side+1)/2");
    }
    if (k.kind == ConeKind::soc) {
      require_dims(k.dim >= 1, "ConicProgram: soc cone needs at least one row");
    }
    total += k.dim;
  }
  require_dims(total == b.size(), "ConicProgram: cone dimensions must sum to the row count");
}

/* ----------------------------- projections ------------------------------ */

Index svec_size(Index side)
{
  return side * (side + 1) / 2;
}

Vector svec(const Matrix & M)
{
  require_dims(M.rows() == M.cols(), "svec: square matrix required");
  const Index n = M.rows();
  Vector v(svec_size(n));
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    v(k++) = M(j, j);
    for (Index i = j + 1; i < n; ++i) {
      v(k++) = kSqrt2 * M(i, j);
    }
  }
  return v;
}

Matrix smat(const Eigen::Ref<const Vector> & v, Index side)
{
  require_dims(v.size() == svec_size(side), "smat: length must be side(side+1)/2");
  Matrix M(side, side);
  Index k = 0;
  for (Index j = 0; j < side; ++j) {
    M(j, j) = v(k++);
    for (Index i = j + 1; i < side; ++i) {
      M(i, j) = M(j, i) = v(k++) / kSqrt2;
    }
  }
  return M;
}

Matrix project_psd(const Matrix & M, bool * was_symmetric)
{
  require_dims(M.rows() == M.cols(), "project_psd: square matrix required");
  const Matrix S = 0.5 * (M + M.transpose());
  if (was_symmetric) {
    *was_symmetric = (S - M).norm() <= 1e-12 * std::max(1.0, M.norm());
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Vector project_soc(const Vector & v)
{
  require_dims(v.size() >= 1, "project_soc: empty vector");
  const double t = v(0);
  const double r = v.tail(v.size() - 1).norm();
  if (r <= t) {
    return v;
  }
  if (r <= -t) {
    return Vector::Zero(v.size());
  }
  const double a = 0.5 * (t + r);
  Vector out(v.size());
  out(0) = a;
  out.tail(v.size() - 1) = (a / r) * v.tail(v.size() - 1);
  return out;
}

void project_cone(const Cone & cone, Eigen::Ref<Vector> v)
{
  switch (cone.kind) {
    case ConeKind::zero:
      v.setZero();
      break;
    case ConeKind::nonneg:
      v = v.cwiseMax(0.0);
      break;
    case ConeKind::soc:
      v = project_soc(v);
      break;
    case ConeKind::psd:
      v = svec(project_psd(smat(v, cone.side)));
      break;
  }
}

void project_polar(const Cone & cone, Eigen::Ref<Vector> v)
{
  // Moreau: v = P_K(v) + P_K°(v)
  Vector p = v;
  project_cone(cone, p);
  v -= p;
}

/* -------------------------------- solver -------------------------------- */

namespace
{

struct Scaling
{
  Vector D, E;  // row and column scalings
  double cost = 1;
};

// Ruiz equilibration; one scalar per soc/psd block keeps the cones invariant.
Scaling equilibrate(const ConicProgram & prog, int passes)
{
  const Index m = prog.rows();
  const Index n = prog.variables();
  Scaling sc;
  sc.D = Vector::Ones(m);
  sc.E = Vector::Ones(n);
  SparseMatrix A = prog.A;
  auto clamp = [](double x) {return std::clamp(x, 1e-4, 1e4);};
  for (int it = 0; it < passes; ++it) {
    Vector col = Vector::Zero(n);
    Vector row = Vector::Zero(m);
    for (Index j = 0; j < A.outerSize(); ++j) {
      for (SparseMatrix::InnerIterator e(A, j); e; ++e) {
        const double a = std::abs(e.value());
        col(j) = std::max(col(j), a);
        row(e.row()) = std::max(row(e.row()), a);
      }
    }
    Vector dr(m), dc(n);
    for (Index j = 0; j < n; ++j) {
      dc(j) = col(j) > 0 ? 1.0 / std::sqrt(clamp(col(j))) : 1.0;
    }
    Index r0 = 0;
    for (const Cone & k : prog.cones) {
      if (k.kind == ConeKind::soc || k.kind == ConeKind::psd) {
        const double mx = row.segment(r0, k.dim).maxCoeff();
        dr.segment(r0, k.dim).setConstant(mx > 0 ? 1.0 / std::sqrt(clamp(mx)) : 1.0);
      } else {
        for (Index i = r0; i < r0 + k.dim; ++i) {
          dr(i) = row(i) > 0 ? 1.0 / std::sqrt(clamp(row(i))) : 1.0;
        }
      }
      r0 += k.dim;
    }
    A = dr.asDiagonal() * A * dc.asDiagonal();
    sc.D = sc.D.cwiseProduct(dr);
    sc.E = sc.E.cwiseProduct(dc);
  }
  const double cn = inf_norm(Vector(sc.E.cwiseProduct(prog.c)));
  sc.cost = cn > 0 ? 1.0 / clamp(cn) : 1.0;
  return sc;
}

struct Residuals
{
  double primal = 0, dual = 0, primal_scale = 0, dual_scale = 0;
  double obj = 0, dual_obj = 0;
};

Residuals residuals(const ConicProgram & prog, const Vector & x, const Vector & s, const Vector & y)
{
  Residuals r;
  const Vector Ax = prog.A * x;
  const Vector Aty = prog.A.transpose() * y;
  r.primal = inf_norm(Vector(Ax + s - prog.b));
  r.dual = inf_norm(Vector(prog.c - Aty));
  r.primal_scale = std::max({inf_norm(Ax), inf_norm(s), inf_norm(prog.b)});
  r.dual_scale = std::max(inf_norm(prog.c), inf_norm(Aty));
  r.obj = prog.c.dot(x);
  r.dual_obj = prog.b.dot(y);
  return r;
}

}  // namespace

Solution solve(const ConicProgram & prog, const SolverSettings & st)
{
  prog.validate();
  const Index m = prog.rows();
  const Index n = prog.variables();

  const Scaling sc = equilibrate(prog, st.equilibration_passes);
  const SparseMatrix A = sc.D.asDiagonal() * prog.A * sc.E.asDiagonal();
  const Vector b = sc.D.cwiseProduct(prog.b);
  const Vector c = sc.cost * sc.E.cwiseProduct(prog.c);
  const SparseMatrix At = A.transpose();

  // Step sizes: zero-cone rows get a larger one.
  Vector rho_base = Vector::Ones(m);
  {
    Index r0 = 0;
    for (const Cone & k : prog.cones) {
      if (k.kind == ConeKind::zero) {
        rho_base.segment(r0, k.dim).setConstant(st.rho_eq_scale);
      }
      r0 += k.dim;
    }
  }
  double rho = st.rho;
  Vector R = rho * rho_base;

  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  auto factor = [&]() {
      SparseMatrix K = At * R.asDiagonal() * A;
      SparseMatrix I(n, n);
      I.setIdentity();
      K += st.sigma * I;
      ldlt.compute(K);
      if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error("conic solve: KKT factorization failed");
      }
    };
  factor();

  Vector x = Vector::Zero(n), s = Vector::Zero(m), y = Vector::Zero(m);
  Vector y_prev = y;
  Solution sol;
  sol.status = SolveStatus::max_iter;

  auto unscale = [&](Solution & out) {
      out.x = sc.E.cwiseProduct(x);
      out.s = s.cwiseQuotient(sc.D);
      out.y = sc.D.cwiseProduct(y) / sc.cost;
    };

  int it = 0;
  for (it = 1; it <= st.max_iter; ++it) {
    y_prev = y;
    const Vector rhs = st.sigma * x - c + At * (R.cwiseProduct(b - s) + y);
    const Vector xt = ldlt.solve(rhs);
    const Vector st_ = b - A * xt;
    x = st.relax * xt + (1 - st.relax) * x;
    const Vector shat = st.relax * st_ + (1 - st.relax) * s;
    Vector v = shat + y.cwiseQuotient(R);
    Index r0 = 0;
    for (const Cone & k : prog.cones) {
      project_cone(k, v.segment(r0, k.dim));
      r0 += k.dim;
    }
    s = v;
    y += R.cwiseProduct(shat - s);

    const bool check = it % st.check_every == 0 || it == st.max_iter;
    if (!check) {
      continue;
    }
    Solution cur;
    unscale(cur);
    const Residuals r = residuals(prog, cur.x, cur.s, cur.y);
    const bool primal_ok = r.primal <= st.tol * (1 + r.primal_scale);
    const bool dual_ok = r.dual <= st.tol * (1 + r.dual_scale);
    const bool gap_ok = std::abs(r.obj - r.dual_obj) <= st.tol * (1 + std::abs(r.obj) + std::abs(r.dual_obj));
    if (primal_ok && dual_ok && gap_ok) {
      sol = cur;
      sol.status = SolveStatus::optimal;
      sol.primal_residual = r.primal;
      sol.dual_residual = r.dual;
      sol.objective = r.obj;
      sol.dual_objective = r.dual_obj;
      sol.iterations = it;
      return sol;
    }

    // Farkas direction: A'dy = 0, b'dy > 0, dy polar.
    const Vector dy = sc.D.cwiseProduct(y - y_prev);
    const double dn = inf_norm(dy);
    if (dn > 1e-12) {
      const Vector d = dy / dn;
      Vector pol = d;
      Index q0 = 0;
      for (const Cone & k : prog.cones) {
        project_polar(k, pol.segment(q0, k.dim));
        q0 += k.dim;
      }
      const double bd = prog.b.dot(d);
      if (bd > st.infeasible_tol &&
        inf_norm(Vector(prog.A.transpose() * d)) <= st.infeasible_tol * bd &&
        inf_norm(Vector(pol - d)) <= st.infeasible_tol)
      {
        sol = cur;
        sol.status = SolveStatus::infeasible;
        sol.primal_residual = r.primal;
        sol.dual_residual = r.dual;
        sol.objective = r.obj;
        sol.dual_objective = r.dual_obj;
        sol.iterations = it;
        return sol;
      }
    }

    if (it % st.adapt_every == 0) {
      // Residual balancing in the scaled space.
      const Vector Ax = A * x;
      const Vector Aty = At * y;
      const double pn = inf_norm(Vector(Ax + s - b)) /
        std::max({inf_norm(Ax), inf_norm(s), inf_norm(b), 1e-10});
      const double dnrm = inf_norm(Vector(c - Aty)) / std::max({inf_norm(c), inf_norm(Aty), 1e-10});
      const double ratio = std::sqrt(pn / std::max(dnrm, 1e-14));
      if (ratio > 5 || ratio < 0.2) {
        rho = std::clamp(rho * ratio, 1e-6, 1e6);
        R = rho * rho_base;
        factor();
      }
    }

    if (it == st.max_iter) {
      sol = cur;
      sol.primal_residual = r.primal;
      sol.dual_residual = r.dual;
      sol.objective = r.obj;
      sol.dual_objective = r.dual_obj;
    }
  }
  sol.status = SolveStatus::max_iter;
  sol.iterations = st.max_iter;
  return sol;
}

Solution solve(const ConicProgram & prog, double tol, int max_iter)
{
  SolverSettings st;
  st.tol = tol;
  st.max_iter = max_iter;
  return solve(prog, st);
}

/* ------------------------------ builder --------------------------------- */

Index ProgramBuilder::add_variables(Index k)
{
  require_dims(k >= 0, "ProgramBuilder: negative variable count");
  const Index first = n_;
  n_ += k;
  return first;
}

void ProgramBuilder::set_cost(Index var, double c)
{
  require_dims(var >= 0 && var < n_, "ProgramBuilder: cost on unknown variable");
  cost_.emplace_back(var, c);
}

Index ProgramBuilder::add_cone(const Cone & cone)
{
  const Index first = m_;
  m_ += cone.dim;
  cones_.push_back(cone);
  return first;
}

void ProgramBuilder::add_term(Index row, Index var, double coef)
{
  require_dims(row >= 0 && row < m_ && var >= 0 && var < n_, "ProgramBuilder: term out of range");
  if (coef != 0.0) {
    triplets_.emplace_back(row, var, -coef);
  }
}

void ProgramBuilder::add_constant(Index row, double value)
{
  require_dims(row >= 0 && row < m_, "ProgramBuilder: row out of range");
  if (value != 0.0) {
    offset_.emplace_back(row, value);
  }
}

ConicProgram ProgramBuilder::build() const
{
  ConicProgram p;
  p.c = Vector::Zero(n_);
  for (const auto & [v, c] : cost_) {
    p.c(v) += c;
  }
  p.b = Vector::Zero(m_);
  for (const auto & [r, v] : offset_) {
    p.b(r) += v;
  }
  p.A.resize(m_, n_);
  p.A.setFromTriplets(triplets_.begin(), triplets_.end());
  p.A.makeCompressed();
  p.cones = cones_;
  p.validate();
  return p;
}

/* ------------------------------ encoders -------------------------------- */

Fir AffineFir::evaluate(const Vector & theta) const
{
  require_dims(theta.size() == linear.cols(), "AffineFir: parameter length mismatch");
  const Vector v = constant + linear * theta;
  Fir f(rows, cols, taps);
  for (Index j = 0; j < taps; ++j) {
    for (Index c = 0; c < cols; ++c) {
      for (Index r = 0; r < rows; ++r) {
        f[j](r, c) = v(entry(j, r, c));
      }
    }
  }
  return f;
}

AffineFir constant_fir(const Fir & f, Index taps)
{
  AffineFir a;
  a.rows = f.rows();
  a.cols = f.cols();
  a.taps = taps;
  a.constant = vec_stack(f, taps);
  a.linear = Matrix::Zero(a.constant.size(), 0);
  return a;
}

namespace
{

void add_scalar(ProgramBuilder & pb, Index row, const AffineScalar & a, double weight)
{
  pb.add_constant(row, weight * a.constant);
  if (a.var >= 0) {
    pb.add_term(row, a.var, weight * a.coef);
  }
}

}  // namespace

LmiBlocks hinf_lmi_blocks(ProgramBuilder & pb, const AffineFir & F, const AffineScalar & alpha)
{
  const Index k = F.rows;
  const Index w = F.cols;
  const Index n1 = F.taps;
  const Index side = k * n1;
  LmiBlocks out;
  out.s_side = side;
  out.s_first_var = pb.add_variables(svec_size(side));

  // Variable index of S(r, c), r >= c, lower triangle by columns.
  auto s_var = [&](Index r, Index c) {
      if (r < c) {
        std::swap(r, c);
      }
      return out.s_first_var + c * side - c * (c - 1) / 2 + (r - c);
    };

  // Schur block [[S, Fbar], [Fbar', alpha I]] in svec order.
  const Index big = side + w;
  out.schur_row = pb.add_cone(Cone::psd(big));
  Index row = out.schur_row;
  for (Index c = 0; c < big; ++c) {
    for (Index r = c; r < big; ++r, ++row) {
      const double scale = r == c ? 1.0 : kSqrt2;
      if (c < side) {
        if (r < side) {
          pb.add_term(row, s_var(r, c), scale);
        } else {
          // Fbar(c, r - side): tap c / k, entry (c % k, r - side)
          const Index e = F.entry(c / k, c % k, r - side);
          pb.add_constant(row, scale * F.constant(e));
          for (Index i = 0; i < F.linear.cols(); ++i) {
            const double v = F.linear(e, i);
            if (v != 0.0) {
              pb.add_term(row, F.first_var + i, scale * v);
            }
          }
        }
      } else if (r == c) {
        add_scalar(pb, row, alpha, 1.0);
      }
    }
  }

  // sum_{i=0}^{n-d} S_{i+d,i} = alpha delta[d] I
  out.trace_rows = k * (k + 1) / 2 + (n1 - 1) * k * k;
  out.trace_row = pb.add_cone(Cone::zero(out.trace_rows));
  row = out.trace_row;
  for (Index d = 0; d < n1; ++d) {
    for (Index b = 0; b < k; ++b) {
      for (Index a = (d == 0 ? b : 0); a < k; ++a, ++row) {
        for (Index i = 0; i + d < n1; ++i) {
          pb.add_term(row, s_var((i + d) * k + a, i * k + b), 1.0);
        }
        if (d == 0 && a == b) {
          add_scalar(pb, row, alpha, -1.0);
        }
      }
    }
  }
  return out;
}

ConicProgram hinf_lmi_program(const Fir & F, double alpha)
{
  if (!(alpha > 0)) {
    throw std::invalid_argument("hinf_lmi_program: alpha must be positive");
  }
  ProgramBuilder pb;
  hinf_lmi_blocks(pb, constant_fir(F, F.size()), AffineScalar{alpha});
  return pb.build();
}

ConicProgram hinf_lmi_min_alpha(const Fir & F)
{
  ProgramBuilder pb;
  const Index a = pb.add_variables(1);
  pb.set_cost(a, 1.0);
  hinf_lmi_blocks(pb, constant_fir(F, F.size()), AffineScalar{0.0, a, 1.0});
  return pb.build();
}

Matrix build_qhat(const Fir & Q, Index width, Index taps)
{
  const Index m = Q.rows();
  const Index p = Q.cols();
  Matrix Qh = Matrix::Zero(taps * m * width, taps * p * width);
  for (Index j = 0; j < taps; ++j) {
    for (Index i = 0; i <= j; ++i) {
      const Matrix q = Q.tap(j - i);
      for (Index c = 0; c < width; ++c) {
        Qh.block(j * m * width + c * m, i * p * width + c * p, m, p) = q;
      }
    }
  }
  return Qh;
}

Vector vec_stack(const Fir & f, Index taps)
{
  const Index r = f.rows();
  const Index c = f.cols();
  Vector v(taps * r * c);
  for (Index j = 0; j < taps; ++j) {
    const Matrix t = f.tap(j);
    v.segment(j * r * c, r * c) = Eigen::Map<const Vector>(t.data(), r * c);
  }
  return v;
}

Vector vec_stack(const Fir & f)
{
  return vec_stack(f, f.size());
}

/* -------------------------------- JSON ---------------------------------- */

std::string to_json(const ConicProgram & prog)
{
  prog.validate();
  nlohmann::json j;
  j["n"] = prog.variables();
  j["m"] = prog.rows();
  j["c"] = std::vector<double>(prog.c.data(), prog.c.data() + prog.c.size());
  j["b"] = std::vector<double>(prog.b.data(), prog.b.data() + prog.b.size());
  std::vector<Index> ii, jj;
  std::vector<double> vv;
  for (Index col = 0; col < prog.A.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator e(prog.A, col); e; ++e) {
      ii.push_back(e.row());
      jj.push_back(col);
      vv.push_back(e.value());
    }
  }
  j["A"] = {{"i", ii}, {"j", jj}, {"v", vv}};
  nlohmann::json cones = nlohmann::json::array();
  for (const Cone & k : prog.cones) {
    nlohmann::json cj = {{"kind", to_string(k.kind)}, {"dim", k.dim}};
    if (k.kind == ConeKind::psd) {
      cj["side"] = k.side;
    }
    cones.push_back(cj);
  }
  j["cones"] = cones;
  return j.dump();
}

ConicProgram conic_program_from_json(const std::string & text)
{
  const nlohmann::json j = nlohmann::json::parse(text);
  ConicProgram p;
  const Index n = j.at("n").get<Index>();
  const Index m = j.at("m").get<Index>();
  const auto c = j.at("c").get<std::vector<double>>();
  const auto b = j.at("b").get<std::vector<double>>();
  require_dims(Index(c.size()) == n && Index(b.size()) == m, "conic JSON: c or b length mismatch");
  p.c = Eigen::Map<const Vector>(c.data(), n);
  p.b = Eigen::Map<const Vector>(b.data(), m);
  const auto ii = j.at("A").at("i").get<std::vector<Index>>();
  const auto jj = j.at("A").at("j").get<std::vector<Index>>();
  const auto vv = j.at("A").at("v").get<std::vector<double>>();
  require_dims(ii.size() == jj.size() && jj.size() == vv.size(), "conic JSON: triplet lengths differ");
  std::vector<Triplet> t;
  for (std::size_t k = 0; k < ii.size(); ++k) {
    require_dims(ii[k] >= 0 && ii[k] < m && jj[k] >= 0 && jj[k] < n, "conic JSON: triplet out of range");
    t.emplace_back(ii[k], jj[k], vv[k]);
  }
  p.A.resize(m, n);
  p.A.setFromTriplets(t.begin(), t.end());
  for (const auto & cj : j.at("cones")) {
    const std::string kind = cj.at("kind").get<std::string>();
    const Index dim = cj.at("dim").get<Index>();
    if (kind == "zero") {
      p.cones.push_back(Cone::zero(dim));
    } else if (kind == "nonneg") {
      p.cones.push_back(Cone::nonneg(dim));
    } else if (kind == "soc") {
      p.cones.push_back(Cone::soc(dim));
    } else if (kind == "psd") {
      p.cones.push_back(Cone::psd(cj.at("side").get<Index>()));
    } else {
      throw std::invalid_argument("conic JSON: unknown cone kind " + kind);
    }
  }
  p.validate();
  return p;
}

}  // namespace robs
