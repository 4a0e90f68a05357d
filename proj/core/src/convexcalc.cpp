#include "sbolza/convexcalc.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sbolza::convexcalc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

MatrixXd vstack(const MatrixXd& a, const MatrixXd& b, int cols) {
  MatrixXd out(a.rows() + b.rows(), cols);
  if (a.rows() > 0) out.topRows(a.rows()) = a;
  if (b.rows() > 0) out.bottomRows(b.rows()) = b;
  return out;
}

VectorXd vcat(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

void flatten_into(const SetDescriptor& s, FlatSet& f) {
  const int d = f.dim();
  switch (s.kind) {
    case SetDescriptor::Kind::all:
      return;
    case SetDescriptor::Kind::box:
      require(s.lower.size() == d && s.upper.size() == d, "box bounds have wrong dimension");
      f.lo = f.lo.cwiseMax(s.lower);
      f.hi = f.hi.cwiseMin(s.upper);
      return;
    case SetDescriptor::Kind::affine:
      require(s.A.cols() == d && s.b.size() == s.A.rows(), "affine constraint has wrong dimension");
      f.Aeq = vstack(f.Aeq, s.A, d);
      f.beq = vcat(f.beq, s.b);
      return;
    case SetDescriptor::Kind::polyhedron:
      require(s.A.cols() == d && s.b.size() == s.A.rows(), "polyhedral constraint has wrong dimension");
      f.Ain = vstack(f.Ain, s.A, d);
      f.bin = vcat(f.bin, s.b);
      return;
    case SetDescriptor::Kind::intersection:
      for (const auto& p : s.parts) flatten_into(p, f);
      return;
  }
}

double row_scale(const MatrixXd& A, int r, const VectorXd& z, double b) {
  return 1.0 + std::abs(b) + A.row(r).cwiseAbs().dot(z.cwiseAbs());
}

MatrixXd symmetrized(const MatrixXd& Q) { return 0.5 * (Q + Q.transpose()); }

qp::SpMat sparse(const MatrixXd& M) {
  return M.sparseView();
}

// Same function in new variables: z_old = S z_new, with new bounds supplied.
StructuredConvex change_vars(const StructuredConvex& f, const MatrixXd& S, const VectorXd& lo, const VectorXd& hi) {
  const FlatSet& o = f.flat();
  FlatSet n;
  n.lo = lo;
  n.hi = hi;
  n.Aeq = o.Aeq * S;
  n.beq = o.beq;
  n.Ain = o.Ain * S;
  n.bin = o.bin;
  return StructuredConvex::derived(S.transpose() * f.quad() * S, S.transpose() * f.lin(), f.constant(), n);
}

StructuredConvex reorder(const StructuredConvex& f, const std::vector<int>& order) {
  const int d = f.dim();
  MatrixXd S = MatrixXd::Zero(d, d);
  VectorXd lo(d), hi(d);
  for (int j = 0; j < d; ++j) {
    S(order[j], j) = 1.0;
    lo(j) = f.flat().lo(order[j]);
    hi(j) = f.flat().hi(order[j]);
  }
  return change_vars(f, S, lo, hi);
}

// Freeze coordinates idx at values; remaining coordinates keep their order.
StructuredConvex substitute(const StructuredConvex& f, const std::vector<int>& idx, const VectorXd& values) {
  const int d = f.dim();
  std::vector<char> is_fixed(d, 0);
  VectorXd full = VectorXd::Zero(d);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    require(idx[k] >= 0 && idx[k] < d, "fixed index out of range");
    is_fixed[idx[k]] = 1;
    full(idx[k]) = values(k);
  }
  std::vector<int> rest;
  for (int i = 0; i < d; ++i)
    if (!is_fixed[i]) rest.push_back(i);
  const int r = static_cast<int>(rest.size());
  const FlatSet& o = f.flat();
  MatrixXd Q(r, r);
  VectorXd l(r), lo(r), hi(r);
  const VectorXd Qv = f.quad() * full;
  for (int a = 0; a < r; ++a) {
    for (int b = 0; b < r; ++b) Q(a, b) = f.quad()(rest[a], rest[b]);
    l(a) = f.lin()(rest[a]) + 2.0 * Qv(rest[a]);
    lo(a) = o.lo(rest[a]);
    hi(a) = o.hi(rest[a]);
  }
  const double c = f.constant() + full.dot(Qv) + f.lin().dot(full);
  FlatSet n;
  n.lo = lo;
  n.hi = hi;
  n.Aeq.resize(o.Aeq.rows(), r);
  n.Ain.resize(o.Ain.rows(), r);
  for (int a = 0; a < r; ++a) {
    n.Aeq.col(a) = o.Aeq.col(rest[a]);
    n.Ain.col(a) = o.Ain.col(rest[a]);
  }
  n.beq = o.beq - o.Aeq * full;
  n.bin = o.bin - o.Ain * full;
  bool bounds_ok = true;
  for (int i : idx) {
    const double tl = kFeasTol * (1.0 + std::abs(o.lo(i)));
    const double th = kFeasTol * (1.0 + std::abs(o.hi(i)));
    if (full(i) < o.lo(i) - tl || full(i) > o.hi(i) + th) bounds_ok = false;
  }
  if (!bounds_ok) {
    // Empty section: an inconsistent row keeps the representation explicit.
    n.Aeq.conservativeResize(n.Aeq.rows() + 1, r);
    n.Aeq.row(n.Aeq.rows() - 1).setZero();
    n.beq.conservativeResize(n.beq.size() + 1);
    n.beq(n.beq.size() - 1) = 1.0;
  }
  return StructuredConvex::derived(Q, l, c, n);
}

}  // namespace

SetDescriptor SetDescriptor::all() { return {}; }

SetDescriptor SetDescriptor::box(VectorXd lower, VectorXd upper) {
  require(lower.size() == upper.size(), "box bounds differ in size");
  for (int i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i))) throw std::invalid_argument("box bound is NaN");
    if (lower(i) > upper(i)) {
      std::ostringstream os;
      os << "box coordinate " << i << " has lower " << lower(i) << " above upper " << upper(i);
      throw std::invalid_argument(os.str());
    }
  }
  SetDescriptor s;
  s.kind = Kind::box;
  s.lower = std::move(lower);
  s.upper = std::move(upper);
  return s;
}

SetDescriptor SetDescriptor::affine(MatrixXd A, VectorXd b) {
  require(A.rows() == b.size(), "affine system rows and rhs differ");
  if (A.rows() > 0) {
    const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
    const VectorXd z = cod.solve(b);
    const double res = (A * z - b).cwiseAbs().maxCoeff();
    if (res > 1e-9) {
      std::ostringstream os;
      os << "affine system is inconsistent (least-squares residual " << res << ")";
      throw std::invalid_argument(os.str());
    }
  }
  SetDescriptor s;
  s.kind = Kind::affine;
  s.A = std::move(A);
  s.b = std::move(b);
  return s;
}

SetDescriptor SetDescriptor::polyhedron(MatrixXd A, VectorXd b) {
  require(A.rows() == b.size(), "polyhedron rows and rhs differ");
  SetDescriptor s;
  s.kind = Kind::polyhedron;
  s.A = std::move(A);
  s.b = std::move(b);
  return s;
}

SetDescriptor SetDescriptor::intersection(std::vector<SetDescriptor> parts) {
  SetDescriptor s;
  s.kind = Kind::intersection;
  s.parts = std::move(parts);
  return s;
}

FlatSet flatten(const SetDescriptor& s, int dim) {
  FlatSet f;
  f.lo = VectorXd::Constant(dim, -kInf);
  f.hi = VectorXd::Constant(dim, kInf);
  f.Aeq.resize(0, dim);
  f.beq.resize(0);
  f.Ain.resize(0, dim);
  f.bin.resize(0);
  flatten_into(s, f);
  for (int i = 0; i < dim; ++i)
    if (f.lo(i) > f.hi(i)) throw std::invalid_argument("domain boxes have empty intersection");
  return f;
}

double FlatSet::violation(const VectorXd& z) const {
  if (z.size() != dim()) throw std::invalid_argument("point has wrong dimension");
  double v = 0.0;
  for (int i = 0; i < dim(); ++i) {
    if (std::isfinite(lo(i))) v = std::max(v, (lo(i) - z(i)) / (1.0 + std::abs(lo(i))));
    if (std::isfinite(hi(i))) v = std::max(v, (z(i) - hi(i)) / (1.0 + std::abs(hi(i))));
  }
  for (int r = 0; r < Aeq.rows(); ++r)
    v = std::max(v, std::abs(Aeq.row(r).dot(z) - beq(r)) / row_scale(Aeq, r, z, beq(r)));
  for (int r = 0; r < Ain.rows(); ++r)
    v = std::max(v, (Ain.row(r).dot(z) - bin(r)) / row_scale(Ain, r, z, bin(r)));
  return v;
}

SetDescriptor FlatSet::descriptor() const {
  std::vector<SetDescriptor> parts;
  bool boxed = false;
  for (int i = 0; i < dim(); ++i)
    if (std::isfinite(lo(i)) || std::isfinite(hi(i))) boxed = true;
  if (boxed) parts.push_back(SetDescriptor::box(lo, hi));
  if (Aeq.rows() > 0) {
    SetDescriptor a;
    a.kind = SetDescriptor::Kind::affine;
    a.A = Aeq;
    a.b = beq;
    parts.push_back(a);
  }
  if (Ain.rows() > 0) parts.push_back(SetDescriptor::polyhedron(Ain, bin));
  if (parts.empty()) return SetDescriptor::all();
  if (parts.size() == 1) return parts.front();
  return SetDescriptor::intersection(std::move(parts));
}

StructuredConvex::StructuredConvex(MatrixXd quad, VectorXd lin, double constant, SetDescriptor domain) {
  const int d = static_cast<int>(quad.rows());
  require(quad.cols() == d, "quad must be square");
  if (lin.size() == 0) lin = VectorXd::Zero(d);
  require(lin.size() == d, "lin has wrong dimension");
  require(std::isfinite(constant), "const must be finite");
  require(quad.allFinite() && lin.allFinite(), "quad and lin must be finite");
  const double asym = d > 0 ? (quad - quad.transpose()).cwiseAbs().maxCoeff() : 0.0;
  const double qmax = d > 0 ? quad.cwiseAbs().maxCoeff() : 0.0;
  require(asym <= 1e-10 * (1.0 + qmax), "quad must be symmetric");
  quad_ = symmetrized(quad);
  if (d > 0) {
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(quad_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) {
      std::ostringstream os;
      os << "quad is not positive semidefinite (min eigenvalue " << es.eigenvalues().minCoeff() << ")";
      throw std::invalid_argument(os.str());
    }
  }
  lin_ = std::move(lin);
  const_ = constant;
  flat_ = flatten(domain, d);
  if (!flat_.box_only()) {
    qp::Problem p = qp::Problem::empty(d);
    p.A = sparse(flat_.Aeq);
    p.b = flat_.beq;
    p.G = sparse(flat_.Ain);
    p.h = flat_.bin;
    p.lo = flat_.lo;
    p.hi = flat_.hi;
    const qp::Solution s = qp::solve(p);
    if (s.status == qp::Status::infeasible) throw std::invalid_argument("domain is empty");
  }
}

StructuredConvex StructuredConvex::derived(MatrixXd quad, VectorXd lin, double constant, FlatSet domain) {
  StructuredConvex f;
  f.quad_ = symmetrized(quad);
  f.lin_ = std::move(lin);
  f.const_ = constant;
  f.flat_ = std::move(domain);
  return f;
}

StructuredConvex StructuredConvex::zero(int dim) {
  return StructuredConvex(MatrixXd::Zero(dim, dim), VectorXd::Zero(dim), 0.0, SetDescriptor::all());
}

StructuredConvex StructuredConvex::quadratic(MatrixXd quad, VectorXd lin, double constant) {
  return StructuredConvex(std::move(quad), std::move(lin), constant, SetDescriptor::all());
}

StructuredConvex StructuredConvex::indicator(SetDescriptor domain, int dim) {
  return StructuredConvex(MatrixXd::Zero(dim, dim), VectorXd::Zero(dim), 0.0, std::move(domain));
}

bool StructuredConvex::quad_diagonal() const {
  const int d = dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && quad_(i, j) != 0.0) return false;
  return true;
}

qp::Problem StructuredConvex::to_qp() const {
  qp::Problem p = qp::Problem::empty(dim());
  p.H = sparse(2.0 * quad_);
  p.c = lin_;
  p.c0 = const_;
  p.A = sparse(flat_.Aeq);
  p.b = flat_.beq;
  p.G = sparse(flat_.Ain);
  p.h = flat_.bin;
  p.lo = flat_.lo;
  p.hi = flat_.hi;
  return p;
}

EvalResult eval_subgrad(const StructuredConvex& f, const VectorXd& z) {
  EvalResult r;
  if (!f.contains(z)) {
    r.value = ExtReal::pos_inf();
    return r;
  }
  r.value = f.smooth_value(z);
  r.subgrad = VectorXd(2.0 * f.quad() * z + f.lin());
  const FlatSet& s = f.flat();
  for (int i = 0; i < f.dim(); ++i) {
    if (std::isfinite(s.lo(i)) && z(i) - s.lo(i) <= kFeasTol * (1.0 + std::abs(s.lo(i)))) r.active_lower.push_back(i);
    if (std::isfinite(s.hi(i)) && s.hi(i) - z(i) <= kFeasTol * (1.0 + std::abs(s.hi(i)))) r.active_upper.push_back(i);
  }
  for (int k = 0; k < s.Ain.rows(); ++k)
    if (s.bin(k) - s.Ain.row(k).dot(z) <= kFeasTol * row_scale(s.Ain, k, z, s.bin(k))) r.active_rows.push_back(k);
  return r;
}

ExtReal eval(const StructuredConvex& f, const VectorXd& z) {
  if (!f.contains(z)) return ExtReal::pos_inf();
  return f.smooth_value(z);
}

ConjResult conjugate(const StructuredConvex& f, const VectorXd& y) {
  require(y.size() == f.dim(), "conjugate: point has wrong dimension");
  ConjResult out;
  const FlatSet& s = f.flat();
  if (s.box_only() && f.quad_diagonal()) {
    // Separable: coordinatewise sup of r z - q z^2 over [lo, hi].
    VectorXd z(f.dim());
    double val = 0.0 - f.constant();
    for (int i = 0; i < f.dim(); ++i) {
      const double r = y(i) - f.lin()(i);
      const double q = f.quad()(i, i);
      const double lo = s.lo(i), hi = s.hi(i);
      if (q > 0.0) {
        z(i) = std::clamp(r / (2.0 * q), lo, hi);
      } else {
        const bool tiny = std::abs(r) <= kFeasTol * (1.0 + std::abs(y(i)) + std::abs(f.lin()(i)));
        if (r > 0.0 && std::isfinite(hi)) z(i) = hi;
        else if (r < 0.0 && std::isfinite(lo)) z(i) = lo;
        else if (r == 0.0 || tiny) z(i) = std::clamp(0.0, lo, hi);
        else {
          out.value = ExtReal::pos_inf();
          out.unbounded = true;
          return out;
        }
      }
      val += r * z(i) - q * z(i) * z(i);
    }
    out.value = val;
    out.argmax = z;
    return out;
  }
  qp::Problem p = f.to_qp();
  p.c -= y;
  const qp::Solution sol = qp::solve(p);
  switch (sol.status) {
    case qp::Status::optimal:
      out.value = -sol.value;
      out.argmax = sol.w;
      return out;
    case qp::Status::unbounded:
      out.value = ExtReal::pos_inf();
      out.unbounded = true;
      return out;
    case qp::Status::infeasible:
      out.value = ExtReal::neg_inf();
      return out;
    default:
      throw std::runtime_error("conjugate: inner maximization did not converge");
  }
}

VectorXd prox(const StructuredConvex& f, const VectorXd& z, double step) {
  require(step > 0.0, "prox step must be positive");
  require(z.size() == f.dim(), "prox: point has wrong dimension");
  const FlatSet& s = f.flat();
  if (s.box_only() && f.quad_diagonal()) {
    VectorXd w(f.dim());
    for (int i = 0; i < f.dim(); ++i) {
      const double u = (z(i) / step - f.lin()(i)) / (2.0 * f.quad()(i, i) + 1.0 / step);
      w(i) = std::clamp(u, s.lo(i), s.hi(i));
    }
    return w;
  }
  qp::Problem p = f.to_qp();
  const int d = f.dim();
  p.H = sparse(2.0 * f.quad() + MatrixXd::Identity(d, d) / step);
  p.c = f.lin() - z / step;
  const qp::Solution sol = qp::solve(p);
  if (sol.status != qp::Status::optimal) throw std::runtime_error("prox: subproblem did not converge");
  return sol.w;
}

ProjectResult inf_project(const StructuredConvex& f, const std::vector<int>& kept, const VectorXd& kept_point) {
  const int d = f.dim();
  require(static_cast<int>(kept.size()) == kept_point.size(), "inf_project: kept point has wrong dimension");
  std::vector<int> where(d, -1);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    require(kept[k] >= 0 && kept[k] < d && where[kept[k]] == -1, "inf_project: split is not a partition");
    where[kept[k]] = static_cast<int>(k);
  }
  std::vector<int> elim;
  for (int i = 0; i < d; ++i)
    if (where[i] == -1) elim.push_back(i);
  const int ne = static_cast<int>(elim.size());
  const int nk = static_cast<int>(kept.size());
  ProjectResult out;

  if (ne == 0) {
    VectorXd z(d);
    for (int k = 0; k < nk; ++k) z(kept[k]) = kept_point(k);
    const EvalResult e = eval_subgrad(f, z);
    out.value = e.value;
    if (e.subgrad) {
      VectorXd g(nk);
      for (int k = 0; k < nk; ++k) g(k) = (*e.subgrad)(kept[k]);
      out.subgrad = g;
      out.minimizer = VectorXd::Zero(0);
    }
    return out;
  }

  const FlatSet& s = f.flat();
  VectorXd full = VectorXd::Zero(d);
  for (int k = 0; k < nk; ++k) full(kept[k]) = kept_point(k);
  for (int k = 0; k < nk; ++k) {
    const int i = kept[k];
    if (kept_point(k) < s.lo(i) - kFeasTol * (1.0 + std::abs(s.lo(i))) ||
        kept_point(k) > s.hi(i) + kFeasTol * (1.0 + std::abs(s.hi(i)))) {
      out.value = ExtReal::pos_inf();
      return out;
    }
  }

  // Rows that involve no eliminated coordinate are checked directly.
  auto split_rows = [&](const MatrixXd& A, const VectorXd& b, bool equality, std::vector<int>& coupled) {
    for (int r = 0; r < A.rows(); ++r) {
      bool touches = false;
      for (int i : elim)
        if (A(r, i) != 0.0) touches = true;
      if (touches) {
        coupled.push_back(r);
        continue;
      }
      const double res = A.row(r).dot(full) - b(r);
      const double scale = row_scale(A, r, full, b(r));
      if ((equality ? std::abs(res) : res) > kFeasTol * scale) return false;
    }
    return true;
  };
  std::vector<int> eq_rows, in_rows;
  if (!split_rows(s.Aeq, s.beq, true, eq_rows) || !split_rows(s.Ain, s.bin, false, in_rows)) {
    out.value = ExtReal::pos_inf();
    return out;
  }

  const VectorXd Qk = f.quad() * full;
  qp::Problem p = qp::Problem::empty(ne);
  MatrixXd He(ne, ne);
  for (int a = 0; a < ne; ++a) {
    for (int b = 0; b < ne; ++b) He(a, b) = 2.0 * f.quad()(elim[a], elim[b]);
    p.c(a) = f.lin()(elim[a]) + 2.0 * Qk(elim[a]);
    p.lo(a) = s.lo(elim[a]);
    p.hi(a) = s.hi(elim[a]);
  }
  p.H = sparse(He);
  p.c0 = full.dot(Qk) + f.lin().dot(full) + f.constant();
  MatrixXd Ae(eq_rows.size(), ne), Ge(in_rows.size(), ne);
  p.b.resize(eq_rows.size());
  p.h.resize(in_rows.size());
  for (std::size_t r = 0; r < eq_rows.size(); ++r) {
    for (int a = 0; a < ne; ++a) Ae(r, a) = s.Aeq(eq_rows[r], elim[a]);
    p.b(r) = s.beq(eq_rows[r]) - s.Aeq.row(eq_rows[r]).dot(full);
  }
  for (std::size_t r = 0; r < in_rows.size(); ++r) {
    for (int a = 0; a < ne; ++a) Ge(r, a) = s.Ain(in_rows[r], elim[a]);
    p.h(r) = s.bin(in_rows[r]) - s.Ain.row(in_rows[r]).dot(full);
  }
  p.A = sparse(Ae);
  p.G = sparse(Ge);
  qp::Options o;
  for (int a = 0; a < ne; ++a) o.least_norm.push_back(a);
  const qp::Solution sol = qp::solve(p, o);
  switch (sol.status) {
    case qp::Status::infeasible:
      out.value = ExtReal::pos_inf();
      return out;
    case qp::Status::unbounded:
      out.value = ExtReal::neg_inf();
      out.neg_inf = true;
      return out;
    case qp::Status::max_iter:
      throw std::runtime_error("inf_project: inner minimization did not converge");
    case qp::Status::optimal:
      break;
  }
  out.value = sol.value;
  out.minimizer = sol.w;
  // Envelope subgradient: gradient in the kept block of the Lagrangian.
  VectorXd z = full;
  for (int a = 0; a < ne; ++a) z(elim[a]) = sol.w(a);
  VectorXd gfull = 2.0 * f.quad() * z + f.lin();
  for (std::size_t r = 0; r < eq_rows.size(); ++r) gfull += sol.y_eq(r) * s.Aeq.row(eq_rows[r]).transpose();
  for (std::size_t r = 0; r < in_rows.size(); ++r) gfull += sol.y_in(r) * s.Ain.row(in_rows[r]).transpose();
  VectorXd g(nk);
  for (int k = 0; k < nk; ++k) g(k) = gfull(kept[k]);
  out.subgrad = g;
  return out;
}

double fy_residual(const StructuredConvex& f, const VectorXd& z, const VectorXd& y) {
  const ExtReal v = eval(f, z);
  if (!v.finite()) throw std::domain_error("fy_residual: f(z) is +inf");
  const ConjResult c = conjugate(f, y);
  if (!c.value.finite()) return c.value.as_double();
  return v.value() + c.value.value() - z.dot(y);
}

ProjectedConvex::ProjectedConvex(StructuredConvex phi, int kept) : phi_(std::move(phi)), kept_(kept) {
  require(kept_ >= 0 && kept_ <= phi_.dim(), "kept block exceeds function dimension");
}

ProjectedConvex::ProjectedConvex(StructuredConvex f) : phi_(std::move(f)), kept_(phi_.dim()) {}

ProjectResult ProjectedConvex::evaluate(const VectorXd& y) const {
  require(y.size() == kept_, "evaluate: point has wrong dimension");
  std::vector<int> kept(kept_);
  for (int i = 0; i < kept_; ++i) kept[i] = i;
  return inf_project(phi_, kept, y);
}

ConjResult ProjectedConvex::conjugate(const VectorXd& y) const {
  require(y.size() == kept_, "conjugate: point has wrong dimension");
  if (lifted() == 0) return convexcalc::conjugate(phi_, y);
  qp::Problem p = phi_.to_qp();
  p.c.head(kept_) -= y;
  const qp::Solution sol = qp::solve(p);
  ConjResult out;
  switch (sol.status) {
    case qp::Status::optimal:
      out.value = -sol.value;
      out.argmax = VectorXd(sol.w.head(kept_));
      return out;
    case qp::Status::unbounded:
      out.value = ExtReal::pos_inf();
      out.unbounded = true;
      return out;
    case qp::Status::infeasible:
      out.value = ExtReal::neg_inf();
      return out;
    default:
      throw std::runtime_error("conjugate: inner maximization did not converge");
  }
}

ProjectedConvex ProjectedConvex::conjugate_function() const {
  // phi*(yhat) = inf { t't + beq'l + bin'm + hi'a - lo'b - c0 :
  //   2Ft + Aeq'l + Ain'm + a - b = yhat - lin, m, a, b >= 0 },
  // with Q = FF' and yhat = (y, 0) on the lifted block. Factoring Q keeps
  // rounding from turning a singular Q into an ill-conditioned one.
  const FlatSet& fs = phi_.flat();
  const int d = phi_.dim();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(phi_.quad()));
  const double top = d > 0 ? es.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
  std::vector<int> rank_cols;
  for (int i = 0; i < d; ++i)
    if (es.eigenvalues()(i) > 1e-12 * top) rank_cols.push_back(i);
  const int r = static_cast<int>(rank_cols.size());
  MatrixXd F(d, r);
  for (int j = 0; j < r; ++j)
    F.col(j) = es.eigenvectors().col(rank_cols[j]) * std::sqrt(es.eigenvalues()(rank_cols[j]));
  const int me = static_cast<int>(fs.Aeq.rows());
  const int mi = static_cast<int>(fs.Ain.rows());
  std::vector<int> fin_hi, fin_lo;
  for (int i = 0; i < d; ++i) {
    if (std::isfinite(fs.hi(i))) fin_hi.push_back(i);
    if (std::isfinite(fs.lo(i))) fin_lo.push_back(i);
  }
  const int na = static_cast<int>(fin_hi.size()), nb = static_cast<int>(fin_lo.size());
  const int k = kept_;
  const int os = k, ol = os + r, om = ol + me, oa = om + mi, ob = oa + na, N = ob + nb;
  MatrixXd Q = MatrixXd::Zero(N, N);
  Q.block(os, os, r, r).setIdentity();
  VectorXd lin = VectorXd::Zero(N);
  lin.segment(ol, me) = fs.beq;
  lin.segment(om, mi) = fs.bin;
  for (int j = 0; j < na; ++j) lin(oa + j) = fs.hi(fin_hi[j]);
  for (int j = 0; j < nb; ++j) lin(ob + j) = -fs.lo(fin_lo[j]);
  FlatSet n;
  n.lo = VectorXd::Constant(N, -kInf);
  n.hi = VectorXd::Constant(N, kInf);
  n.lo.segment(om, N - om).setZero();
  n.Aeq = MatrixXd::Zero(d, N);
  n.Aeq.block(0, os, d, r) = 2.0 * F;
  if (me > 0) n.Aeq.block(0, ol, d, me) = fs.Aeq.transpose();
  if (mi > 0) n.Aeq.block(0, om, d, mi) = fs.Ain.transpose();
  for (int j = 0; j < na; ++j) n.Aeq(fin_hi[j], oa + j) = 1.0;
  for (int j = 0; j < nb; ++j) n.Aeq(fin_lo[j], ob + j) = -1.0;
  for (int i = 0; i < k; ++i) n.Aeq(i, i) = -1.0;
  n.beq = -phi_.lin();
  n.Ain.resize(0, N);
  n.bin.resize(0);
  return ProjectedConvex(StructuredConvex::derived(Q, lin, -phi_.constant(), n), k);
}

ProjectedConvex ProjectedConvex::signed_permuted(const std::vector<int>& perm, const VectorXd& signs) const {
  require(static_cast<int>(perm.size()) == kept_ && signs.size() == kept_, "signed permutation has wrong size");
  const int d = phi_.dim();
  MatrixXd S = MatrixXd::Zero(d, d);
  VectorXd lo(d), hi(d);
  std::vector<char> seen(kept_, 0);
  const FlatSet& fs = phi_.flat();
  for (int i = 0; i < kept_; ++i) {
    const int o = perm[i];
    require(o >= 0 && o < kept_ && !seen[o], "not a permutation");
    require(signs(i) == 1.0 || signs(i) == -1.0, "signs must be +-1");
    seen[o] = 1;
    S(o, i) = signs(i);
    if (signs(i) > 0) {
      lo(i) = fs.lo(o);
      hi(i) = fs.hi(o);
    } else {
      lo(i) = -fs.hi(o);
      hi(i) = -fs.lo(o);
    }
  }
  for (int j = kept_; j < d; ++j) {
    S(j, j) = 1.0;
    lo(j) = fs.lo(j);
    hi(j) = fs.hi(j);
  }
  return ProjectedConvex(change_vars(phi_, S, lo, hi), kept_);
}

ProjectedConvex ProjectedConvex::fixed(const std::vector<int>& idx, const VectorXd& values) const {
  require(static_cast<int>(idx.size()) == values.size(), "fixed: values have wrong size");
  for (int i : idx) require(i >= 0 && i < kept_, "fixed: index outside kept block");
  return ProjectedConvex(substitute(phi_, idx, values), kept_ - static_cast<int>(idx.size()));
}

ProjectedConvex ProjectedConvex::tilted(const VectorXd& a) const {
  require(a.size() == kept_, "tilt has wrong dimension");
  VectorXd lin = phi_.lin();
  lin.head(kept_) += a;
  return ProjectedConvex(StructuredConvex::derived(phi_.quad(), lin, phi_.constant(), phi_.flat()), kept_);
}

ProjectedConvex ProjectedConvex::eliminated(const std::vector<int>& idx) const {
  std::vector<char> drop(kept_, 0);
  for (int i : idx) {
    require(i >= 0 && i < kept_, "eliminated: index outside kept block");
    drop[i] = 1;
  }
  std::vector<int> order;
  for (int i = 0; i < kept_; ++i)
    if (!drop[i]) order.push_back(i);
  const int nk = static_cast<int>(order.size());
  for (int i = 0; i < kept_; ++i)
    if (drop[i]) order.push_back(i);
  for (int j = kept_; j < phi_.dim(); ++j) order.push_back(j);
  return ProjectedConvex(reorder(phi_, order), nk);
}

double fy_residual(const ProjectedConvex& f, const VectorXd& z, const VectorXd& y) {
  const ExtReal v = f.value(z);
  if (!v.finite()) throw std::domain_error("fy_residual: function is not finite at the point");
  const ConjResult c = f.conjugate(y);
  if (!c.value.finite()) return c.value.as_double();
  return v.value() + c.value.value() - z.dot(y);
}

std::pair<double, double> saddle_subgrad_check(const ProjectedConvex& h_p, const ProjectedConvex& negh_x,
                                               const VectorXd& x, const VectorXd& p, const VectorXd& a,
                                               const VectorXd& v) {
  return {fy_residual(h_p, p, v), fy_residual(negh_x, x, -a)};
}

}  // namespace sbolza::convexcalc
