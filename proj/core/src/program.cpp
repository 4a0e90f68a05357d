#include "sbolza/program.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sbolza::program {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Layout {
  std::vector<int> y_off, u_off, link_row;
  int nw = 0;
};

struct Lifted {
  qp::Problem qp;
  Layout lay;
};

void add_dense(qp::Triplets& t, const Eigen::MatrixXd& M, int r0, int c0, double scale = 1.0) {
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      if (M(i, j) != 0.0) t.emplace_back(r0 + i, c0 + j, scale * M(i, j));
}

Lifted lift(const Program& prog) {
  Lifted L;
  Layout& lay = L.lay;
  int nw = prog.nz;
  for (const Term& term : prog.terms) {
    if (!term.fn) throw std::invalid_argument("program term without function");
    if (term.K.rows() != term.fn->dim() || term.K.cols() != prog.nz || term.offset.size() != term.fn->dim())
      throw std::invalid_argument("program term has inconsistent shapes");
    if (!(term.weight > 0.0)) throw std::invalid_argument("program term weight must be positive");
    lay.y_off.push_back(nw);
    lay.u_off.push_back(nw + term.fn->dim());
    nw += term.fn->phi().dim();
  }
  lay.nw = nw;

  qp::Problem& p = L.qp;
  p = qp::Problem::empty(nw);
  if (prog.tilt.size() == prog.nz) p.c.head(prog.nz) = prog.tilt;
  p.c0 = prog.constant;
  qp::Triplets th, ta, tg;
  std::vector<double> b, h;
  const int m0 = static_cast<int>(prog.deq.size());
  if (m0 > 0 && (prog.Ceq.rows() != m0 || prog.Ceq.cols() != prog.nz))
    throw std::invalid_argument("program constraint has inconsistent shapes");
  for (int k = 0; k < prog.Ceq.outerSize(); ++k)
    for (qp::SpMat::InnerIterator it(prog.Ceq, k); it; ++it) ta.emplace_back(it.row(), it.col(), it.value());
  for (int r = 0; r < m0; ++r) b.push_back(prog.deq(r));

  int row = m0, grow = 0;
  for (std::size_t i = 0; i < prog.terms.size(); ++i) {
    const Term& term = prog.terms[i];
    const auto& phi = term.fn->phi();
    const auto& fs = phi.flat();
    const int k = term.fn->dim();
    const int d = phi.dim();
    const int y0 = lay.y_off[i];
    add_dense(th, phi.quad(), y0, y0, 2.0 * term.weight);
    p.c.segment(y0, d) += term.weight * phi.lin();
    p.c0 += term.weight * phi.constant();
    p.lo.segment(y0, d) = fs.lo;
    p.hi.segment(y0, d) = fs.hi;
    // y_i - K_i z = offset_i
    lay.link_row.push_back(row);
    for (int r = 0; r < k; ++r) ta.emplace_back(row + r, y0 + r, 1.0);
    for (int kk = 0; kk < term.K.outerSize(); ++kk)
      for (qp::SpMat::InnerIterator it(term.K, kk); it; ++it) ta.emplace_back(row + it.row(), it.col(), -it.value());
    for (int r = 0; r < k; ++r) b.push_back(term.offset(r));
    row += k;
    add_dense(ta, fs.Aeq, row, y0);
    for (int r = 0; r < fs.beq.size(); ++r) b.push_back(fs.beq(r));
    row += static_cast<int>(fs.Aeq.rows());
    add_dense(tg, fs.Ain, grow, y0);
    for (int r = 0; r < fs.bin.size(); ++r) h.push_back(fs.bin(r));
    grow += static_cast<int>(fs.Ain.rows());
  }
  p.H.setFromTriplets(th.begin(), th.end());
  p.A.resize(row, nw);
  p.A.setFromTriplets(ta.begin(), ta.end());
  p.b = Eigen::Map<VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  p.G.resize(grow, nw);
  p.G.setFromTriplets(tg.begin(), tg.end());
  p.h = Eigen::Map<VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
  return L;
}

double qp_objective(const qp::Problem& p, const VectorXd& w) { return 0.5 * w.dot(p.H * w) + p.c.dot(w) + p.c0; }

}  // namespace

Result solve(const Program& prog, const Options& opts) {
  const Lifted L = lift(prog);
  const qp::Problem& base = L.qp;
  const int nw = L.lay.nw;
  Result res;
  qp::Options qo;
  qo.tol = opts.tol;
  qo.max_iter = opts.max_iter;

  VectorXd w = VectorXd::Zero(nw);
  bool have_point = false;
  qp::SpMat I(nw, nw);
  I.setIdentity();
  for (int k = 0; k < opts.prox_steps; ++k) {
    const double mu = std::pow(10.0, k);
    qp::Problem pk = base;
    pk.H = base.H + I / mu;
    pk.c = base.c - w / mu;
    if (have_point) qo.warm = &w;
    const qp::Solution s = qp::solve(pk, qo);
    res.iterations += s.iterations;
    if (s.status == qp::Status::infeasible) {
      res.status = qp::Status::infeasible;
      res.value = ExtReal::pos_inf();
      res.feasibility = s.infeasibility;
      return res;
    }
    if (s.status != qp::Status::optimal) break;
    w = s.w;
    have_point = true;
    res.trace.push_back(qp_objective(base, w));
  }

  qo.warm = have_point ? &w : nullptr;
  const qp::Solution s = qp::solve(base, qo);
  res.iterations += s.iterations;
  res.status = s.status;
  res.stationarity = s.dual_residual;
  res.feasibility = s.primal_residual;
  if (s.status == qp::Status::infeasible) {
    res.value = ExtReal::pos_inf();
    res.feasibility = s.infeasibility;
    return res;
  }
  if (s.status == qp::Status::unbounded) {
    res.value = ExtReal::neg_inf();
    res.z = s.ray.head(prog.nz);
    return res;
  }
  res.value = s.value;
  res.trace.push_back(s.value);
  res.z = s.w.head(prog.nz);
  const int m0 = static_cast<int>(prog.deq.size());
  res.eq_mult = s.y_eq.head(m0);
  for (std::size_t i = 0; i < prog.terms.size(); ++i) {
    const int k = prog.terms[i].fn->dim();
    res.term_args.push_back(s.w.segment(L.lay.y_off[i], k));
    res.term_subgrads.push_back(-s.y_eq.segment(L.lay.link_row[i], k) / prog.terms[i].weight);
  }
  return res;
}

ExtReal objective(const Program& prog, const VectorXd& z) {
  if (z.size() != prog.nz) throw std::invalid_argument("objective: z has wrong size");
  if (prog.deq.size() > 0) {
    const VectorXd r = prog.Ceq * z - prog.deq;
    if (r.cwiseAbs().maxCoeff() > 1e-9 * (1.0 + prog.deq.cwiseAbs().maxCoeff())) return ExtReal::pos_inf();
  }
  double acc = prog.constant + (prog.tilt.size() == prog.nz ? prog.tilt.dot(z) : 0.0);
  for (const Term& term : prog.terms) {
    const ExtReal v = term.fn->value(term.K * z + term.offset);
    if (v.is_pos_inf()) return ExtReal::pos_inf();
    if (v.is_neg_inf()) return ExtReal::neg_inf();
    acc += term.weight * v.value();
  }
  return acc;
}

}  // namespace sbolza::program
