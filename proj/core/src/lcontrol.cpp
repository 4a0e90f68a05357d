#include "sbolza/lcontrol.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sbolza::lcontrol {

namespace {

using convexcalc::FlatSet;
using convexcalc::ProjectedConvex;
using probspace::Schedule;
using probspace::ScenarioTree;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::vector<int> iota(int from, int count) {
  std::vector<int> idx(count);
  for (int i = 0; i < count; ++i) idx[i] = from + i;
  return idx;
}

// Constraint system of `fs` (over the coordinates `idx`) lifted to `dim`.
void embed(const FlatSet& fs, const std::vector<int>& idx, int dim, std::vector<SetDescriptor>& parts) {
  VectorXd lo = VectorXd::Constant(dim, -kInf), hi = VectorXd::Constant(dim, kInf);
  bool boxed = false;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    lo(idx[i]) = fs.lo(i);
    hi(idx[i]) = fs.hi(i);
    boxed = boxed || std::isfinite(fs.lo(i)) || std::isfinite(fs.hi(i));
  }
  if (boxed) parts.push_back(SetDescriptor::box(lo, hi));
  auto lift = [&](const MatrixXd& M) {
    MatrixXd out = MatrixXd::Zero(M.rows(), dim);
    for (std::size_t i = 0; i < idx.size(); ++i) out.col(idx[i]) = M.col(i);
    return out;
  };
  if (fs.Aeq.rows() > 0) {
    SetDescriptor a;
    a.kind = SetDescriptor::Kind::affine;
    a.A = lift(fs.Aeq);
    a.b = fs.beq;
    parts.push_back(a);
  }
  if (fs.Ain.rows() > 0) parts.push_back(SetDescriptor::polyhedron(lift(fs.Ain), fs.bin));
}

// Phi over (x, v, u) for the stage cost l_k and noise value w.
StructuredConvex make_phi(const LCProblem& lc, int k, const VectorXd& w) {
  const int n = lc.n, m = lc.m, d = 2 * n + m;
  const StructuredConvex& l = lc.stage_costs[k];
  std::vector<int> xu = iota(0, n);
  for (int i = 0; i < m; ++i) xu.push_back(2 * n + i);
  MatrixXd Q = MatrixXd::Zero(d, d);
  VectorXd lin = VectorXd::Zero(d);
  for (int i = 0; i < n + m; ++i) {
    lin(xu[i]) = l.lin()(i);
    for (int j = 0; j < n + m; ++j) Q(xu[i], xu[j]) = l.quad()(i, j);
  }
  std::vector<SetDescriptor> parts;
  embed(l.flat(), xu, d, parts);
  embed(convexcalc::flatten(lc.mixed[k], n + m), xu, d, parts);
  embed(convexcalc::flatten(lc.controls[k], m), iota(2 * n, m), d, parts);
  embed(convexcalc::flatten(lc.states[k], n), iota(0, n), d, parts);
  // (A - I) x - v + B u = -w
  MatrixXd dyn(n, d);
  dyn << lc.A - MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n), lc.B;
  SetDescriptor a;
  a.kind = SetDescriptor::Kind::affine;
  a.A = dyn;
  a.b = -w;
  parts.push_back(a);
  return StructuredConvex(Q, lin, l.constant(), SetDescriptor::intersection(std::move(parts)));
}

// Smallest-norm point of the domain of f.
std::optional<VectorXd> domain_point(const StructuredConvex& f) {
  const FlatSet& fs = f.flat();
  qp::Problem p = qp::Problem::empty(f.dim());
  p.H.setIdentity();
  p.A = fs.Aeq.sparseView();
  p.b = fs.beq;
  p.G = fs.Ain.sparseView();
  p.h = fs.bin;
  p.lo = fs.lo;
  p.hi = fs.hi;
  const qp::Solution s = qp::solve(p);
  if (s.status != qp::Status::optimal) return std::nullopt;
  return s.w;
}

bool in_box(const VectorXd& x, const VectorXd& lo, const VectorXd& hi, double tol = 1e-9) {
  for (int i = 0; i < x.size(); ++i) {
    if (x(i) < lo(i) - tol * (1.0 + std::abs(lo(i))) || x(i) > hi(i) + tol * (1.0 + std::abs(hi(i)))) return false;
  }
  return true;
}

// The control block of l_k plus U_k and D_k, as a function of (x, u).
StructuredConvex control_section(const LCProblem& lc, int k) {
  const int n = lc.n, m = lc.m;
  const StructuredConvex& l = lc.stage_costs[k];
  std::vector<SetDescriptor> parts;
  embed(l.flat(), iota(0, n + m), n + m, parts);
  embed(convexcalc::flatten(lc.mixed[k], n + m), iota(0, n + m), n + m, parts);
  embed(convexcalc::flatten(lc.controls[k], m), iota(n, m), n + m, parts);
  return StructuredConvex(l.quad(), l.lin(), l.constant(), SetDescriptor::intersection(std::move(parts)));
}

double min_eig(const MatrixXd& M) {
  if (M.rows() == 0) return 0.0;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()));
  return es.eigenvalues().minCoeff();
}

Verdict worst(Verdict a, Verdict b) {
  if (a == Verdict::fail || b == Verdict::fail) return Verdict::fail;
  if (a == Verdict::inconclusive || b == Verdict::inconclusive) return Verdict::inconclusive;
  return Verdict::pass;
}

}  // namespace

void LCProblem::validate() const {
  require(n >= 1 && m >= 1, "dimensions must be positive");
  require(A.rows() == n && A.cols() == n, "A must be n x n");
  require(B.rows() == n && B.cols() == m, "B must be n x m");
  require(T > tau, "horizon must contain at least one step");
  const auto H = static_cast<std::size_t>(horizon());
  require(stage_costs.size() == H, "one stage cost per step");
  require(mixed.size() == H && controls.size() == H && states.size() == H, "one constraint set per step");
  require(noise.size() == H, "one noise stage per step");
  for (const auto& l : stage_costs) require(l.dim() == n + m, "stage cost must act on (x, u)");
  require(terminal.dim() == n, "terminal cost must act on x");
  require(xi.size() == n, "xi has wrong dimension");
  const FlatSet x0 = convexcalc::flatten(states[0], n);
  require(x0.lo.allFinite() && x0.hi.allFinite(), "initial state set must be a bounded box");
  for (std::size_t k = 0; k < noise.size(); ++k) {
    VectorXd mean = VectorXd::Zero(n);
    for (const auto& s : noise[k]) {
      require(s.value.size() == n, "noise sample has wrong dimension");
      mean += s.weight * s.value;
    }
    if (mean.cwiseAbs().maxCoeff() > 1e-10) {
      std::ostringstream os;
      os << "noise at step " << tau + static_cast<int>(k) << " has nonzero mean " << mean.cwiseAbs().maxCoeff();
      throw std::invalid_argument(os.str());
    }
  }
  for (const auto& s : gamma) require(s.value.size() == n, "initial information sample has wrong dimension");
}

MatrixXd LCProblem::noise_covariance(int t) const {
  const auto& st = noise.at(t - tau);
  VectorXd mean = VectorXd::Zero(n);
  for (const auto& s : st) mean += s.weight * s.value;
  MatrixXd W = MatrixXd::Zero(n, n);
  for (const auto& s : st) W += s.weight * (s.value - mean) * (s.value - mean).transpose();
  return W;
}

void LQProblem::validate() const {
  require(n >= 1 && m >= 1, "dimensions must be positive");
  require(P.rows() == n && P.cols() == n && Q.rows() == n && Q.cols() == n, "P and Q must be n x n");
  require(R.rows() == m && R.cols() == m, "R must be m x m");
  require(min_eig(R) >= 1e-10, "R must be positive definite");
  require(min_eig(P) >= -1e-10 && min_eig(Q) >= -1e-10, "P and Q must be positive semidefinite");
  require(x_lo.size() == n && x_hi.size() == n, "initial state box has wrong dimension");
  to_lc().validate();
}

LCProblem LQProblem::to_lc() const {
  LCProblem lc;
  lc.n = n;
  lc.m = m;
  lc.A = A;
  lc.B = B;
  lc.tau = tau;
  lc.T = T;
  MatrixXd M = MatrixXd::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = P;
  M.bottomRightCorner(m, m) = R;
  for (int k = 0; k < T - tau; ++k) {
    lc.stage_costs.push_back(StructuredConvex::quadratic(M));
    lc.mixed.push_back(SetDescriptor::all());
    lc.controls.push_back(SetDescriptor::all());
    lc.states.push_back(k == 0 ? SetDescriptor::box(x_lo, x_hi) : SetDescriptor::all());
  }
  lc.terminal = StructuredConvex::quadratic(Q);
  lc.noise = noise;
  lc.gamma = gamma;
  lc.xi = xi;
  return lc;
}

TreePtr lc_tree(const LCProblem& lc) {
  std::vector<std::vector<NoiseSample>> stages;
  stages.push_back(lc.gamma.empty() ? std::vector<NoiseSample>{{VectorXd::Zero(lc.n), 1.0}} : lc.gamma);
  for (const auto& st : lc.noise) stages.push_back(st);
  const ScenarioTree full = probspace::build_tree(stages, lc.tau - 1);
  return std::make_shared<const ScenarioTree>(full.shifted(lc.tau, lc.tau));
}

ControlChoice LCReduction::control(int t, int atom, const VectorXd& x, const VectorXd& v) const {
  VectorXd y(2 * n);
  y << x, v;
  const convexcalc::ProjectResult r = convexcalc::inf_project(Phi(t, atom), iota(0, 2 * n), y);
  return {r.value, r.minimizer};
}

LCReduction lc_to_bolza(const LCProblem& lc) {
  lc.validate();
  const TreePtr tree = lc_tree(lc);
  const int n = lc.n;
  LCReduction red;
  red.n = n;
  red.m = lc.m;
  BolzaProblem& b = red.bolza;
  b.tree = tree;
  b.n = n;
  b.xi = lc.xi;
  b.start = lc.tau;
  for (int t = lc.tau + 1; t <= lc.T; ++t) {
    const int k = t - 1 - lc.tau;
    std::vector<std::shared_ptr<const StructuredConvex>> phis(tree->num_atoms());
    std::vector<bolza::FnPtr> Ls(tree->num_atoms());
    for (const auto& cell : tree->partition(t)) {
      const VectorXd& w = tree->noise(cell.front(), t - lc.tau);
      std::shared_ptr<const StructuredConvex> phi;
      try {
        phi = std::make_shared<const StructuredConvex>(make_phi(lc, k, w));
      } catch (const std::invalid_argument& e) {
        std::ostringstream os;
        os << "step " << t - 1 << ": " << e.what();
        throw std::invalid_argument(os.str());
      }
      auto L = std::make_shared<const ProjectedConvex>(*phi, 2 * n);
      if (const auto z = domain_point(*phi)) {
        if (L->value(z->head(2 * n)).is_neg_inf()) {
          std::ostringstream os;
          os << "stage cost at step " << t - 1 << " is unbounded below in the control (not proper)";
          throw std::invalid_argument(os.str());
        }
      }
      for (int a : cell) {
        phis[a] = phi;
        Ls[a] = L;
      }
    }
    red.phi.push_back(std::move(phis));
    b.lagrangians.push_back(std::move(Ls));
  }
  b.terminal = std::make_shared<const ProjectedConvex>(lc.terminal);
  b.validate();
  return red;
}

ExtReal lc_cost(const LCProblem& lc, const ScenarioTree& tree, const AdaptedProcess& x, const AdaptedProcess& u) {
  const int n = lc.n;
  double acc = 0.0;
  for (int t = lc.tau; t < lc.T; ++t) {
    const int k = t - lc.tau;
    const FlatSet U = convexcalc::flatten(lc.controls[k], lc.m);
    const FlatSet D = convexcalc::flatten(lc.mixed[k], n + lc.m);
    const FlatSet X = convexcalc::flatten(lc.states[k], n);
    for (int a = 0; a < tree.num_atoms(); ++a) {
      const VectorXd xt = x.at(t).col(a), ut = u.at(t).col(a);
      VectorXd xu(n + lc.m);
      xu << xt, ut;
      if (U.violation(ut) > 1e-8 || D.violation(xu) > 1e-8 || X.violation(xt) > 1e-8) return ExtReal::pos_inf();
      const VectorXd w = tree.noise(a, t + 1 - lc.tau);
      const VectorXd r = x.at(t + 1).col(a) - lc.A * xt - lc.B * ut - w;
      if (r.cwiseAbs().maxCoeff() > 1e-8 * (1.0 + x.at(t + 1).col(a).cwiseAbs().maxCoeff())) return ExtReal::pos_inf();
      const ExtReal l = convexcalc::eval(lc.stage_costs[k], xu);
      if (!l.finite()) return l;
      acc += tree.prob(a) * l.value();
    }
  }
  const ExtReal g = convexcalc::eval(lc.terminal, x.mean(lc.T));
  if (!g.finite()) return g;
  return acc + g.value();
}

ControlProcess recover_control(const LCProblem& lc, const LCReduction& red, const AdaptedProcess& x) {
  const BolzaProblem& b = red.bolza;
  const int tau = b.tau(), T = b.T();
  ControlProcess out;
  out.u.tree = b.tree;
  out.u.dim = red.m;
  out.u.s = tau;
  out.u.schedule = Schedule::primal;
  out.u.values.assign(T - tau, MatrixXd::Zero(red.m, b.tree->num_atoms()));
  for (int t = tau + 1; t <= T; ++t) {
    for (int a = 0; a < b.tree->num_atoms(); ++a) {
      const ControlChoice c = red.control(t, a, x.at(t - 1).col(a), x.at(t).col(a) - x.at(t - 1).col(a));
      if (!c.u || !c.value.finite()) {
        std::ostringstream os;
        os << "no feasible control at step " << t - 1 << " on atom " << a;
        throw std::domain_error(os.str());
      }
      out.u.at(t - 1).col(a) = *c.u;
    }
  }
  out.adaptedness = probspace::check_adapted(out.u, Schedule::primal, 1e-8);
  out.bolza_cost = bolza::primal_cost(b, x);
  out.lc_cost = lc_cost(lc, *b.tree, x, out.u);
  out.mismatch = (out.bolza_cost.finite() && out.lc_cost.finite())
                     ? std::abs(out.bolza_cost.value() - out.lc_cost.value())
                     : kInf;
  return out;
}

ExtReal hamiltonian(const LCProblem& lc, const ScenarioTree& tree, int t, int atom, const VectorXd& x,
                    const VectorXd& p) {
  require(t > lc.tau && t <= lc.T, "hamiltonian: time outside the horizon");
  require(x.size() == lc.n && p.size() == lc.n, "hamiltonian: wrong dimension");
  const int k = t - 1 - lc.tau;
  if (convexcalc::flatten(lc.states[k], lc.n).violation(x) > convexcalc::kFeasTol) return ExtReal::neg_inf();
  const ProjectedConvex sec = ProjectedConvex(control_section(lc, k), lc.n + lc.m).fixed(iota(0, lc.n), x);
  const ExtReal inner = sec.conjugate(lc.B.transpose() * p).value;
  if (!inner.finite()) return inner;
  const VectorXd& w = tree.noise(atom, t - lc.tau);
  return inner.value() + p.dot((lc.A - MatrixXd::Identity(lc.n, lc.n)) * x + w);
}

ExtReal hamiltonian(const LQProblem& lq, const ScenarioTree& tree, int t, int atom, const VectorXd& x,
                    const VectorXd& p) {
  require(t > lq.tau && t <= lq.T, "hamiltonian: time outside the horizon");
  require(x.size() == lq.n && p.size() == lq.n, "hamiltonian: wrong dimension");
  if (t == lq.tau + 1 && !in_box(x, lq.x_lo, lq.x_hi)) return ExtReal::neg_inf();
  const VectorXd q = lq.B.transpose() * p;
  const VectorXd& w = tree.noise(atom, t - lq.tau);
  return 0.25 * q.dot(lq.R.ldlt().solve(q)) - x.dot(lq.P * x) +
         p.dot((lq.A - MatrixXd::Identity(lq.n, lq.n)) * x + w);
}

double lq_cost(const LQProblem& lq, const AdaptedProcess& x, const AdaptedProcess& u) {
  const ScenarioTree& tree = *x.tree;
  double acc = 0.0;
  for (int t = lq.tau; t < lq.T; ++t)
    for (int a = 0; a < tree.num_atoms(); ++a) {
      const VectorXd xt = x.at(t).col(a), ut = u.at(t).col(a);
      acc += tree.prob(a) * (xt.dot(lq.P * xt) + ut.dot(lq.R * ut));
    }
  const VectorXd xT = x.mean(lq.T);
  return acc + xT.dot(lq.Q * xT);
}

LQSolution lq_solve_characteristics(const LQProblem& lq, const VectorXd& xi, const std::optional<VectorXd>& eta,
                                    double check_tol) {
  lq.validate();
  const int n = lq.n, tau = lq.tau, T = lq.T;
  require(xi.size() == n, "xi has wrong dimension");
  if (!eta) {
    for (int i = 0; i < n; ++i)
      if (!(xi(i) > lq.x_lo(i) && xi(i) < lq.x_hi(i)))
        throw std::invalid_argument("xi must lie in the interior of the initial state set");
  } else {
    require(eta->size() == n, "eta has wrong dimension");
  }
  LQProblem prob = lq;
  prob.xi = xi;
  const LCProblem lc = prob.to_lc();
  const TreePtr tree = lc_tree(lc);
  const int N = tree->num_atoms();
  const int steps = T - tau + 1;
  const int nx = steps * N * n;
  const int dim = 2 * nx;
  auto X = [&](int t, int a) { return ((t - tau) * N + a) * n; };
  auto Pi = [&](int t, int a) { return nx + ((t - tau) * N + a) * n; };

  const MatrixXd S = lq.B * lq.R.ldlt().solve(lq.B.transpose());
  const MatrixXd I = MatrixXd::Identity(n, n);
  qp::Triplets tr;
  VectorXd rhs = VectorXd::Zero(dim);
  int row = 0;
  auto put = [&](int r, int c, const MatrixXd& M) {
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j)
        if (M(i, j) != 0.0) tr.emplace_back(r + i, c + j, M(i, j));
  };
  // E^t applied to p_t at atom a: weighted sum over the atom's cell.
  auto put_cond = [&](int r, int t, int a, const MatrixXd& M) {
    const int c = tree->cell_of(t, a);
    const double pc = tree->cell_prob(t, c);
    for (int b : tree->partition(t)[c]) put(r, Pi(t, b), M * (tree->prob(b) / pc));
  };

  for (int t = tau + 1; t <= T; ++t)
    for (int a = 0; a < N; ++a) {
      // x_t - A x_{t-1} - S E^t p_t / 2 = w_{t-1}
      put(row, X(t, a), I);
      put(row, X(t - 1, a), -lq.A);
      put_cond(row, t, a, -0.5 * S);
      rhs.segment(row, n) = tree->noise(a, t - tau);
      row += n;
      // p_{t-1} - A' E^t p_t + 2 P x_{t-1} = 0
      put(row, Pi(t - 1, a), I);
      put_cond(row, t, a, -lq.A.transpose());
      put(row, X(t - 1, a), 2.0 * lq.P);
      row += n;
    }
  for (int a = 0; a < N; ++a) {
    // p_T + 2 Q E x_T = 0
    put(row, Pi(T, a), I);
    for (int b = 0; b < N; ++b) put(row, X(T, b), 2.0 * tree->prob(b) * lq.Q);
    row += n;
  }
  const auto& cells = tree->partition(tau);
  for (const auto& cell : cells)
    for (std::size_t i = 1; i < cell.size(); ++i) {
      put(row, X(tau, cell[i]), I);
      put(row, X(tau, cell[0]), -I);
      row += n;
    }
  // E^tau p_tau on cell c, written through its first atom.
  auto put_cell_mean = [&](int r, int c, double sign) { put_cond(r, tau, cells[c].front(), sign * I); };
  if (eta) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      put_cell_mean(row, static_cast<int>(c), 1.0);
      rhs.segment(row, n) = -*eta;
      row += n;
    }
  } else {
    for (int a = 0; a < N; ++a) put(row, X(tau, a), tree->prob(a) * I);
    rhs.segment(row, n) = xi;
    row += n;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      put_cell_mean(row, static_cast<int>(c), 1.0);
      put_cell_mean(row, 0, -1.0);
      row += n;
    }
  }
  if (row != dim) throw std::logic_error("characteristic system is not square");

  qp::SpMat K(dim, dim);
  K.setFromTriplets(tr.begin(), tr.end());
  K.makeCompressed();
  LQSolution out;
  VectorXd sol;
  Eigen::SparseLU<qp::SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(K);
  bool ok = lu.info() == Eigen::Success;
  if (ok) {
    sol = lu.solve(rhs);
    ok = sol.allFinite() && (K * sol - rhs).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff());
  }
  if (!ok) {
    const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod{MatrixXd(K)};
    sol = cod.solve(rhs);
    out.degenerate = true;
  }
  out.system_residual = (K * sol - rhs).cwiseAbs().maxCoeff();

  AdaptedProcess& xp = out.traj.x;
  AdaptedProcess& pp = out.traj.p;
  xp = AdaptedProcess::zeros(tree, n, tau, Schedule::primal);
  pp = AdaptedProcess::zeros(tree, n, tau, Schedule::dual);
  for (int t = tau; t <= T; ++t)
    for (int a = 0; a < N; ++a) {
      xp.at(t).col(a) = sol.segment(X(t, a), n);
      pp.at(t).col(a) = sol.segment(Pi(t, a), n);
    }
  for (int a = 0; a < N; ++a) {
    const VectorXd x0 = xp.at(tau).col(a);
    if ((x0 - lq.x_lo).minCoeff() <= 0.0 || (lq.x_hi - x0).minCoeff() <= 0.0) out.x_tau_interior = false;
  }

  out.u.tree = tree;
  out.u.dim = lq.m;
  out.u.s = tau;
  out.u.schedule = Schedule::primal;
  for (int t = tau + 1; t <= T; ++t) {
    const probspace::Values ep = probspace::cond_expect(*tree, t, pp.at(t));
    out.u.values.push_back(0.5 * lq.R.ldlt().solve(lq.B.transpose() * ep));
  }
  out.value = lq_cost(lq, xp, out.u);
  out.transversality_error = (pp.at(T).colwise() + 2.0 * lq.Q * xp.mean(T)).cwiseAbs().maxCoeff();

  const LCReduction red = lc_to_bolza(lc);
  out.verdict = characteristics::check_trajectory(red.bolza, out.traj, check_tol);
  try {
    const ControlProcess rec = recover_control(lc, red, xp);
    double err = 0.0;
    for (int t = tau; t < T; ++t) err = std::max(err, (rec.u.at(t) - out.u.at(t)).cwiseAbs().maxCoeff());
    out.control_error = err;
  } catch (const std::domain_error&) {
    out.control_error = kInf;
  }
  return out;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

const AssumptionCheck* AssumptionReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

AssumptionReport check_assumptions(const BolzaProblem& p, const AssumptionOptions& opts) {
  AssumptionReport rep;
  const int n = p.n, tau = p.tau(), T = p.T();
  const auto& tree = *p.tree;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const bolza::SolveReport sol = bolza::solve_primal(p, tau, p.xi);
  AssumptionCheck feas{"feasible_trajectory", Verdict::pass, "", {}};
  if (sol.optimal_value.is_pos_inf()) {
    feas.status = Verdict::fail;
    feas.evidence = "no trajectory with finite cost and mean xi";
  } else if (sol.optimal_value.is_neg_inf()) {
    feas.evidence = "feasible trajectory found; the cost is unbounded below";
  } else {
    feas.evidence = "optimal trajectory has finite cost";
    feas.numbers["value"] = sol.optimal_value.value();
  }
  rep.checks.push_back(feas);

  AssumptionCheck strict{"strict_feasibility", Verdict::inconclusive, "", {{"eps", opts.eps}}};
  AssumptionCheck recourse{"bounded_recourse", Verdict::inconclusive, "", {}};
  if (sol.trajectory && sol.optimal_value.finite()) {
    const AdaptedProcess& xb = *sol.trajectory;
    const int d = 2 * n;
    std::vector<VectorXd> signs;
    if (d <= 6) {
      for (int mask = 0; mask < (1 << d); ++mask) {
        VectorXd s(d);
        for (int i = 0; i < d; ++i) s(i) = (mask >> i) & 1 ? 1.0 : -1.0;
        signs.push_back(s);
      }
    } else {
      std::bernoulli_distribution coin(0.5);
      for (int k = 0; k < 64; ++k) {
        VectorXd s(d);
        for (int i = 0; i < d; ++i) s(i) = coin(rng) ? 1.0 : -1.0;
        signs.push_back(s);
      }
    }
    double alpha = -kInf;
    bool all_finite = true;
    for (int t = tau + 1; t <= T && all_finite; ++t)
      for (int a = 0; a < tree.num_atoms() && all_finite; ++a) {
        VectorXd c(d);
        c << xb.at(t - 1).col(a), xb.at(t).col(a) - xb.at(t - 1).col(a);
        for (const auto& s : signs) {
          const ExtReal v = p.L(t, a).value(c + opts.eps * s);
          if (!v.finite()) {
            all_finite = false;
            break;
          }
          alpha = std::max(alpha, v.value());
        }
      }
    if (all_finite) {
      strict.status = Verdict::pass;
      strict.evidence = "stage costs finite on the eps-box around the optimal trajectory";
      strict.numbers["alpha"] = alpha;
    } else {
      strict.evidence = "the optimal trajectory touches a domain boundary; another interior trajectory may exist";
    }

    int probes = 0, in_domain = 0, reached = 0;
    double rho_prime = 0.0, beta = -kInf;
    const std::vector<int> xs = iota(0, n);
    for (int t = tau + 1; t <= T; ++t)
      for (int a = 0; a < tree.num_atoms(); ++a)
        for (int k = 0; k < opts.state_probes; ++k) {
          VectorXd dir(n);
          for (int i = 0; i < n; ++i) dir(i) = gauss(rng);
          const double r = (k % 2 == 0) ? 0.5 : 2.0;
          const VectorXd x = xb.at(t - 1).col(a) + r * dir / std::max(dir.norm(), 1e-12);
          ++probes;
          const convexcalc::ConjResult c = p.L(t, a).fixed(xs, x).conjugate(VectorXd::Zero(n));
          if (!c.value.finite() || !c.argmax) continue;
          ++in_domain;
          const VectorXd& v = *c.argmax;
          beta = std::max(beta, -c.value.value());
          if (t < T && !characteristics::hamiltonian_eval(p, t + 1, a, x + v, VectorXd::Zero(n)).finite()) continue;
          ++reached;
          rho_prime = std::max(rho_prime, (x + v).norm());
        }
    recourse.numbers["probes"] = probes;
    recourse.numbers["probes_in_domain"] = in_domain;
    recourse.numbers["probes_with_recourse"] = reached;
    if (in_domain > 0 && reached == in_domain) {
      recourse.status = Verdict::pass;
      recourse.evidence = "every sampled feasible state has a bounded next state";
      recourse.numbers["rho_prime"] = rho_prime;
      recourse.numbers["beta"] = beta;
    } else {
      recourse.evidence = in_domain == 0 ? "no sampled state lies in the domain"
                                         : "the cheapest step from some sampled state leaves the next domain";
    }
  } else {
    strict.evidence = recourse.evidence = "no finite optimal trajectory to probe around";
  }
  rep.checks.push_back(strict);
  rep.checks.push_back(recourse);
  rep.checks.push_back({"measurable_state_sets", Verdict::pass,
                        "finite sample space: each constraint map is a finite family of cell-constant sets",
                        {}});

  AssumptionCheck coerce{"coercive_lagrangian", Verdict::inconclusive, "", {}};
  double lam = kInf;
  bool explicit_fns = true, bounded_v = true;
  for (int t = tau + 1; t <= T; ++t)
    for (int a = 0; a < tree.num_atoms(); ++a) {
      const auto& L = p.L(t, a);
      if (L.lifted() > 0) {
        explicit_fns = false;
        continue;
      }
      lam = std::min(lam, min_eig(L.phi().quad().bottomRightCorner(n, n)));
      const FlatSet& fs = L.phi().flat();
      bounded_v = bounded_v && fs.lo.tail(n).allFinite() && fs.hi.tail(n).allFinite();
    }
  if (!explicit_fns) {
    coerce.evidence = "stage costs are partial minima; use the control-level check";
  } else if (lam > 1e-10) {
    coerce.status = Verdict::pass;
    coerce.evidence = "velocity block is positive definite; theta(s) = lambda s^2 (heuristic witness)";
    coerce.numbers["lambda_min"] = lam;
  } else if (bounded_v) {
    coerce.status = Verdict::pass;
    coerce.evidence = "velocity is confined to a bounded box";
  } else {
    coerce.evidence = "velocity block is singular and the velocity is unbounded";
    coerce.numbers["lambda_min"] = lam;
  }
  rep.checks.push_back(coerce);
  rep.checks.push_back({"bounded_controls", Verdict::inconclusive, "no control structure in a plain Bolza problem", {}});
  return rep;
}

AssumptionReport check_assumptions(const LCProblem& lc, const AssumptionOptions& opts) {
  lc.validate();
  const int n = lc.n, m = lc.m;
  AssumptionReport rep;

  AssumptionCheck ctrl{"bounded_controls", Verdict::pass, "", {}};
  double radius = 0.0;
  std::vector<std::string> notes;
  for (int k = 0; k < lc.horizon(); ++k) {
    const bool no_mixed = lc.mixed[k].kind == SetDescriptor::Kind::all;
    const FlatSet U = convexcalc::flatten(lc.controls[k], m);
    const FlatSet D = convexcalc::flatten(lc.mixed[k], n + m);
    const FlatSet X = convexcalc::flatten(lc.states[k], n);
    std::vector<VectorXd> probes;
    VectorXd c = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (std::isfinite(X.lo(i)) && std::isfinite(X.hi(i))) c(i) = 0.5 * (X.lo(i) + X.hi(i));
      else c(i) = std::clamp(0.0, X.lo(i), X.hi(i));
    }
    probes.push_back(c);
    if (k == 0) probes.push_back(lc.xi);
    Verdict stage = Verdict::pass;
    for (const VectorXd& x : probes) {
      qp::Problem q = qp::Problem::empty(m);
      q.lo = U.lo;
      q.hi = U.hi;
      MatrixXd Aeq(U.Aeq.rows() + D.Aeq.rows(), m);
      VectorXd beq(Aeq.rows());
      Aeq << U.Aeq, D.Aeq.rightCols(m);
      beq << U.beq, D.beq - D.Aeq.leftCols(n) * x;
      MatrixXd Ain(U.Ain.rows() + D.Ain.rows(), m);
      VectorXd bin(Ain.rows());
      Ain << U.Ain, D.Ain.rightCols(m);
      bin << U.bin, D.bin - D.Ain.leftCols(n) * x;
      q.lo = q.lo.cwiseMax(D.lo.tail(m));
      q.hi = q.hi.cwiseMin(D.hi.tail(m));
      q.A = Aeq.sparseView();
      q.b = beq;
      q.G = Ain.sparseView();
      q.h = bin;
      for (int i = 0; i < m && stage != Verdict::fail; ++i)
        for (double sgn : {1.0, -1.0}) {
          q.c = VectorXd::Zero(m);
          q.c(i) = -sgn;
          const qp::Solution s = qp::solve(q);
          if (s.status == qp::Status::infeasible) break;
          if (s.status == qp::Status::optimal) {
            radius = std::max(radius, std::abs(s.w(i)));
            continue;
          }
          if (!no_mixed) {
            stage = Verdict::fail;
            std::ostringstream os;
            os << "step " << lc.tau + k << ": admissible controls are unbounded along coordinate " << i;
            notes.push_back(os.str());
          } else if (min_eig(lc.stage_costs[k].quad().bottomRightCorner(m, m)) > 1e-10) {
            std::ostringstream os;
            os << "step " << lc.tau + k << ": vacuous (no mixed constraints), control cost is strongly convex";
            notes.push_back(os.str());
          } else {
            stage = worst(stage, Verdict::inconclusive);
            const ProjectedConvex sec =
                ProjectedConvex(control_section(lc, k), n + m).fixed(iota(0, n), x);
            const bool ray = sec.conjugate(VectorXd::Zero(m)).unbounded;
            std::ostringstream os;
            os << "step " << lc.tau + k << ": control set unbounded"
               << (ray ? ", control cost decreases along a ray" : "");
            notes.push_back(os.str());
          }
          break;
        }
    }
    ctrl.status = worst(ctrl.status, stage);
  }
  ctrl.numbers["radius"] = radius;
  if (notes.empty()) notes.push_back("admissible controls are bounded at every probe state");
  std::vector<std::string> seen;
  for (const std::string& note : notes) {
    if (std::find(seen.begin(), seen.end(), note) != seen.end()) continue;
    ctrl.evidence += (seen.empty() ? "" : "; ") + note;
    seen.push_back(note);
  }
  rep.checks.push_back(ctrl);

  AssumptionCheck coerce{"coercive_lagrangian", Verdict::pass, "", {}};
  const double normB = lc.B.norm() > 0 ? Eigen::JacobiSVD<MatrixXd>(lc.B).singularValues()(0) : 0.0;
  const double c1 = Eigen::JacobiSVD<MatrixXd>(lc.A - MatrixXd::Identity(n, n)).singularValues()(0);
  double lam = kInf;
  for (int k = 0; k < lc.horizon(); ++k) {
    const MatrixXd Ru = lc.stage_costs[k].quad().bottomRightCorner(m, m);
    const FlatSet U = convexcalc::flatten(lc.controls[k], m);
    const bool bounded = U.lo.allFinite() && U.hi.allFinite();
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(Ru);
    const double l = es.eigenvalues()(0);
    if (l > 1e-10 || bounded) {
      if (!bounded) lam = std::min(lam, l);
      continue;
    }
    coerce.status = Verdict::fail;
    std::ostringstream os;
    os << "step " << lc.tau + k << ": control cost is flat along u = [";
    for (int i = 0; i < m; ++i) os << (i ? ", " : "") << es.eigenvectors()(i, 0);
    os << "]";
    coerce.evidence = os.str();
    coerce.numbers["lambda_min"] = l;
    break;
  }
  if (coerce.status == Verdict::pass) {
    double wmax = 0.0;
    for (const auto& st : lc.noise)
      for (const auto& s : st) wmax = std::max(wmax, s.value.norm());
    if (std::isfinite(lam)) {
      coerce.evidence = "theta(s) = lambda_min(R) s^2 / |B|^2 (heuristic witness)";
      coerce.numbers["lambda_min"] = lam;
    } else {
      coerce.evidence = "bounded controls keep the velocity within c1 |x| plus a constant";
    }
    coerce.numbers["norm_B"] = normB;
    coerce.numbers["c1"] = c1;
    coerce.numbers["c2"] = wmax;
  }
  rep.checks.push_back(coerce);

  const LCReduction red = lc_to_bolza(lc);
  for (auto& c : check_assumptions(red.bolza, opts).checks) {
    if (c.name == "bounded_controls" || c.name == "coercive_lagrangian") continue;
    rep.checks.push_back(std::move(c));
  }
  return rep;
}

}  // namespace sbolza::lcontrol
