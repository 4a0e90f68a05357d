#include "sbolza/characteristics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sbolza/oracleverify.hpp"

namespace sbolza::characteristics {

namespace {

using probspace::Schedule;
using probspace::Values;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> first_n(int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

double el_residual(const BolzaProblem& p, const HamiltonianTrajectory& traj, int t) {
  const auto& tr = *p.tree;
  const int n = p.n;
  if (t <= traj.x.s || t > p.T()) throw std::out_of_range("el_residual: stage outside window");
  const Values ep = probspace::cond_expect(tr, t, traj.p.at(t));
  const Values edp = probspace::cond_expect(tr, t, traj.p.delta(t));
  double worst = -kInf;
  VectorXd z(2 * n), y(2 * n);
  for (int a = 0; a < tr.num_atoms(); ++a) {
    z << traj.x.at(t - 1).col(a), traj.x.at(t).col(a) - traj.x.at(t - 1).col(a);
    y << edp.col(a), ep.col(a);
    double r;
    try {
      r = convexcalc::fy_residual(p.L(t, a), z, y);
    } catch (const std::domain_error&) {
      std::ostringstream os;
      os << "stage cost at time " << t << " is infinite on atom " << a;
      throw std::domain_error(os.str());
    }
    worst = std::max(worst, r);
  }
  return worst;
}

TrajectoryVerdict check_trajectory(const BolzaProblem& p, HamiltonianTrajectory& traj, double tol) {
  TrajectoryVerdict v;
  v.tol = tol;
  const auto xa = probspace::check_adapted(traj.x, Schedule::primal);
  const auto pa = probspace::check_adapted(traj.p, Schedule::dual);
  v.x_adapted = xa.adapted;
  v.p_adapted = pa.adapted;
  v.x_deviation = xa.deviation;
  v.p_deviation = pa.deviation;
  if (!xa.adapted || !pa.adapted) {
    v.failure = !xa.adapted ? "state process is not adapted" : "adjoint process violates the dual schedule";
    return v;
  }
  if (traj.x.s != traj.p.s || traj.x.T() != p.T() || traj.p.T() != p.T()) {
    v.failure = "trajectory window does not match the problem";
    return v;
  }
  v.pass = true;
  for (int t = traj.x.s + 1; t <= p.T(); ++t) {
    double r;
    try {
      r = el_residual(p, traj, t);
    } catch (const std::domain_error& e) {
      v.pass = false;
      v.failure = e.what();
      r = kInf;
    }
    v.stage_residuals.push_back(r);
    if (!(r <= tol)) {
      if (v.failure.empty()) {
        std::ostringstream os;
        os << "Euler-Lagrange residual " << r << " at time " << t;
        v.failure = os.str();
      }
      v.pass = false;
    }
  }
  const VectorXd xT = traj.x.mean(p.T());
  const VectorXd pT = traj.p.at(p.T()).col(0);
  try {
    v.transversality_residual = convexcalc::fy_residual(*p.terminal, xT, -pT);
  } catch (const std::domain_error&) {
    v.transversality_residual = kInf;
  }
  if (!(v.transversality_residual <= tol)) {
    v.pass = false;
    if (v.failure.empty()) {
      std::ostringstream os;
      os << "transversality residual " << v.transversality_residual;
      v.failure = os.str();
    }
  }
  traj.per_stage_residuals = v.stage_residuals;
  traj.transversality_residual = v.transversality_residual;
  return v;
}

std::vector<SubgradCertificate> propagate_subgradient(const BolzaProblem& p, const HamiltonianTrajectory& traj,
                                                      const Config& cfg, const PropagateOptions& opts) {
  std::vector<SubgradCertificate> out;
  const bolza::DualBolzaProblem d = bolza::dualize(p);
  for (int s = traj.x.s; s < p.T(); ++s) {
    SubgradCertificate c;
    c.s = s;
    c.xi = traj.x.mean(s);
    c.eta = -traj.p.mean(s);
    c.V = bolza::solve_primal(p, s, c.xi, cfg).optimal_value;
    c.W = bolza::solve_dual(d, s, c.eta, cfg).optimal_value;
    c.fy_gap = (c.V.finite() && c.W.finite()) ? std::abs(c.V.value() + c.W.value() - c.xi.dot(c.eta)) : kInf;
    c.fy_pass = c.fy_gap <= opts.fy_tol;
    if (c.V.finite()) {
      auto V = [&](const VectorXd& y) { return bolza::solve_primal(p, s, y, cfg).optimal_value; };
      const auto iv = oracleverify::finite_diff_subgradient(V, c.xi, opts.fd_step);
      c.fd_left = iv.left;
      c.fd_right = iv.right;
      c.one_sided = iv.one_sided;
      c.fd_pass = iv.contains(c.eta, opts.fd_slack);
    }
    c.flagged = !(c.fy_pass && c.fd_pass);
    out.push_back(std::move(c));
  }
  return out;
}

Recovery recover_trajectory(const BolzaProblem& p, const VectorXd& xi, const VectorXd& eta, const Config& cfg,
                            double tol) {
  const int s = p.tau();
  const bolza::SolveReport prim = bolza::solve_primal(p, s, xi, cfg);
  const bolza::DualBolzaProblem d = bolza::dualize(p);
  const bolza::SolveReport dual = bolza::solve_dual(d, s, eta, cfg);
  if (!prim.optimal_value.finite() || !dual.optimal_value.finite() || !prim.trajectory || !dual.trajectory)
    throw std::domain_error("eta is not a subgradient: primal or dual value is not finite");
  Recovery r;
  r.gap = std::abs(prim.optimal_value.value() + dual.optimal_value.value() - xi.dot(eta));
  if (r.gap > cfg.tol_certificate) {
    std::ostringstream os;
    os << "eta is not a subgradient at xi (Fenchel-Young gap " << r.gap << ")";
    throw std::domain_error(os.str());
  }
  r.traj.x = *prim.trajectory;
  r.traj.p = *dual.trajectory;
  r.verdict = check_trajectory(p, r.traj, tol);
  return r;
}

ProjectedConvex hamiltonian_p_section(const BolzaProblem& p, int t, int atom, const VectorXd& x) {
  return p.L(t, atom).fixed(first_n(p.n), x).conjugate_function();
}

ProjectedConvex hamiltonian_negx_section(const BolzaProblem& p, int t, int atom, const VectorXd& pvec) {
  const int n = p.n;
  VectorXd tilt = VectorXd::Zero(2 * n);
  tilt.tail(n) = -pvec;
  std::vector<int> v_idx(n);
  for (int i = 0; i < n; ++i) v_idx[i] = n + i;
  return p.L(t, atom).tilted(tilt).eliminated(v_idx);
}

ExtReal hamiltonian_eval(const BolzaProblem& p, int t, int atom, const VectorXd& x, const VectorXd& pvec) {
  if (x.size() != p.n || pvec.size() != p.n) throw std::invalid_argument("hamiltonian_eval: wrong dimension");
  return p.L(t, atom).fixed(first_n(p.n), x).conjugate(pvec).value;
}

}  // namespace sbolza::characteristics
