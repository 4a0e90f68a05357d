#include "sbolza/bolza.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sbolza::bolza {

namespace {

using probspace::ScenarioTree;
using probspace::Schedule;
using probspace::Values;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_function(const ProjectedConvex& a, const ProjectedConvex& b) {
  if (&a == &b) return true;
  if (a.dim() != b.dim() || a.phi().dim() != b.phi().dim()) return false;
  const auto& fa = a.phi().flat();
  const auto& fb = b.phi().flat();
  return a.phi().quad() == b.phi().quad() && a.phi().lin() == b.phi().lin() &&
         a.phi().constant() == b.phi().constant() && fa.lo == fb.lo && fa.hi == fb.hi &&
         fa.Aeq.rows() == fb.Aeq.rows() && fa.Aeq == fb.Aeq && fa.beq == fb.beq && fa.Ain.rows() == fb.Ain.rows() &&
         fa.Ain == fb.Ain && fa.bin == fb.bin;
}

// Node indexing for processes stored per cell.
struct Nodes {
  int n = 0;
  std::vector<int> base;  // base[k]: offset of cell 0 of block k
  int nz = 0;
  int at(int k, int c, int j) const { return base[k] + c * n + j; }
};

void add_block(qp::Triplets& t, int row, int col, int n, double coef) {
  for (int j = 0; j < n; ++j) t.emplace_back(row + j, col + j, coef);
}

qp::SpMat make(int rows, int cols, const qp::Triplets& t) {
  qp::SpMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

struct StageKey {
  int t, cell;
};

struct PrimalProgram {
  program::Program prog;
  Nodes nodes;  // block k = time s + k
  std::vector<StageKey> stages;
};

PrimalProgram build_primal(const BolzaProblem& p, int s, const VectorXd* xi, const VectorXd* tilt_eta) {
  const ScenarioTree& tr = *p.tree;
  const int n = p.n;
  const int T = p.T();
  PrimalProgram out;
  Nodes& nd = out.nodes;
  nd.n = n;
  for (int t = s; t <= T; ++t) {
    nd.base.push_back(nd.nz);
    nd.nz += tr.num_cells(t) * n;
  }
  program::Program& prog = out.prog;
  prog.nz = nd.nz;
  for (int t = s + 1; t <= T; ++t) {
    for (int c = 0; c < tr.num_cells(t); ++c) {
      const int par = tr.ancestor(t - 1, t, c);
      qp::Triplets k;
      add_block(k, 0, nd.at(t - 1 - s, par, 0), n, 1.0);
      add_block(k, n, nd.at(t - s, c, 0), n, 1.0);
      add_block(k, n, nd.at(t - 1 - s, par, 0), n, -1.0);
      program::Term term;
      term.weight = tr.cell_prob(t, c);
      term.fn = p.lagrangians[t - p.tau() - 1][tr.partition(t)[c].front()];
      term.K = make(2 * n, nd.nz, k);
      term.offset = VectorXd::Zero(2 * n);
      prog.terms.push_back(std::move(term));
      out.stages.push_back({t, c});
    }
  }
  {
    qp::Triplets k;
    for (int c = 0; c < tr.num_cells(T); ++c) add_block(k, 0, nd.at(T - s, c, 0), n, tr.cell_prob(T, c));
    program::Term term;
    term.fn = p.terminal;
    term.K = make(n, nd.nz, k);
    term.offset = VectorXd::Zero(n);
    prog.terms.push_back(std::move(term));
  }
  if (xi) {
    qp::Triplets k;
    for (int c = 0; c < tr.num_cells(s); ++c) add_block(k, 0, nd.at(0, c, 0), n, tr.cell_prob(s, c));
    prog.Ceq = make(n, nd.nz, k);
    prog.deq = *xi;
  } else {
    prog.Ceq.resize(0, nd.nz);
    prog.deq.resize(0);
  }
  prog.tilt = VectorXd::Zero(nd.nz);
  if (tilt_eta)
    for (int c = 0; c < tr.num_cells(s); ++c)
      prog.tilt.segment(nd.at(0, c, 0), n) = -tr.cell_prob(s, c) * (*tilt_eta);
  return out;
}

struct DualProgram {
  program::Program prog;
  Nodes nodes;  // block k = p_{s+k} on partitions[s+k+1]; last block p_T (one cell)
};

DualProgram build_dual(const DualBolzaProblem& d, int s, const VectorXd& eta) {
  const ScenarioTree& tr = *d.tree;
  const int n = d.n;
  const int T = d.T();
  DualProgram out;
  Nodes& nd = out.nodes;
  nd.n = n;
  for (int t = s; t < T; ++t) {
    nd.base.push_back(nd.nz);
    nd.nz += tr.num_cells(t + 1) * n;
  }
  nd.base.push_back(nd.nz);
  nd.nz += n;
  const int kT = T - s;
  program::Program& prog = out.prog;
  prog.nz = nd.nz;

  // Coefficients of E^t[p_t] on cell c of partitions[t].
  auto cond_p = [&](qp::Triplets& k, int row, int t, int c, double scale) {
    if (t == T) {
      add_block(k, row, nd.at(kT, 0, 0), n, scale);
      return;
    }
    const double pc = tr.cell_prob(t, c);
    for (int dcell = 0; dcell < tr.num_cells(t + 1); ++dcell)
      if (tr.ancestor(t, t + 1, dcell) == c)
        add_block(k, row, nd.at(t - s, dcell, 0), n, scale * tr.cell_prob(t + 1, dcell) / pc);
  };

  for (int t = s + 1; t <= T; ++t) {
    for (int c = 0; c < tr.num_cells(t); ++c) {
      qp::Triplets k;
      cond_p(k, 0, t, c, 1.0);
      cond_p(k, n, t, c, 1.0);
      add_block(k, n, nd.at(t - 1 - s, c, 0), n, -1.0);
      program::Term term;
      term.weight = tr.cell_prob(t, c);
      term.fn = d.dual_lagrangians[t - d.tau() - 1][tr.partition(t)[c].front()];
      term.K = make(2 * n, nd.nz, k);
      term.offset = VectorXd::Zero(2 * n);
      prog.terms.push_back(std::move(term));
    }
  }
  {
    qp::Triplets k;
    add_block(k, 0, nd.at(kT, 0, 0), n, 1.0);
    program::Term term;
    term.fn = d.dual_terminal;
    term.K = make(n, nd.nz, k);
    term.offset = VectorXd::Zero(n);
    prog.terms.push_back(std::move(term));
  }
  qp::Triplets k;
  const int cells = tr.num_cells(s);
  VectorXd rhs(cells * n);
  for (int c = 0; c < cells; ++c) {
    cond_p(k, c * n, s, c, 1.0);
    rhs.segment(c * n, n) = -eta;
  }
  prog.Ceq = make(cells * n, nd.nz, k);
  prog.deq = rhs;
  prog.tilt = VectorXd::Zero(nd.nz);
  return out;
}

program::Options program_options(const Config& cfg) {
  program::Options o;
  o.tol = std::min(1e-10, cfg.tol_stationarity);
  o.max_iter = std::min(cfg.max_iter, 20000);
  return o;
}

void fill_status(SolveReport& rep, const program::Result& r, const Config& cfg) {
  rep.iterations = r.iterations;
  rep.stationarity_residual = r.stationarity;
  rep.feasibility_residual = r.feasibility;
  rep.status = r.status;
  rep.objective_trace = r.trace;
  rep.optimal_value = r.value;
  if (r.status == qp::Status::optimal &&
      (r.stationarity > cfg.tol_stationarity || r.feasibility > cfg.tol_feasibility))
    rep.status = qp::Status::max_iter;
}

void check_start(int s, int tau, int T) {
  if (s < tau || s >= T) {
    std::ostringstream os;
    os << "start " << s << " outside [" << tau << ", " << T - 1 << "]";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

void BolzaProblem::validate() const {
  if (!tree) throw std::invalid_argument("problem has no tree");
  if (n < 1) throw std::invalid_argument("state dimension must be positive");
  const int stages = T() - tau();
  if (stages < 1) throw std::invalid_argument("horizon needs at least one stage");
  if (static_cast<int>(lagrangians.size()) != stages) throw std::invalid_argument("one stage list per time required");
  for (int t = tau() + 1; t <= T(); ++t) {
    const auto& row = lagrangians[t - tau() - 1];
    if (static_cast<int>(row.size()) != tree->num_atoms()) throw std::invalid_argument("stage functions must be given per atom");
    for (const auto& f : row) {
      if (!f) throw std::invalid_argument("missing stage function");
      if (f->dim() != 2 * n) throw std::invalid_argument("stage function must act on (x, v)");
    }
    for (const auto& cell : tree->partition(t)) {
      for (int a : cell) {
        if (!same_function(*row[cell.front()], *row[a])) {
          std::ostringstream os;
          os << "stage function at time " << t << " differs across atoms " << cell.front() << " and " << a
             << " of one cell";
          throw std::invalid_argument(os.str());
        }
      }
    }
  }
  if (!terminal || terminal->dim() != n) throw std::invalid_argument("terminal cost must act on R^n");
  if (xi.size() != n) throw std::invalid_argument("xi has wrong dimension");
  check_start(start, tau(), T());
}

DualBolzaProblem dualize(const BolzaProblem& p) {
  p.validate();
  DualBolzaProblem d;
  d.tree = p.tree;
  d.n = p.n;
  d.start = p.start;
  d.eta = VectorXd::Zero(p.n);
  const int n = p.n;
  // M(p, q) = L*(q, p): q pairs with x, p pairs with v.
  std::vector<int> swap(2 * n);
  for (int i = 0; i < n; ++i) {
    swap[i] = n + i;
    swap[n + i] = i;
  }
  const VectorXd ones = VectorXd::Ones(2 * n);
  std::map<const ProjectedConvex*, FnPtr> cache;
  for (int t = p.tau() + 1; t <= p.T(); ++t) {
    std::vector<FnPtr> row;
    for (int a = 0; a < p.tree->num_atoms(); ++a) {
      const FnPtr& L = p.lagrangians[t - p.tau() - 1][a];
      auto it = cache.find(L.get());
      if (it == cache.end()) {
        auto M = std::make_shared<const ProjectedConvex>(L->conjugate_function().signed_permuted(swap, ones));
        // M identically +inf when its constraint system admits no point.
        const auto& fs = M->phi().flat();
        if (!fs.box_only()) {
          qp::Problem q = qp::Problem::empty(M->phi().dim());
          q.A = fs.Aeq.sparseView();
          q.b = fs.beq;
          q.G = fs.Ain.sparseView();
          q.h = fs.bin;
          q.lo = fs.lo;
          q.hi = fs.hi;
          if (qp::solve(q).status == qp::Status::infeasible) d.flagged.emplace_back(t, a);
        }
        it = cache.emplace(L.get(), M).first;
      }
      row.push_back(it->second);
    }
    d.dual_lagrangians.push_back(std::move(row));
  }
  d.dual_terminal = std::make_shared<const ProjectedConvex>(
      p.terminal->conjugate_function().signed_permuted(
          [&] {
            std::vector<int> id(n);
            for (int i = 0; i < n; ++i) id[i] = i;
            return id;
          }(),
          -VectorXd::Ones(n)));
  return d;
}

SolveReport solve_primal(const BolzaProblem& p, const Config& cfg) { return solve_primal(p, p.start, p.xi, cfg); }

SolveReport solve_primal(const BolzaProblem& p, int s, const VectorXd& xi, const Config& cfg) {
  p.validate();
  check_start(s, p.tau(), p.T());
  if (xi.size() != p.n) throw std::invalid_argument("xi has wrong dimension");
  const PrimalProgram pp = build_primal(p, s, &xi, nullptr);
  const program::Result r = program::solve(pp.prog, program_options(cfg));
  SolveReport rep;
  fill_status(rep, r, cfg);
  if (r.status != qp::Status::optimal) return rep;

  const ScenarioTree& tr = *p.tree;
  const int n = p.n;
  AdaptedProcess x = AdaptedProcess::zeros(p.tree, n, s, Schedule::primal);
  for (int t = s; t <= p.T(); ++t)
    for (int a = 0; a < tr.num_atoms(); ++a) x.at(t).col(a) = r.z.segment(pp.nodes.at(t - s, tr.cell_of(t, a), 0), n);
  AdaptedProcess adj = AdaptedProcess::zeros(p.tree, n, s, Schedule::dual);
  for (std::size_t i = 0; i < pp.stages.size(); ++i) {
    const auto [t, c] = pp.stages[i];
    const VectorXd& g = r.term_subgrads[i];
    const VectorXd pv = g.tail(n) - g.head(n);
    for (int a : tr.partition(t)[c]) adj.at(t - 1).col(a) = pv;
  }
  const VectorXd gT = r.term_subgrads.back();
  for (int a = 0; a < tr.num_atoms(); ++a) adj.at(p.T()).col(a) = -gT;
  rep.trajectory = std::move(x);
  rep.adjoint = std::move(adj);
  rep.mean_multiplier = r.eq_mult;
  return rep;
}

SolveReport solve_dual(const DualBolzaProblem& d, const Config& cfg) { return solve_dual(d, d.start, d.eta, cfg); }

SolveReport solve_dual(const DualBolzaProblem& d, int s, const VectorXd& eta, const Config& cfg) {
  check_start(s, d.tau(), d.T());
  if (eta.size() != d.n) throw std::invalid_argument("eta has wrong dimension");
  const DualProgram dp = build_dual(d, s, eta);
  const program::Result r = program::solve(dp.prog, program_options(cfg));
  SolveReport rep;
  fill_status(rep, r, cfg);
  if (r.status != qp::Status::optimal) return rep;
  const ScenarioTree& tr = *d.tree;
  const int n = d.n;
  AdaptedProcess pr = AdaptedProcess::zeros(d.tree, n, s, Schedule::dual);
  for (int t = s; t < d.T(); ++t)
    for (int a = 0; a < tr.num_atoms(); ++a)
      pr.at(t).col(a) = r.z.segment(dp.nodes.at(t - s, tr.cell_of(t + 1, a), 0), n);
  for (int a = 0; a < tr.num_atoms(); ++a) pr.at(d.T()).col(a) = r.z.segment(dp.nodes.at(d.T() - s, 0, 0), n);
  rep.trajectory = std::move(pr);
  rep.mean_multiplier = r.eq_mult;
  return rep;
}

ExtReal terminal_dual_value(const DualBolzaProblem& d, const VectorXd& eta) { return d.dual_terminal->value(-eta); }

SubgradResult value_and_subgradient(const BolzaProblem& p, int s, const VectorXd& xi, const Config& cfg) {
  SubgradResult out;
  out.primal = solve_primal(p, s, xi, cfg);
  out.value = out.primal.optimal_value;
  if (out.primal.status != qp::Status::optimal || !out.value.finite())
    throw std::domain_error("value function is not finite at xi");
  // dV/dxi = -(mean multiplier) = -E[p_s] of the adjoint.
  out.candidate = -out.primal.mean_multiplier;
  const DualBolzaProblem d = dualize(p);
  const SolveReport w = solve_dual(d, s, out.candidate, cfg);
  out.dual_value = w.optimal_value;
  if (!w.optimal_value.finite()) {
    out.residual = kInf;
    return out;
  }
  out.residual = std::abs(out.value.value() + w.optimal_value.value() - xi.dot(out.candidate));
  if (out.residual <= cfg.tol_certificate) out.eta = out.candidate;
  return out;
}

TiltResult tilted_primal(const BolzaProblem& p, const VectorXd& eta, const Config& cfg) {
  p.validate();
  if (eta.size() != p.n) throw std::invalid_argument("eta has wrong dimension");
  const int s = p.tau();
  const PrimalProgram pp = build_primal(p, s, nullptr, &eta);
  const program::Result r = program::solve(pp.prog, program_options(cfg));
  TiltResult out;
  out.value = r.value;
  const DualBolzaProblem d = dualize(p);
  out.dual_value = solve_dual(d, s, eta, cfg).optimal_value;
  if (out.value.finite() && out.dual_value.finite()) {
    out.mismatch = std::abs(out.value.value() + out.dual_value.value());
    out.consistent = out.mismatch <= cfg.tol_gap_strong;
  } else {
    out.mismatch = out.value.finite() || out.dual_value.finite() ? kInf : 0.0;
    out.consistent = (out.value.is_neg_inf() && out.dual_value.is_pos_inf()) ||
                     (out.value.is_pos_inf() && out.dual_value.is_neg_inf());
  }
  return out;
}

ExtReal primal_cost(const BolzaProblem& p, const AdaptedProcess& x) {
  if (x.dim != p.n || x.T() != p.T()) throw std::invalid_argument("primal_cost: process does not match problem");
  if (!probspace::check_adapted(x, Schedule::primal).adapted) return ExtReal::pos_inf();
  const ScenarioTree& tr = *p.tree;
  const int n = p.n;
  double acc = 0.0;
  VectorXd arg(2 * n);
  for (int t = x.s + 1; t <= p.T(); ++t) {
    for (int a = 0; a < tr.num_atoms(); ++a) {
      arg << x.at(t - 1).col(a), x.at(t).col(a) - x.at(t - 1).col(a);
      const ExtReal v = p.L(t, a).value(arg);
      if (!v.finite()) return v;
      acc += tr.prob(a) * v.value();
    }
  }
  const ExtReal gv = p.terminal->value(x.mean(p.T()));
  if (!gv.finite()) return gv;
  return acc + gv.value();
}

ExtReal dual_cost(const DualBolzaProblem& d, const AdaptedProcess& pr) {
  if (pr.dim != d.n || pr.T() != d.T()) throw std::invalid_argument("dual_cost: process does not match problem");
  if (!probspace::check_adapted(pr, Schedule::dual).adapted) return ExtReal::pos_inf();
  const ScenarioTree& tr = *d.tree;
  const int n = d.n;
  double acc = 0.0;
  VectorXd arg(2 * n);
  for (int t = pr.s + 1; t <= d.T(); ++t) {
    const Values ep = probspace::cond_expect(tr, t, pr.at(t));
    const Values edp = probspace::cond_expect(tr, t, pr.delta(t));
    for (int a = 0; a < tr.num_atoms(); ++a) {
      arg << ep.col(a), edp.col(a);
      const ExtReal v = d.M(t, a).value(arg);
      if (!v.finite()) return v;
      acc += tr.prob(a) * v.value();
    }
  }
  const ExtReal fv = d.dual_terminal->value(pr.mean(d.T()));
  if (!fv.finite()) return fv;
  return acc + fv.value();
}

double pair_slack(const BolzaProblem& p, const DualBolzaProblem& d, const AdaptedProcess& x,
                  const AdaptedProcess& pr) {
  if (x.s != pr.s) throw std::invalid_argument("pair_slack: windows differ");
  const ExtReal J = primal_cost(p, x);
  const ExtReal Js = dual_cost(d, pr);
  if (J.is_pos_inf() || Js.is_pos_inf()) return kInf;
  const VectorXd xi = x.mean(x.s);
  const VectorXd eta = -pr.mean(pr.s);
  return J.as_double() + Js.as_double() - xi.dot(eta);
}

DualityReport duality_report(const BolzaProblem& p, int s, const VectorXd& xi, const VectorXd& eta,
                             const Config& cfg, const AdaptedProcess* x, const AdaptedProcess* pr) {
  DualityReport rep;
  rep.V = solve_primal(p, s, xi, cfg).optimal_value;
  const DualBolzaProblem d = dualize(p);
  rep.W = solve_dual(d, s, eta, cfg).optimal_value;
  if (rep.V.is_pos_inf() || rep.W.is_pos_inf()) {
    rep.gap = kInf;
  } else if (rep.V.is_neg_inf() || rep.W.is_neg_inf()) {
    rep.gap = -kInf;
  } else {
    rep.gap = rep.V.value() + rep.W.value() - xi.dot(eta);
  }
  rep.weak_ok = rep.gap >= -1e-7;
  rep.strong = rep.gap <= cfg.tol_gap_strong && rep.gap >= -1e-7;
  if (x && pr) rep.pair_slack = pair_slack(p, d, *x, *pr);
  return rep;
}

}  // namespace sbolza::bolza
