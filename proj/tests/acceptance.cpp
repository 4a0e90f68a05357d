// Acceptance run: one PASS/FAIL line per criterion. Each criterion produces a
// JSON report; the last criterion reruns the others and compares bytes.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "instances.hpp"
#include "sbolza/characteristics.hpp"
#include "sbolza/io.hpp"
#include "sbolza/lcontrol.hpp"
#include "sbolza/oracleverify.hpp"

using namespace sbolza;
using Eigen::VectorXd;
using io::json;

namespace {

struct Outcome {
  bool pass = false;
  json report;
  std::string summary;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// Shared by criteria 2, 4, 5 and 7.
struct LQCase {
  lcontrol::LQProblem lq;
  bolza::BolzaProblem p;
  lcontrol::LQSolution sol;
  VectorXd eta;
};

// Rebuilt on every call so the determinism rerun repeats the solves.
std::vector<LQCase> lq_cases() {
  std::vector<LQCase> out;
  for (int i = 0; i < 50; ++i) {
    LQCase c;
    c.lq = testing::random_lq(2024, i);
    c.p = lcontrol::lc_to_bolza(c.lq.to_lc()).bolza;
    c.sol = lcontrol::lq_solve_characteristics(c.lq, c.lq.xi);
    c.eta = -c.sol.traj.p.mean(c.p.tau());
    out.push_back(std::move(c));
  }
  return out;
}

Outcome weak_duality() {
  const auto r = oracleverify::fuzz_weak_duality(42, 1000);
  Outcome o;
  o.pass = r.violations == 0 && r.skipped == 0;
  o.report = io::to_json(r);
  o.summary = fmt("violations %.0f, min slack %.3g", r.violations, r.min_slack);
  return o;
}

Outcome strong_duality() {
  Outcome o;
  double worst = 0.0;
  json rows = json::array();
  for (const LQCase& c : lq_cases()) {
    const bolza::SolveReport V = bolza::solve_primal(c.p);
    const bolza::DualBolzaProblem d = bolza::dualize(c.p);
    const bolza::SolveReport W = bolza::solve_dual(d, c.p.tau(), c.eta);
    double gap = std::numeric_limits<double>::infinity();
    if (V.optimal_value.finite() && W.optimal_value.finite())
      gap = std::abs(V.optimal_value.value() + W.optimal_value.value() - c.p.xi.dot(c.eta));
    worst = std::max(worst, gap);
    rows.push_back({{"V", io::to_json(V.optimal_value)},
                    {"W", io::to_json(W.optimal_value)},
                    {"eta", io::to_json(c.eta)},
                    {"gap", io::number(gap)},
                    {"lq_value", io::number(c.sol.value)}});
  }
  o.pass = worst <= 1e-5;
  o.report = {{"instances", rows}, {"worst_gap", io::number(worst)}};
  o.summary = fmt("50 instances, worst |V + W - xi.eta| %.3g", worst);
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  double worst = 0.0;
  json rows = json::array();
  for (int i = 0; i < 20; ++i) {
    const bolza::BolzaProblem p = testing::oracle_instance(77, i);
    const bolza::SolveReport r = bolza::solve_primal(p);
    oracleverify::GridSpec spec = oracleverify::GridSpec::uniform(oracleverify::grid_dims(p, p.start), -4.0, 4.0, 1e-3);
    spec.coarse_step = 0.05;
    spec.refine_radius = 0.06;
    const oracleverify::GridResult g = oracleverify::grid_oracle(p, spec);
    double diff = std::numeric_limits<double>::infinity();
    if (r.optimal_value.finite() && g.value.finite()) diff = std::abs(r.optimal_value.value() - g.value.value());
    worst = std::max(worst, diff);
    rows.push_back({{"solver", io::to_json(r.optimal_value)},
                    {"grid", io::to_json(g.value)},
                    {"dims", spec.dims()},
                    {"grid_accuracy", io::number(g.accuracy)},
                    {"diff", io::number(diff)}});
  }
  o.pass = worst <= 1e-3;
  o.report = {{"instances", rows}, {"worst_diff", io::number(worst)}};
  o.summary = fmt("20 instances, worst |solver - grid| %.3g", worst);
  return o;
}

Outcome forward_characteristics() {
  Outcome o;
  double worst_fy = 0.0;
  int fd_fail = 0, certs = 0;
  json rows = json::array();
  for (const LQCase& c : lq_cases()) {
    characteristics::HamiltonianTrajectory traj = c.sol.traj;
    const auto out = characteristics::propagate_subgradient(c.p, traj);
    json inst = json::array();
    for (const auto& cert : out) {
      ++certs;
      worst_fy = std::max(worst_fy, cert.fy_gap);
      if (!cert.fd_pass) ++fd_fail;
      if (!cert.fy_pass) worst_fy = std::max(worst_fy, 1.0);
      inst.push_back(io::to_json(cert));
    }
    rows.push_back(inst);
  }
  o.pass = worst_fy <= 1e-5 && fd_fail == 0 && certs > 0;
  o.report = {{"certificates", rows}, {"worst_fy_gap", io::number(worst_fy)}, {"fd_failures", fd_fail}};
  o.summary = fmt("%.0f certificates, worst Fenchel-Young gap %.3g", certs, worst_fy) +
              fmt(", %.0f outside the slope interval", fd_fail);
  return o;
}

Outcome converse_characteristics() {
  Outcome o;
  double worst = 0.0;
  int failed = 0;
  json rows = json::array();
  for (const LQCase& c : lq_cases()) {
    try {
      const characteristics::Recovery rec = characteristics::recover_trajectory(c.p, c.p.xi, c.eta);
      double res = rec.verdict.transversality_residual;
      for (double s : rec.verdict.stage_residuals) res = std::max(res, s);
      worst = std::max(worst, res);
      if (!rec.verdict.pass || res > 1e-6) ++failed;
      rows.push_back(io::to_json(rec.verdict));
    } catch (const std::exception& e) {
      ++failed;
      rows.push_back({{"error", e.what()}});
    }
  }
  o.pass = failed == 0 && worst <= 1e-6;
  o.report = {{"verdicts", rows}, {"worst_residual", io::number(worst)}, {"failed", failed}};
  o.summary = fmt("%.0f failures, worst residual %.3g", failed, worst);
  return o;
}

Outcome lq_dynamics() {
  Outcome o;
  const auto det = lcontrol::lq_solve_characteristics(testing::one_step_lq(false), VectorXd::Constant(1, 2.0));
  const auto noisy = lcontrol::lq_solve_characteristics(testing::one_step_lq(true), VectorXd::Constant(1, 2.0));
  double e = 0.0;
  e = std::max(e, std::abs(det.traj.x.at(0)(0, 0) - 2.0));
  e = std::max(e, std::abs(det.traj.x.at(1)(0, 0) - 1.0));
  for (int t = 0; t <= 1; ++t) e = std::max(e, (det.traj.p.at(t).array() + 2.0).abs().maxCoeff());
  e = std::max(e, (det.u.at(0).array() + 1.0).abs().maxCoeff());
  e = std::max(e, std::abs(det.value - 2.0));
  double en = (noisy.u.at(0).array() + 1.0).abs().maxCoeff();
  en = std::max(en, std::abs(noisy.value - 2.0));
  o.pass = e <= 1e-8 && en <= 1e-6;
  o.report = {{"deterministic", io::to_json(det)}, {"noisy", io::to_json(noisy)},
              {"deterministic_error", io::number(e)}, {"noisy_error", io::number(en)}};
  o.summary = fmt("deterministic error %.3g, noisy error %.3g", e, en);
  return o;
}

Outcome transversality() {
  Outcome o;
  double worst = 0.0;
  json errs = json::array();
  for (const LQCase& c : lq_cases()) {
    worst = std::max(worst, c.sol.transversality_error);
    errs.push_back(io::number(c.sol.transversality_error));
  }
  for (bool noisy : {false, true}) {
    const auto s = lcontrol::lq_solve_characteristics(testing::one_step_lq(noisy), VectorXd::Constant(1, 2.0));
    worst = std::max(worst, s.transversality_error);
    errs.push_back(io::number(s.transversality_error));
  }
  o.pass = worst <= 1e-8;
  o.report = {{"errors", errs}, {"worst", io::number(worst)}};
  o.summary = fmt("52 solves, worst |p_T + 2Q E x_T| %.3g", worst);
  return o;
}

Outcome hamiltonian_agreement() {
  Outcome o;
  auto rng = testing::make_rng(8, 0);
  std::uniform_real_distribution<double> U(-6.0, 6.0);
  std::normal_distribution<double> N(0.0, 2.0);
  double worst = 0.0;
  int infinite = 0, mismatched = 0;
  std::vector<lcontrol::LQProblem> lqs;
  std::vector<lcontrol::LCProblem> lcs;
  std::vector<probspace::TreePtr> trees;
  for (int i = 0; i < 20; ++i) {
    lqs.push_back(testing::random_lq(88, i));
    lcs.push_back(lqs.back().to_lc());
    trees.push_back(lcontrol::lc_tree(lcs.back()));
  }
  for (int k = 0; k < 1000; ++k) {
    const int i = k % 20;
    const auto& q = lqs[i];
    const int t = std::uniform_int_distribution<int>(q.tau + 1, q.T)(rng);
    const int atom = std::uniform_int_distribution<int>(0, trees[i]->num_atoms() - 1)(rng);
    VectorXd x(q.n), p(q.n);
    for (int j = 0; j < q.n; ++j) {
      x(j) = U(rng);
      p(j) = N(rng);
    }
    const ExtReal a = lcontrol::hamiltonian(q, *trees[i], t, atom, x, p);
    const ExtReal b = lcontrol::hamiltonian(lcs[i], *trees[i], t, atom, x, p);
    if (a.finite() && b.finite()) {
      worst = std::max(worst, std::abs(a.value() - b.value()));
    } else if (a.kind() == b.kind()) {
      ++infinite;
    } else {
      ++mismatched;
    }
  }
  o.pass = worst <= 1e-7 && mismatched == 0;
  o.report = {{"worst", io::number(worst)}, {"infinite_agreements", infinite}, {"mismatched", mismatched}};
  o.summary = fmt("1000 points, worst |H_LC - H_LQ| %.3g", worst) + fmt(", %.0f both -inf", infinite);
  return o;
}

Outcome convex_substrate() {
  using convexcalc::ProjectedConvex;
  Outcome o;
  auto rng = testing::make_rng(9, 0);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_int_distribution<int> D(1, 3);
  auto vec = [&](int d, double sd) {
    VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = sd * N(rng);
    return v;
  };
  double bic = 0.0;
  int bic_domain = 0;
  for (int k = 0; k < 1000; ++k) {
    VectorXd c;
    const int d = D(rng);
    const auto f = testing::random_structured(rng, d, &c);
    const ProjectedConvex h(f);
    const ProjectedConvex hss = h.conjugate_function().conjugate_function();
    // Half the points near the known feasible point, half anywhere.
    const VectorXd z = (k % 2 == 0) ? VectorXd(c + 0.3 * vec(d, 1.0)) : vec(d, 3.0);
    const ExtReal a = convexcalc::eval(f, z), b = hss.value(z);
    if (a.finite() && b.finite()) {
      bic = std::max(bic, std::abs(a.value() - b.value()) / (1.0 + std::abs(a.value())));
      ++bic_domain;
    } else if (a.kind() != b.kind()) {
      bic = std::max(bic, 1.0);
    }
  }
  double fy = 0.0;
  for (int k = 0; k < 10000; ++k) {
    VectorXd c;
    const int d = D(rng);
    const auto f = testing::random_structured(rng, d, &c);
    const VectorXd z = c + 0.2 * vec(d, 1.0);
    if (!convexcalc::eval(f, z).finite()) continue;
    fy = std::min(fy, convexcalc::fy_residual(f, z, vec(d, 2.0)));
  }
  double expand = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const int d = D(rng);
    const auto f = testing::random_structured(rng, d);
    const VectorXd z1 = vec(d, 3.0), z2 = vec(d, 3.0);
    const double step = std::exp(N(rng));
    const double num = (convexcalc::prox(f, z1, step) - convexcalc::prox(f, z2, step)).norm();
    expand = std::max(expand, num - (z1 - z2).norm());
  }
  o.pass = bic <= 1e-7 && fy >= -1e-9 && expand <= 1e-9;
  o.report = {{"biconjugacy_worst", io::number(bic)},
              {"biconjugacy_finite_points", bic_domain},
              {"fy_min", io::number(fy)},
              {"prox_expansion_max", io::number(expand)}};
  o.summary = fmt("|f** - f| %.3g, min fy residual %.3g", bic, fy) + fmt(", prox expansion %.3g", expand);
  return o;
}

struct Criterion {
  int id;
  double budget;  // seconds
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, 60, weak_duality},           {2, 120, strong_duality},          {3, 300, oracle_equivalence},
      {4, 120, forward_characteristics}, {5, 120, converse_characteristics}, {6, 5, lq_dynamics},
      {7, 120, transversality},        {8, 10, hamiltonian_agreement},    {9, 60, convex_substrate},
  };
  bool all = true;
  std::vector<std::string> first;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    const double secs = seconds_since(t0);
    const bool pass = o.pass && secs <= c.budget;
    all = all && pass;
    first.push_back(io::dump(o.report));
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << o.summary
              << fmt(" (%.1f s, budget %.0f s)", secs, c.budget) << std::endl;
  }

  // Criterion 10: rerun and compare report bytes.
  int differing = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    std::string again;
    try {
      again = io::dump(criteria[k].run().report);
    } catch (const std::exception& e) {
      again = e.what();
    }
    if (again != first[k]) ++differing;
  }
  const bool det = differing == 0;
  all = all && det;
  std::cout << (det ? "PASS" : "FAIL") << " criterion 10: rerun of criteria 1-9, " << differing
            << " reports differ" << std::endl;
  return all ? 0 : 1;
}
