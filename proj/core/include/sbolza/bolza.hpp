#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "sbolza/convexcalc.hpp"
#include "sbolza/extreal.hpp"
#include "sbolza/probspace.hpp"
#include "sbolza/program.hpp"
#include "sbolza/qp.hpp"

namespace sbolza::bolza {

using convexcalc::ProjectedConvex;
using Eigen::VectorXd;
using probspace::AdaptedProcess;
using probspace::TreePtr;
using FnPtr = std::shared_ptr<const ProjectedConvex>;

struct Config {
  double tol_stationarity = 1e-8;
  double tol_feasibility = 1e-10;
  double tol_certificate = 1e-6;
  double tol_gap_strong = 1e-5;
  int max_iter = 200000;
};

// Stage functions are indexed [t - tau - 1][atom] for t in tau+1..T.
struct BolzaProblem {
  TreePtr tree;
  int n = 1;
  std::vector<std::vector<FnPtr>> lagrangians;  // L_t over (x, v)
  FnPtr terminal;                               // g, applied to E[x_T]
  VectorXd xi;
  int start = 0;

  int tau() const { return tree->tau(); }
  int T() const { return tree->T(); }
  const ProjectedConvex& L(int t, int atom) const { return *lagrangians.at(t - tau() - 1).at(atom); }
  // Shapes, window, and cell-constancy of the stage functions.
  void validate() const;
};

struct DualBolzaProblem {
  TreePtr tree;
  int n = 1;
  std::vector<std::vector<FnPtr>> dual_lagrangians;  // M_t over (p, q)
  FnPtr dual_terminal;                               // f(b) = g*(-b)
  VectorXd eta;
  int start = 0;
  // (t, atom) stages whose conjugate is +inf everywhere.
  std::vector<std::pair<int, int>> flagged;

  int tau() const { return tree->tau(); }
  int T() const { return tree->T(); }
  const ProjectedConvex& M(int t, int atom) const { return *dual_lagrangians.at(t - tau() - 1).at(atom); }
};

struct SolveReport {
  ExtReal optimal_value;
  std::optional<AdaptedProcess> trajectory;
  int iterations = 0;
  double stationarity_residual = 0.0;
  double feasibility_residual = 0.0;
  qp::Status status = qp::Status::max_iter;
  std::vector<double> objective_trace;
  // Primal solves: adjoint process read off the multipliers, and the
  // multiplier of the mean constraint.
  std::optional<AdaptedProcess> adjoint;
  VectorXd mean_multiplier;
};

DualBolzaProblem dualize(const BolzaProblem& p);

SolveReport solve_primal(const BolzaProblem& p, const Config& cfg = {});
SolveReport solve_primal(const BolzaProblem& p, int s, const VectorXd& xi, const Config& cfg = {});
SolveReport solve_dual(const DualBolzaProblem& d, const Config& cfg = {});
SolveReport solve_dual(const DualBolzaProblem& d, int s, const VectorXd& eta, const Config& cfg = {});

// W_T(eta) = f(-eta).
ExtReal terminal_dual_value(const DualBolzaProblem& d, const VectorXd& eta);

struct SubgradResult {
  ExtReal value;
  std::optional<VectorXd> eta;  // certified subgradient
  VectorXd candidate;           // uncertified candidate when the gap is too large
  ExtReal dual_value;
  double residual = 0.0;
  SolveReport primal;
};

// Throws std::domain_error when V_s(xi) is not finite.
SubgradResult value_and_subgradient(const BolzaProblem& p, int s, const VectorXd& xi, const Config& cfg = {});

struct TiltResult {
  ExtReal value;       // inf_y V_tau(y) - y.eta
  ExtReal dual_value;  // W_tau(eta)
  double mismatch = 0.0;
  bool consistent = false;
};

TiltResult tilted_primal(const BolzaProblem& p, const VectorXd& eta, const Config& cfg = {});

// Objectives at given processes (+inf off the domain).
ExtReal primal_cost(const BolzaProblem& p, const AdaptedProcess& x);
ExtReal dual_cost(const DualBolzaProblem& d, const AdaptedProcess& pr);

struct DualityReport {
  ExtReal V, W;
  double gap = 0.0;
  bool weak_ok = true;
  bool strong = false;
  std::optional<double> pair_slack;
};

DualityReport duality_report(const BolzaProblem& p, int s, const VectorXd& xi, const VectorXd& eta,
                             const Config& cfg = {}, const AdaptedProcess* x = nullptr,
                             const AdaptedProcess* pr = nullptr);

// J(x) + J*(p) - E[x_s].(-E[p_s]) for a feasible pair.
double pair_slack(const BolzaProblem& p, const DualBolzaProblem& d, const AdaptedProcess& x,
                  const AdaptedProcess& pr);

}  // namespace sbolza::bolza
