#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sbolza/bolza.hpp"

namespace sbolza::characteristics {

using bolza::BolzaProblem;
using bolza::Config;
using convexcalc::ProjectedConvex;
using Eigen::VectorXd;
using probspace::AdaptedProcess;

struct HamiltonianTrajectory {
  AdaptedProcess x;  // primal schedule on [s, T]
  AdaptedProcess p;  // dual schedule on [s, T]
  std::vector<double> per_stage_residuals;  // index t - s - 1
  double transversality_residual = 0.0;
};

// max over atoms of fy(L_t, (x_{t-1}, dx_t), (E^t dp_t, E^t p_t)).
// Throws std::domain_error naming the atom when L_t is infinite there.
double el_residual(const BolzaProblem& p, const HamiltonianTrajectory& traj, int t);

struct TrajectoryVerdict {
  bool pass = false;
  bool x_adapted = false;
  bool p_adapted = false;
  double x_deviation = 0.0;
  double p_deviation = 0.0;
  std::vector<double> stage_residuals;
  double transversality_residual = 0.0;
  double tol = 1e-6;
  std::string failure;  // empty on pass
};

// Fills the trajectory's residual fields as a side effect.
TrajectoryVerdict check_trajectory(const BolzaProblem& p, HamiltonianTrajectory& traj, double tol = 1e-6);

struct SubgradCertificate {
  int s = 0;
  VectorXd xi, eta;  // E[x_s], -E[p_s]
  ExtReal V, W;
  double fy_gap = 0.0;
  VectorXd fd_left, fd_right;
  std::vector<bool> one_sided;
  bool fy_pass = false;
  bool fd_pass = false;
  bool flagged = true;
};

struct PropagateOptions {
  double fy_tol = 1e-5;
  double fd_step = 1e-4;
  // Room for solver round-off in the slope interval test.
  double fd_slack = 1e-7;
};

std::vector<SubgradCertificate> propagate_subgradient(const BolzaProblem& p, const HamiltonianTrajectory& traj,
                                                      const Config& cfg = {}, const PropagateOptions& opts = {});

struct Recovery {
  HamiltonianTrajectory traj;
  TrajectoryVerdict verdict;
  double gap = 0.0;
};

// Throws std::domain_error when eta is not certified as a subgradient at xi.
Recovery recover_trajectory(const BolzaProblem& p, const VectorXd& xi, const VectorXd& eta, const Config& cfg = {},
                            double tol = 1e-6);

// H_t(x, p) = sup_v { p.v - L_t(x, v) }; -inf when the x-section is empty.
ExtReal hamiltonian_eval(const BolzaProblem& p, int t, int atom, const VectorXd& x, const VectorXd& pvec);

// p -> H_t(x, p) and x -> -H_t(x, p) as projected convex functions.
ProjectedConvex hamiltonian_p_section(const BolzaProblem& p, int t, int atom, const VectorXd& x);
ProjectedConvex hamiltonian_negx_section(const BolzaProblem& p, int t, int atom, const VectorXd& pvec);

}  // namespace sbolza::characteristics
