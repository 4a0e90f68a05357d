#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sbolza/bolza.hpp"
#include "sbolza/characteristics.hpp"

// Linear-convex control problems
//   minimize E sum_t l_t(x_t, u_t) + g(E x_T)
//   x_{t+1} = A x_t + B u_t + w_t,  u_t in U_t,  (x_t, u_t) in D_t,  x_t in X_t
// and their reduction to Bolza form by minimizing out the control.
namespace sbolza::lcontrol {

using bolza::BolzaProblem;
using characteristics::HamiltonianTrajectory;
using characteristics::TrajectoryVerdict;
using convexcalc::SetDescriptor;
using convexcalc::StructuredConvex;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using probspace::AdaptedProcess;
using probspace::NoiseSample;
using probspace::TreePtr;

// Stage data is indexed by t - tau for t in tau..T-1.
struct LCProblem {
  int n = 1, m = 1;
  MatrixXd A, B;
  int tau = 0, T = 1;
  std::vector<StructuredConvex> stage_costs;     // l_t over (x, u)
  std::vector<SetDescriptor> mixed;              // D_t over (x, u)
  std::vector<SetDescriptor> controls;           // U_t over u
  std::vector<SetDescriptor> states;             // X_t over x; x_T only enters through g
  StructuredConvex terminal = StructuredConvex::zero(1);
  std::vector<std::vector<NoiseSample>> noise;   // w_t
  std::vector<NoiseSample> gamma;                // w_{tau-1}; empty means a single zero sample
  VectorXd xi;

  int horizon() const { return T - tau; }
  // Shapes, bounded X_tau, zero-mean noise. Throws std::invalid_argument.
  void validate() const;
  // Empirical covariance of w_t.
  MatrixXd noise_covariance(int t) const;
};

struct LQProblem {
  int n = 1, m = 1;
  MatrixXd A, B, P, R, Q;
  int tau = 0, T = 1;
  VectorXd x_lo, x_hi;  // X_tau box
  std::vector<std::vector<NoiseSample>> noise;
  std::vector<NoiseSample> gamma;
  VectorXd xi;

  void validate() const;
  LCProblem to_lc() const;
};

// Tree over (gamma, w_tau, ..., w_{T-1}) with times tau..T; noise(atom, t - tau)
// is w_{t-1} on the atom's path.
TreePtr lc_tree(const LCProblem& lc);

struct ControlChoice {
  ExtReal value;
  std::optional<VectorXd> u;
};

struct LCReduction {
  BolzaProblem bolza;
  int n = 1, m = 1;
  // Phi_t over (x, v, u), indexed [t - tau - 1][atom]; shared within a cell.
  std::vector<std::vector<std::shared_ptr<const StructuredConvex>>> phi;

  const StructuredConvex& Phi(int t, int atom) const { return *phi.at(t - bolza.tau() - 1).at(atom); }
  // Least-norm minimizing control u_{t-1} for L_t(x, v) on the atom.
  ControlChoice control(int t, int atom, const VectorXd& x, const VectorXd& v) const;
};

// Throws std::invalid_argument when some L_t is -inf at its probe point.
LCReduction lc_to_bolza(const LCProblem& lc);

struct ControlProcess {
  AdaptedProcess u;  // u.at(t) for t in tau..T-1
  probspace::AdaptedCheck adaptedness;
  ExtReal lc_cost;
  ExtReal bolza_cost;
  double mismatch = 0.0;
};

// Throws std::domain_error when a stage has no feasible control.
ControlProcess recover_control(const LCProblem& lc, const LCReduction& red, const AdaptedProcess& x);

// Original objective at a state/control pair; +inf when dynamics or
// constraints fail.
ExtReal lc_cost(const LCProblem& lc, const probspace::ScenarioTree& tree, const AdaptedProcess& x,
                const AdaptedProcess& u);

// Hamiltonians; -inf when x is outside X_{t-1} (concave in x).
ExtReal hamiltonian(const LCProblem& lc, const probspace::ScenarioTree& tree, int t, int atom, const VectorXd& x,
                    const VectorXd& p);
ExtReal hamiltonian(const LQProblem& lq, const probspace::ScenarioTree& tree, int t, int atom, const VectorXd& x,
                    const VectorXd& p);

struct LQSolution {
  HamiltonianTrajectory traj;
  AdaptedProcess u;  // u.at(t) for t in tau..T-1
  double value = 0.0;
  bool degenerate = false;
  double system_residual = 0.0;
  double transversality_error = 0.0;  // |p_T + 2Q E x_T|_inf
  double control_error = 0.0;         // |u_{t-1} - R^-1 B' E^t p_t / 2|_inf
  bool x_tau_interior = true;
  TrajectoryVerdict verdict;
};

// Two-point boundary-value system for the LQ case, solved in one sparse
// factorization. With eta given, E^tau p_tau = -eta replaces E x_tau = xi.
// Throws std::invalid_argument when xi is not interior to X_tau.
LQSolution lq_solve_characteristics(const LQProblem& lq, const VectorXd& xi,
                                    const std::optional<VectorXd>& eta = std::nullopt, double check_tol = 1e-8);

// Expected LQ cost of a state/control pair.
double lq_cost(const LQProblem& lq, const AdaptedProcess& x, const AdaptedProcess& u);

enum class Verdict { pass, fail, inconclusive };
const char* to_string(Verdict v);

struct AssumptionCheck {
  std::string name;
  Verdict status = Verdict::inconclusive;
  std::string evidence;
  std::map<std::string, double> numbers;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  const AssumptionCheck* find(const std::string& name) const;
};

struct AssumptionOptions {
  double eps = 1e-3;
  int state_probes = 8;
  unsigned seed = 7;
};

AssumptionReport check_assumptions(const LCProblem& lc, const AssumptionOptions& opts = {});
AssumptionReport check_assumptions(const BolzaProblem& p, const AssumptionOptions& opts = {});

}  // namespace sbolza::lcontrol
