#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "sbolza/bolza.hpp"
#include "sbolza/lcontrol.hpp"

// Brute-force checks that never call the solvers they are used against.
namespace sbolza::oracleverify {

using bolza::BolzaProblem;
using Eigen::VectorXd;

struct GridSpec {
  std::vector<double> lower, upper, step;
  double cap = 1e7;
  // When positive, a coarse pass at this step locates the minimum and a fine
  // pass at `step` searches a window of +-refine_radius around it. The window
  // is re-centred until its minimizer is interior, which for a convex
  // objective makes it global.
  double coarse_step = 0.0;
  double refine_radius = 0.0;

  static GridSpec uniform(int dims, double lo, double hi, double step);
  int dims() const { return static_cast<int>(step.size()); }
  double count() const;  // estimated evaluations
  // Throws std::invalid_argument; budget overruns name the required budget.
  void validate() const;
};

struct GridResult {
  ExtReal value;
  VectorXd argmin;
  double accuracy = 0.0;  // sum over axes of step/2 times a local slope estimate
  std::int64_t evaluations = 0;
};

using Objective = std::function<ExtReal(const VectorXd&)>;

GridResult grid_minimize(const Objective& f, const GridSpec& spec);

// Decision variables: x_s on all but the last cell of partitions[s] (the last
// is fixed by E x_s = xi), then dx_t per cell of partitions[t] for t > s.
int grid_dims(const BolzaProblem& p, int s);
Objective bolza_objective(const BolzaProblem& p, int s, const VectorXd& xi);
// Requires stage functions without lifted variables.
GridResult grid_oracle(const BolzaProblem& p, const GridSpec& spec);
GridResult grid_oracle(const BolzaProblem& p, int s, const VectorXd& xi, const GridSpec& spec);

// Decision variables: x_tau on all but the last cell, then u_t per cell of
// partitions[t] for t in tau..T-1 (the control is chosen with information
// up to time t).
int grid_dims(const lcontrol::LCProblem& lc);
Objective lc_objective(const lcontrol::LCProblem& lc);
GridResult grid_oracle_lc(const lcontrol::LCProblem& lc, const GridSpec& spec);

struct SlopeInterval {
  VectorXd left, right;
  std::vector<bool> one_sided;
  // left_i - slack (1 + |g_i|) <= g_i <= right_i + slack (1 + |g_i|)
  bool contains(const VectorXd& g, double slack = 0.0) const;
};

// Difference quotients of V at xi along each axis. Infinite probes give an
// unbounded side and set one_sided. Throws std::domain_error if V(xi) is not
// finite.
SlopeInterval finite_diff_subgradient(const Objective& V, const VectorXd& xi, double h = 1e-4);

struct FuzzLimits {
  int max_atoms = 8;
  int max_horizon = 3;
  int max_n = 2;
};

struct FuzzInstance {
  BolzaProblem problem;
  probspace::AdaptedProcess x, p;
};

// Instance `index` of the stream for `seed`. Stage costs are quadratics with
// eigenvalues in [0.1, 10] (some zeroed) plus a random linear term, over boxes
// with half-widths in [0.5, 5] around the sampled x, sometimes cut by a
// half-space through a slack point; probabilities are symmetric Dirichlet(1).
FuzzInstance random_instance(std::uint64_t seed, int index, const FuzzLimits& limits);

struct FuzzCase {
  int index = 0;
  double slack = 0.0;
  FuzzInstance instance;
};

struct FuzzReport {
  std::uint64_t seed = 0;
  int count = 0;
  FuzzLimits limits;
  int violations = 0;
  int skipped = 0;  // pairs that were not feasible after construction
  double min_slack = 0.0;
  std::vector<double> slacks;
  std::vector<FuzzCase> failures;
};

FuzzReport fuzz_weak_duality(std::uint64_t seed, int count, const FuzzLimits& limits = {}, double tol = 1e-7);

}  // namespace sbolza::oracleverify
