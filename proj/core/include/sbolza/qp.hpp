#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

// Convex quadratic programs
//   minimize 1/2 w'Hw + c'w + c0  s.t.  A w = b,  G w <= h,  lo <= w <= hi
// with H symmetric positive semidefinite (possibly singular).
namespace sbolza::qp {

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

struct Problem {
  SpMat H;
  Eigen::VectorXd c;
  double c0 = 0.0;
  SpMat A;
  Eigen::VectorXd b;
  SpMat G;
  Eigen::VectorXd h;
  Eigen::VectorXd lo, hi;

  int n() const { return static_cast<int>(c.size()); }
  // Empty constraint blocks and infinite bounds of the right sizes.
  static Problem empty(int n);
};

enum class Status { optimal, infeasible, unbounded, max_iter };
const char* to_string(Status s);

struct Options {
  double tol = 1e-10;
  int max_iter = 4000;
  // When nonempty, the returned minimizer has least Euclidean norm over these
  // coordinates among all minimizers.
  std::vector<int> least_norm;
  // Optional starting point (original variables).
  const Eigen::VectorXd* warm = nullptr;
  // Internal: skip the infeasibility and unboundedness certificates.
  bool certify = true;
};

struct Solution {
  Status status = Status::max_iter;
  Eigen::VectorXd w;
  double value = 0.0;
  Eigen::VectorXd y_eq;  // multipliers of A w = b, Lagrangian f + y'(Aw - b)
  Eigen::VectorXd y_in;  // multipliers of G w <= h (nonnegative)
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  Eigen::VectorXd ray;          // recession direction when unbounded
  double infeasibility = 0.0;   // least-squares constraint residual when infeasible
};

Solution solve(const Problem& p, const Options& opts = {});

}  // namespace sbolza::qp
