#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "sbolza/convexcalc.hpp"
#include "sbolza/extreal.hpp"
#include "sbolza/qp.hpp"

// Separable convex programs over a vector z of tree node values:
//   minimize  tilt.z + const + sum_i weight_i * fn_i(K_i z + offset_i)
//   s.t.      Ceq z = deq.
// Every fn_i is an inf-projection of a structured convex function, so the
// whole program lifts to one sparse QP.
namespace sbolza::program {

using convexcalc::ProjectedConvex;
using Eigen::VectorXd;

struct Term {
  double weight = 1.0;
  std::shared_ptr<const ProjectedConvex> fn;
  qp::SpMat K;
  VectorXd offset;
};

struct Program {
  int nz = 0;
  std::vector<Term> terms;
  qp::SpMat Ceq;
  VectorXd deq;
  VectorXd tilt;
  double constant = 0.0;
};

struct Options {
  double tol = 1e-10;
  // Proximal-point sweeps before the final exact solve.
  int prox_steps = 3;
  int max_iter = 4000;
};

struct Result {
  qp::Status status = qp::Status::max_iter;
  ExtReal value;
  VectorXd z;
  std::vector<VectorXd> term_args;      // K_i z + offset_i
  std::vector<VectorXd> term_subgrads;  // element of d fn_i at term_args[i]
  VectorXd eq_mult;                     // Lagrangian f + mult'(Ceq z - deq)
  int iterations = 0;
  double stationarity = 0.0;
  double feasibility = 0.0;
  std::vector<double> trace;            // objective after each proximal sweep
};

Result solve(const Program& prog, const Options& opts = {});

// Objective at a given z, evaluated term by term (+inf off the domain).
ExtReal objective(const Program& prog, const VectorXd& z);

}  // namespace sbolza::program
