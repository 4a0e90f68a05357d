#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "sbolza/extreal.hpp"
#include "sbolza/qp.hpp"

namespace sbolza::convexcalc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Relative feasibility tolerance used when deciding domain membership.
inline constexpr double kFeasTol = 1e-9;

struct SetDescriptor {
  enum class Kind { all, box, affine, polyhedron, intersection };
  Kind kind = Kind::all;
  VectorXd lower, upper;  // box, +-inf allowed
  MatrixXd A;             // affine: A z = b, polyhedron: A z <= b
  VectorXd b;
  std::vector<SetDescriptor> parts;

  static SetDescriptor all();
  static SetDescriptor box(VectorXd lower, VectorXd upper);
  static SetDescriptor affine(MatrixXd A, VectorXd b);
  static SetDescriptor polyhedron(MatrixXd A, VectorXd b);
  static SetDescriptor intersection(std::vector<SetDescriptor> parts);
};

// Flattened constraint system of a descriptor.
struct FlatSet {
  VectorXd lo, hi;
  MatrixXd Aeq;
  VectorXd beq;
  MatrixXd Ain;
  VectorXd bin;

  int dim() const { return static_cast<int>(lo.size()); }
  bool box_only() const { return Aeq.rows() == 0 && Ain.rows() == 0; }
  // Largest scaled violation; <= kFeasTol counts as feasible.
  double violation(const VectorXd& z) const;
  SetDescriptor descriptor() const;
};

FlatSet flatten(const SetDescriptor& s, int dim);

// f(z) = z'Qz + lin'z + const + indicator(domain). No 1/2 on the quadratic.
class StructuredConvex {
 public:
  StructuredConvex(MatrixXd quad, VectorXd lin, double constant, SetDescriptor domain);
  // Skips the nonempty-domain probe; used for functions derived from checked ones.
  static StructuredConvex derived(MatrixXd quad, VectorXd lin, double constant, FlatSet domain);

  static StructuredConvex zero(int dim);
  static StructuredConvex quadratic(MatrixXd quad, VectorXd lin = {}, double constant = 0.0);
  static StructuredConvex indicator(SetDescriptor domain, int dim);

  int dim() const { return static_cast<int>(lin_.size()); }
  const MatrixXd& quad() const { return quad_; }
  const VectorXd& lin() const { return lin_; }
  double constant() const { return const_; }
  const FlatSet& flat() const { return flat_; }
  SetDescriptor domain() const { return flat_.descriptor(); }
  bool contains(const VectorXd& z) const { return flat_.violation(z) <= kFeasTol; }
  double smooth_value(const VectorXd& z) const { return z.dot(quad_ * z) + lin_.dot(z) + const_; }
  bool quad_diagonal() const;

  // QP data: minimize 1/2 w'(2Q)w + lin'w + const over the domain.
  qp::Problem to_qp() const;

 private:
  StructuredConvex() = default;
  MatrixXd quad_;
  VectorXd lin_;
  double const_ = 0.0;
  FlatSet flat_;
};

struct EvalResult {
  ExtReal value;
  std::optional<VectorXd> subgrad;
  std::vector<int> active_lower, active_upper;  // box faces
  std::vector<int> active_rows;                 // inequality rows
};

EvalResult eval_subgrad(const StructuredConvex& f, const VectorXd& z);
ExtReal eval(const StructuredConvex& f, const VectorXd& z);

struct ConjResult {
  ExtReal value;
  bool unbounded = false;         // value +inf because the sup diverges
  std::optional<VectorXd> argmax;
};

ConjResult conjugate(const StructuredConvex& f, const VectorXd& y);

VectorXd prox(const StructuredConvex& f, const VectorXd& z, double step);

struct ProjectResult {
  ExtReal value;
  std::optional<VectorXd> minimizer;  // eliminated coordinates
  std::optional<VectorXd> subgrad;    // subgradient in the kept coordinates
  bool neg_inf = false;
};

// inf over the complement of `kept` of f(kept_point, .), least-norm minimizer.
ProjectResult inf_project(const StructuredConvex& f, const std::vector<int>& kept, const VectorXd& kept_point);

// f(z) + f*(y) - z.y; throws std::domain_error when f(z) = +inf.
double fy_residual(const StructuredConvex& f, const VectorXd& z, const VectorXd& y);

// h(y) = inf_u phi(y, u), y being the first `kept` coordinates of phi.
class ProjectedConvex {
 public:
  ProjectedConvex(StructuredConvex phi, int kept);
  explicit ProjectedConvex(StructuredConvex f);

  int dim() const { return kept_; }
  int lifted() const { return phi_.dim() - kept_; }
  const StructuredConvex& phi() const { return phi_; }

  ProjectResult evaluate(const VectorXd& y) const;
  ExtReal value(const VectorXd& y) const { return evaluate(y).value; }
  ConjResult conjugate(const VectorXd& y) const;

  // Exact representation of h* as another projected function.
  ProjectedConvex conjugate_function() const;
  // y -> h(S y) with (S y)[perm[i]] = signs[i] * y[i].
  ProjectedConvex signed_permuted(const std::vector<int>& perm, const VectorXd& signs) const;
  // Section with the listed kept coordinates frozen.
  ProjectedConvex fixed(const std::vector<int>& idx, const VectorXd& values) const;
  // h(y) + a.y
  ProjectedConvex tilted(const VectorXd& a) const;
  // Minimize over the listed kept coordinates as well.
  ProjectedConvex eliminated(const std::vector<int>& idx) const;

 private:
  StructuredConvex phi_;
  int kept_;
};

double fy_residual(const ProjectedConvex& f, const VectorXd& z, const VectorXd& y);

// Residual pair certifying (a, v) in the concave-convex subdifferential of
// h at (x, p): h_p is p -> h(x, p), negh_x is x -> -h(x, p). Returns
// (fy(h_p, p, v), fy(negh_x, x, -a)).
std::pair<double, double> saddle_subgrad_check(const ProjectedConvex& h_p, const ProjectedConvex& negh_x,
                                               const VectorXd& x, const VectorXd& p, const VectorXd& a,
                                               const VectorXd& v);

}  // namespace sbolza::convexcalc
