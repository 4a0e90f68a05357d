#include <gtest/gtest.h>

#include "instances.hpp"
#include "sbolza/bolza.hpp"
#include "sbolza/oracleverify.hpp"

using namespace sbolza;
using namespace sbolza::bolza;
using convexcalc::SetDescriptor;
using convexcalc::StructuredConvex;
using sbolza::testing::fn;
using sbolza::testing::single_atom_tree;

namespace {

VectorXd v1(double a) { return VectorXd::Constant(1, a); }
VectorXd v2(double a, double b) { return (VectorXd(2) << a, b).finished(); }

// L = indicator(v = 0), g = indicator({0}).
BolzaProblem pinned_problem(double xi) {
  BolzaProblem p = sbolza::testing::flat_problem(xi);
  p.lagrangians = {{fn(StructuredConvex::indicator(
                           SetDescriptor::affine((Eigen::MatrixXd(1, 2) << 0, 1).finished(), v1(0)), 2),
                       2)}};
  p.terminal = fn(StructuredConvex::indicator(SetDescriptor::box(v1(0), v1(0)), 1), 1);
  return p;
}

// L = v^2 + indicator(|x| <= 1), g = y^2.
BolzaProblem boxed_start(double xi) {
  BolzaProblem p = sbolza::testing::quad_problem(xi);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(2, 2);
  Q(1, 1) = 1.0;
  const double inf = std::numeric_limits<double>::infinity();
  p.lagrangians = {{fn(StructuredConvex(Q, VectorXd::Zero(2), 0.0, SetDescriptor::box(v2(-1, -inf), v2(1, inf))), 2)}};
  return p;
}

// Single atom, constant multiplier, f = indicator({0}).
DualBolzaProblem constant_dual(double eta) {
  DualBolzaProblem d;
  d.tree = single_atom_tree();
  d.n = 1;
  d.dual_lagrangians = {{fn(StructuredConvex::indicator(
                                SetDescriptor::affine((Eigen::MatrixXd(1, 2) << 0, 1).finished(), v1(0)), 2),
                            2)}};
  d.dual_terminal = fn(StructuredConvex::indicator(SetDescriptor::box(v1(0), v1(0)), 1), 1);
  d.eta = v1(eta);
  return d;
}

}  // namespace

TEST(Dualize, ConjugatesStageAndTerminal) {
  const DualBolzaProblem d = dualize(sbolza::testing::quad_problem());
  EXPECT_NEAR(d.M(1, 0).value(v2(2, 0)).value(), 1.0, 1e-10);
  EXPECT_TRUE(d.M(1, 0).value(v2(2, 1)).is_pos_inf());
  EXPECT_NEAR(d.dual_terminal->value(v1(2)).value(), 1.0, 1e-10);
}

TEST(Dualize, SymmetricQuadratic) {
  BolzaProblem p = sbolza::testing::quad_problem();
  p.lagrangians = {{fn(StructuredConvex::quadratic(Eigen::MatrixXd::Identity(2, 2)), 2)}};
  const DualBolzaProblem d = dualize(p);
  EXPECT_NEAR(d.M(1, 0).value(v2(2, 4)).value(), 5.0, 1e-9);
}

TEST(SolvePrimal, Quadratic) {
  const SolveReport r = solve_primal(sbolza::testing::quad_problem());
  ASSERT_EQ(r.status, qp::Status::optimal);
  EXPECT_NEAR(r.optimal_value.value(), 2.0, 1e-9);
  ASSERT_TRUE(r.trajectory);
  EXPECT_NEAR(r.trajectory->at(1)(0, 0), 1.0, 1e-9);
}

TEST(SolvePrimal, Flat) {
  const SolveReport r = solve_primal(sbolza::testing::flat_problem());
  EXPECT_EQ(r.status, qp::Status::optimal);
  EXPECT_NEAR(r.optimal_value.value(), 0.0, 1e-12);
}

TEST(SolvePrimal, Infeasible) {
  const SolveReport r = solve_primal(pinned_problem(1.0));
  EXPECT_TRUE(r.optimal_value.is_pos_inf());
  EXPECT_EQ(r.status, qp::Status::infeasible);
}

TEST(SolveDual, Cases) {
  const DualBolzaProblem d = dualize(sbolza::testing::quad_problem());
  EXPECT_NEAR(solve_dual(d, 0, v1(2)).optimal_value.value(), 2.0, 1e-9);
  EXPECT_NEAR(solve_dual(constant_dual(0.0)).optimal_value.value(), 0.0, 1e-12);
  EXPECT_TRUE(solve_dual(constant_dual(1.0)).optimal_value.is_pos_inf());
}

TEST(ValueAndSubgradient, Quadratic) {
  const SubgradResult r = value_and_subgradient(sbolza::testing::quad_problem(), 0, v1(2));
  EXPECT_NEAR(r.value.value(), 2.0, 1e-9);
  ASSERT_TRUE(r.eta);
  EXPECT_NEAR((*r.eta)(0), 2.0, 1e-6);
}

TEST(ValueAndSubgradient, Flat) {
  const SubgradResult r = value_and_subgradient(sbolza::testing::flat_problem(), 0, v1(1));
  ASSERT_TRUE(r.eta);
  EXPECT_NEAR((*r.eta)(0), 0.0, 1e-9);
  EXPECT_NEAR(r.residual, 0.0, 1e-9);
}

TEST(ValueAndSubgradient, OutsideDomainThrows) {
  EXPECT_THROW(value_and_subgradient(boxed_start(2.0), 0, v1(2)), std::domain_error);
}

TEST(TiltedPrimal, Cases) {
  EXPECT_NEAR(tilted_primal(sbolza::testing::quad_problem(), v1(2)).value.value(), -2.0, 1e-8);
  EXPECT_NEAR(tilted_primal(sbolza::testing::quad_problem(), v1(0)).value.value(), 0.0, 1e-8);
  const TiltResult t = tilted_primal(sbolza::testing::flat_problem(), v1(1));
  EXPECT_TRUE(t.value.is_neg_inf());
  EXPECT_TRUE(t.consistent);
}

TEST(DualityReport, StrongAndWeak) {
  const BolzaProblem q = sbolza::testing::quad_problem();
  const DualityReport a = duality_report(q, 0, v1(2), v1(2));
  EXPECT_TRUE(a.weak_ok);
  EXPECT_TRUE(a.strong);
  EXPECT_NEAR(a.gap, 0.0, 1e-8);
  const DualityReport b = duality_report(q, 0, v1(2), v1(0));
  EXPECT_TRUE(b.weak_ok);
  EXPECT_FALSE(b.strong);
  EXPECT_NEAR(b.V.value(), 2.0, 1e-9);
  EXPECT_NEAR(b.W.value(), 0.0, 1e-9);
  EXPECT_NEAR(b.gap, 2.0, 1e-8);
}

TEST(Costs, OptimalPairIsTight) {
  const BolzaProblem q = sbolza::testing::quad_problem();
  const DualBolzaProblem d = dualize(q);
  AdaptedProcess x = AdaptedProcess::zeros(q.tree, 1, 0, probspace::Schedule::primal);
  x.at(0).setConstant(2.0);
  x.at(1).setConstant(1.0);
  AdaptedProcess p = AdaptedProcess::zeros(q.tree, 1, 0, probspace::Schedule::dual);
  p.at(0).setConstant(-2.0);
  p.at(1).setConstant(-2.0);
  EXPECT_NEAR(primal_cost(q, x).value(), 2.0, 1e-12);
  EXPECT_NEAR(dual_cost(d, p).value(), 2.0, 1e-9);
  EXPECT_NEAR(pair_slack(q, d, x, p), 0.0, 1e-9);
  p.at(1).setConstant(-2.5);
  EXPECT_TRUE(dual_cost(d, p).is_pos_inf());
}

TEST(WeakDualityProperty, FuzzStream) {
  const oracleverify::FuzzReport r = oracleverify::fuzz_weak_duality(11, 150);
  EXPECT_EQ(r.violations, 0);
  EXPECT_GE(r.min_slack, -1e-7);
}

TEST(StrongDualityProperty, RandomLqValuesMatch) {
  for (int i = 0; i < 10; ++i) {
    const lcontrol::LQProblem lq = sbolza::testing::random_lq(77, i);
    const lcontrol::LCReduction red = lcontrol::lc_to_bolza(lq.to_lc());
    const SubgradResult sg = value_and_subgradient(red.bolza, red.bolza.tau(), lq.xi);
    ASSERT_TRUE(sg.eta) << "case " << i;
    const DualityReport d = duality_report(red.bolza, red.bolza.tau(), lq.xi, *sg.eta);
    EXPECT_TRUE(d.strong) << "case " << i << " gap " << d.gap;
  }
}

TEST(SolverProperty, ObjectiveTraceIsNonincreasing) {
  auto check = [](const SolveReport& r, const std::string& label) {
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
      const double prev = r.objective_trace[k - 1];
      EXPECT_LE(r.objective_trace[k], prev + 1e-12 * (1.0 + std::abs(prev))) << label << " sweep " << k;
    }
  };
  for (int i = 0; i < 20; ++i) {
    const lcontrol::LQProblem lq = sbolza::testing::random_lq(606, i);
    check(solve_primal(lcontrol::lc_to_bolza(lq.to_lc()).bolza), "lq " + std::to_string(i));
  }
  for (int i = 0; i < 30; ++i) {
    const oracleverify::FuzzInstance f = oracleverify::random_instance(607, i, {});
    check(solve_primal(f.problem), "fuzz " + std::to_string(i));
  }
}

TEST(TerminalDual, MatchesConjugateOfTerminal) {
  const BolzaProblem q = sbolza::testing::quad_problem();
  const DualBolzaProblem d = dualize(q);
  for (double eta : {-3.0, -0.5, 0.0, 1.0, 4.0})
    EXPECT_NEAR(terminal_dual_value(d, v1(eta)).value(), q.terminal->conjugate(v1(eta)).value.value(), 1e-9)
        << eta;
}
