#include <gtest/gtest.h>

#include "instances.hpp"
#include "sbolza/characteristics.hpp"

using namespace sbolza;
using namespace sbolza::characteristics;
using convexcalc::SetDescriptor;
using convexcalc::StructuredConvex;
using probspace::Schedule;
using sbolza::testing::fn;

namespace {

VectorXd v1(double a) { return VectorXd::Constant(1, a); }
VectorXd v2(double a, double b) { return (VectorXd(2) << a, b).finished(); }

HamiltonianTrajectory quad_traj(double pconst) {
  const BolzaProblem q = sbolza::testing::quad_problem();
  HamiltonianTrajectory h{AdaptedProcess::zeros(q.tree, 1, 0, Schedule::primal),
                          AdaptedProcess::zeros(q.tree, 1, 0, Schedule::dual), {}, 0.0};
  h.x.at(0).setConstant(2.0);
  h.x.at(1).setConstant(1.0);
  h.p.at(0).setConstant(pconst);
  h.p.at(1).setConstant(pconst);
  return h;
}

// L_t = v^2 on a single atom for two steps, g = y^2: V_0 = y^2/3, V_1 = y^2/2.
BolzaProblem two_step_chain() {
  BolzaProblem p = sbolza::testing::quad_problem();
  p.tree = sbolza::testing::single_atom_tree(0, 2);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(2, 2);
  Q(1, 1) = 1.0;
  p.lagrangians = {{fn(StructuredConvex::quadratic(Q), 2)}, {fn(StructuredConvex::quadratic(Q), 2)}};
  return p;
}

BolzaProblem with_lagrangian(const StructuredConvex& L) {
  BolzaProblem p = sbolza::testing::quad_problem();
  p.lagrangians = {{fn(L, 2)}};
  return p;
}

}  // namespace

TEST(ElResidual, OnAndOffTheCharacteristic) {
  const BolzaProblem q = sbolza::testing::quad_problem();
  HamiltonianTrajectory on = quad_traj(-2.0);
  EXPECT_NEAR(el_residual(q, on, 1), 0.0, 1e-10);
  HamiltonianTrajectory off = quad_traj(0.0);
  EXPECT_NEAR(el_residual(q, off, 1), 1.0, 1e-10);
  const BolzaProblem f = sbolza::testing::flat_problem();
  HamiltonianTrajectory flat{AdaptedProcess::zeros(f.tree, 1, 0, Schedule::primal),
                             AdaptedProcess::zeros(f.tree, 1, 0, Schedule::dual), {}, 0.0};
  EXPECT_NEAR(el_residual(f, flat, 1), 0.0, 1e-12);
}

TEST(CheckTrajectory, PassAndFail) {
  const BolzaProblem q = sbolza::testing::quad_problem();
  HamiltonianTrajectory good = quad_traj(-2.0);
  const TrajectoryVerdict v = check_trajectory(q, good);
  EXPECT_TRUE(v.pass) << v.failure;
  EXPECT_NEAR(v.transversality_residual, 0.0, 1e-10);
  HamiltonianTrajectory bad = quad_traj(-2.5);
  const TrajectoryVerdict w = check_trajectory(q, bad);
  EXPECT_FALSE(w.pass);
  EXPECT_FALSE(w.failure.empty());
  EXPECT_GT(w.transversality_residual, 1e-3);
}

TEST(CheckTrajectory, RejectsNonAdaptedMultiplier) {
  const lcontrol::LQProblem lq = sbolza::testing::one_step_lq(true);
  const lcontrol::LCReduction red = lcontrol::lc_to_bolza(lq.to_lc());
  lcontrol::LQSolution sol = lcontrol::lq_solve_characteristics(lq, lq.xi);
  ASSERT_TRUE(sol.verdict.pass) << sol.verdict.failure;
  HamiltonianTrajectory t = sol.traj;
  t.p.at(t.p.T())(0, 0) += 0.5;
  const TrajectoryVerdict v = check_trajectory(red.bolza, t);
  EXPECT_FALSE(v.pass);
  EXPECT_FALSE(v.p_adapted);
}

TEST(PropagateSubgradient, SingleStep) {
  const BolzaProblem q = sbolza::testing::quad_problem();
  const auto certs = propagate_subgradient(q, quad_traj(-2.0));
  ASSERT_FALSE(certs.empty());
  EXPECT_NEAR(certs.front().eta(0), 2.0, 1e-9);
  EXPECT_TRUE(certs.front().fy_pass);
  EXPECT_TRUE(certs.front().fd_pass);
}

TEST(PropagateSubgradient, FlatProblem) {
  const BolzaProblem f = sbolza::testing::flat_problem();
  HamiltonianTrajectory t{AdaptedProcess::zeros(f.tree, 1, 0, Schedule::primal),
                          AdaptedProcess::zeros(f.tree, 1, 0, Schedule::dual), {}, 0.0};
  t.x.at(0).setConstant(1.0);
  t.x.at(1).setConstant(1.0);
  const auto certs = propagate_subgradient(f, t);
  ASSERT_FALSE(certs.empty());
  EXPECT_NEAR(certs.front().eta(0), 0.0, 1e-12);
  EXPECT_TRUE(certs.front().fy_pass);
}

TEST(PropagateSubgradient, TwoStepChainMatchesDerivative) {
  const BolzaProblem p = two_step_chain();
  const Recovery r = recover_trajectory(p, v1(2), v1(4.0 / 3.0));
  ASSERT_TRUE(r.verdict.pass) << r.verdict.failure;
  const auto certs = propagate_subgradient(p, r.traj);
  ASSERT_EQ(certs.size(), 2u);
  for (const SubgradCertificate& c : certs) {
    EXPECT_NEAR(c.eta(0), 4.0 / 3.0, 1e-6) << "s=" << c.s;
    EXPECT_TRUE(c.fd_pass);
    EXPECT_TRUE(c.fy_pass);
    const double h = 1e-4;
    const double Vs = [&](double y) { return c.s == 0 ? y * y / 3.0 : y * y / 2.0; }(c.xi(0) + h);
    const double Vm = [&](double y) { return c.s == 0 ? y * y / 3.0 : y * y / 2.0; }(c.xi(0) - h);
    EXPECT_NEAR(c.eta(0), (Vs - Vm) / (2 * h), 1e-3);
  }
}

TEST(RecoverTrajectory, Cases) {
  const BolzaProblem q = sbolza::testing::quad_problem();
  const Recovery r = recover_trajectory(q, v1(2), v1(2));
  EXPECT_TRUE(r.verdict.pass) << r.verdict.failure;
  EXPECT_NEAR(r.traj.x.at(1)(0, 0), 1.0, 1e-8);
  EXPECT_THROW(recover_trajectory(q, v1(2), v1(0)), std::domain_error);
  const Recovery f = recover_trajectory(sbolza::testing::flat_problem(), v1(1), v1(0));
  EXPECT_TRUE(f.verdict.pass) << f.verdict.failure;
}

TEST(HamiltonianEval, Cases) {
  const BolzaProblem a = with_lagrangian(StructuredConvex::quadratic(Eigen::MatrixXd::Identity(2, 2)));
  EXPECT_NEAR(hamiltonian_eval(a, 1, 0, v1(1), v1(2)).value(), 0.0, 1e-10);
  const BolzaProblem b = with_lagrangian(StructuredConvex::indicator(
      SetDescriptor::affine((Eigen::MatrixXd(1, 2) << 0, 1).finished(), v1(0)), 2));
  EXPECT_NEAR(hamiltonian_eval(b, 1, 0, v1(3), v1(5)).value(), 0.0, 1e-12);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(2, 2);
  Q(1, 1) = 1.0;
  const double inf = std::numeric_limits<double>::infinity();
  const BolzaProblem c =
      with_lagrangian(StructuredConvex(Q, VectorXd::Zero(2), 0.0, SetDescriptor::box(v2(-1, -inf), v2(1, inf))));
  EXPECT_TRUE(hamiltonian_eval(c, 1, 0, v1(2), v1(1)).is_neg_inf());
}

TEST(HamiltonianProperty, ConcaveInXConvexInP) {
  for (int i = 0; i < 10; ++i) {
    const lcontrol::LQProblem lq = sbolza::testing::random_lq(404, i);
    const lcontrol::LCReduction red = lcontrol::lc_to_bolza(lq.to_lc());
    const BolzaProblem& p = red.bolza;
    const int t = p.tau() + 1, n = p.n;
    auto rng = sbolza::testing::make_rng(404, i);
    std::normal_distribution<double> N(0.0, 1.0);
    auto rnd = [&] {
      VectorXd z(n);
      for (int k = 0; k < n; ++k) z(k) = N(rng);
      return z;
    };
    for (int k = 0; k < 5; ++k) {
      const VectorXd x0 = rnd(), x1 = rnd(), p0 = rnd(), p1 = rnd();
      const double h00 = hamiltonian_eval(p, t, 0, x0, p0).value();
      const double hm = hamiltonian_eval(p, t, 0, 0.5 * (x0 + x1), p0).value();
      const double h10 = hamiltonian_eval(p, t, 0, x1, p0).value();
      EXPECT_GE(hm, 0.5 * (h00 + h10) - 1e-7 * (1 + std::abs(hm)));
      const double hp = hamiltonian_eval(p, t, 0, x0, 0.5 * (p0 + p1)).value();
      const double h01 = hamiltonian_eval(p, t, 0, x0, p1).value();
      EXPECT_LE(hp, 0.5 * (h00 + h01) + 1e-7 * (1 + std::abs(hp)));
    }
  }
}
