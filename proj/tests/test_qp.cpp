#include <gtest/gtest.h>

#include <random>

#include "sbolza/qp.hpp"

using namespace sbolza::qp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SpMat sp(const MatrixXd& M) { return M.sparseView(); }

}  // namespace

TEST(Qp, EqualityConstrainedLeastSquares) {
  // min 1/2 |w|^2 s.t. w0 + w1 = 2.
  Problem p = Problem::empty(2);
  p.H = sp(MatrixXd::Identity(2, 2));
  p.A = sp(MatrixXd::Ones(1, 2));
  p.b = VectorXd::Constant(1, 2.0);
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.w(0), 1.0, 1e-10);
  EXPECT_NEAR(s.w(1), 1.0, 1e-10);
  EXPECT_NEAR(s.value, 1.0, 1e-10);
  // Gradient plus A' y vanishes.
  EXPECT_NEAR(s.w(0) + s.y_eq(0), 0.0, 1e-10);
}

TEST(Qp, BoundsAndInequalities) {
  // min (w - 3)^2 over w <= 1 via G, w >= -1 via bounds.
  Problem p = Problem::empty(1);
  p.H = sp(MatrixXd::Constant(1, 1, 2.0));
  p.c = VectorXd::Constant(1, -6.0);
  p.c0 = 9.0;
  p.G = sp(MatrixXd::Ones(1, 1));
  p.h = VectorXd::Ones(1);
  p.lo(0) = -1.0;
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.w(0), 1.0, 1e-10);
  EXPECT_NEAR(s.value, 4.0, 1e-10);
  EXPECT_NEAR(s.y_in(0), 4.0, 1e-9);
}

TEST(Qp, DetectsInfeasibility) {
  Problem p = Problem::empty(1);
  p.H = sp(MatrixXd::Identity(1, 1));
  p.A = sp(MatrixXd::Ones(1, 1));
  p.b = VectorXd::Constant(1, 5.0);
  p.hi(0) = 1.0;
  EXPECT_EQ(solve(p).status, Status::infeasible);
}

TEST(Qp, DetectsUnboundedness) {
  Problem p = Problem::empty(2);
  p.H = sp((MatrixXd(2, 2) << 1, 0, 0, 0).finished());
  p.c = (VectorXd(2) << 0, -1).finished();
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::unbounded);
  EXPECT_GT(s.ray(1), 0.0);
}

TEST(Qp, LinearProgramWithDegenerateVertex) {
  // min -w0 - w1 over w0 + w1 <= 1, w0 - w1 <= 1, -w0 + w1 <= 1, w >= 0;
  // the optimal face is a segment.
  Problem p = Problem::empty(2);
  p.H = SpMat(2, 2);
  p.c = -VectorXd::Ones(2);
  p.G = sp((MatrixXd(3, 2) << 1, 1, 1, -1, -1, 1).finished());
  p.h = VectorXd::Ones(3);
  p.lo.setZero();
  Options o;
  o.least_norm = {0, 1};
  const Solution s = solve(p, o);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.value, -1.0, 1e-9);
  EXPECT_NEAR(s.w(0), 0.5, 1e-7);
  EXPECT_NEAR(s.w(1), 0.5, 1e-7);
}

TEST(Qp, NearlySingularCurvatureWithFreeVariables) {
  // Rank-one curvature that rounding makes slightly indefinite, coupled to
  // sign-constrained columns; previously stalled the active-set phase.
  MatrixXd H = MatrixXd::Zero(7, 7);
  H(0, 0) = 3.7734386041076049;
  H(0, 1) = H(1, 0) = 4.2277477846779554;
  H(1, 1) = 4.7367542462179317;
  Problem p = Problem::empty(7);
  p.H = sp(H);
  p.c << 0, 0, 7.4968438603938319, 4.2255379791326479, -1.88707232272986, -0.38865995348720039, 7.5898236152199292;
  MatrixXd A(2, 7);
  A << 3.7734386041076049, 4.2277477846779554, 2.0423417629027023, 1, 0, -1, 0, 4.2277477846779554,
      4.7367542462179317, -0.94323253717510624, 0, 1, 0, -1;
  p.A = sp(A);
  p.b = (VectorXd(2) << 0.81003128792216517, 1.1985127068505208).finished();
  for (int i = 2; i < 7; ++i) p.lo(i) = 0.0;
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_LE(s.primal_residual, 1e-8);
}

TEST(QpProperty, KktOnRandomBoxQps) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + k % 5;
    MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = N(rng);
    Problem p = Problem::empty(n);
    p.H = sp(M.transpose() * M);
    for (int i = 0; i < n; ++i) {
      p.c(i) = 3.0 * N(rng);
      p.lo(i) = -1.0;
      p.hi(i) = 1.0;
    }
    const Solution s = solve(p);
    ASSERT_EQ(s.status, Status::optimal);
    const VectorXd g = M.transpose() * M * s.w + p.c;
    for (int i = 0; i < n; ++i) {
      if (s.w(i) > -1.0 + 1e-8 && s.w(i) < 1.0 - 1e-8) EXPECT_NEAR(g(i), 0.0, 1e-7);
      if (s.w(i) <= -1.0 + 1e-8) EXPECT_GE(g(i), -1e-7);
      if (s.w(i) >= 1.0 - 1e-8) EXPECT_LE(g(i), 1e-7);
    }
  }
}
