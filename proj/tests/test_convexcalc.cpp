#include <gtest/gtest.h>

#include "instances.hpp"
#include "sbolza/convexcalc.hpp"

using namespace sbolza;
using namespace sbolza::convexcalc;

namespace {

VectorXd v1(double a) { return VectorXd::Constant(1, a); }
VectorXd v2(double a, double b) { return (VectorXd(2) << a, b).finished(); }
MatrixXd m1(double a) { return MatrixXd::Constant(1, 1, a); }

StructuredConvex square() { return StructuredConvex::quadratic(m1(1.0)); }
StructuredConvex unit_box() { return StructuredConvex::indicator(SetDescriptor::box(v1(-1), v1(1)), 1); }

// Phi(x, v, u) = u^2 + indicator(v = x + u), optionally with |u| <= 1.
StructuredConvex dynamics_phi(bool boxed) {
  MatrixXd Q = MatrixXd::Zero(3, 3);
  Q(2, 2) = 1.0;
  MatrixXd A(1, 3);
  A << 1, -1, 1;
  std::vector<SetDescriptor> parts{SetDescriptor::affine(A, VectorXd::Zero(1))};
  if (boxed) {
    const double inf = std::numeric_limits<double>::infinity();
    parts.push_back(SetDescriptor::box((VectorXd(3) << -inf, -inf, -1).finished(),
                                       (VectorXd(3) << inf, inf, 1).finished()));
  }
  return StructuredConvex(Q, VectorXd::Zero(3), 0.0, SetDescriptor::intersection(parts));
}

}  // namespace

TEST(EvalSubgrad, Quadratic) {
  const EvalResult r = eval_subgrad(square(), v1(3));
  EXPECT_DOUBLE_EQ(r.value.value(), 9.0);
  ASSERT_TRUE(r.subgrad);
  EXPECT_DOUBLE_EQ((*r.subgrad)(0), 6.0);
}

TEST(EvalSubgrad, IndicatorInterior) {
  const EvalResult r = eval_subgrad(unit_box(), v1(0));
  EXPECT_DOUBLE_EQ(r.value.value(), 0.0);
  ASSERT_TRUE(r.subgrad);
  EXPECT_DOUBLE_EQ((*r.subgrad)(0), 0.0);
  EXPECT_TRUE(r.active_lower.empty());
  EXPECT_TRUE(r.active_upper.empty());
}

TEST(EvalSubgrad, OutsideDomain) {
  const EvalResult r = eval_subgrad(unit_box(), v1(2));
  EXPECT_TRUE(r.value.is_pos_inf());
  EXPECT_FALSE(r.subgrad);
}

TEST(Conjugate, TextbookCases) {
  EXPECT_NEAR(conjugate(square(), v1(2)).value.value(), 1.0, 1e-12);
  EXPECT_NEAR(conjugate(unit_box(), v1(-3)).value.value(), 3.0, 1e-12);
}

TEST(Conjugate, HalfLineQuadraticMatchesGridSearch) {
  const StructuredConvex f(m1(1.0), v1(0), 0.0,
                           SetDescriptor::box(v1(0), v1(std::numeric_limits<double>::infinity())));
  for (double y : {-5.0, -0.5, 0.0, 1.0, 3.0}) {
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 1000000; ++k) {
      const double z = 1e-4 * k;
      best = std::max(best, y * z - z * z);
    }
    EXPECT_NEAR(conjugate(f, v1(y)).value.value(), best, 1e-7) << "y=" << y;
  }
}

TEST(Conjugate, UnboundedSupIsPlusInfinity) {
  const ConjResult r = conjugate(StructuredConvex::zero(1), v1(1));
  EXPECT_TRUE(r.value.is_pos_inf());
  EXPECT_TRUE(r.unbounded);
}

TEST(Prox, Cases) {
  EXPECT_NEAR(prox(square(), v1(3), 1.0)(0), 1.0, 1e-12);
  EXPECT_NEAR(prox(unit_box(), v1(5), 0.7)(0), 1.0, 1e-12);
  EXPECT_NEAR((prox(StructuredConvex::zero(2), v2(1.5, -2), 3.0) - v2(1.5, -2)).norm(), 0.0, 1e-12);
}

TEST(InfProject, SubstitutesDynamics) {
  const ProjectResult r = inf_project(dynamics_phi(false), {0, 1}, v2(1, 3));
  EXPECT_NEAR(r.value.value(), 4.0, 1e-10);
  ASSERT_TRUE(r.minimizer);
  EXPECT_NEAR((*r.minimizer)(0), 2.0, 1e-10);
}

TEST(InfProject, InfeasibleControl) {
  EXPECT_TRUE(inf_project(dynamics_phi(true), {0, 1}, v2(0, 2)).value.is_pos_inf());
}

TEST(InfProject, FreeQuadratic) {
  MatrixXd Q = MatrixXd::Zero(3, 3);
  Q(2, 2) = 1.0;
  const ProjectResult r = inf_project(StructuredConvex::quadratic(Q), {0, 1}, v2(5, -7));
  EXPECT_NEAR(r.value.value(), 0.0, 1e-12);
  EXPECT_NEAR((*r.minimizer)(0), 0.0, 1e-12);
}

TEST(InfProject, LeastNormMinimizer) {
  // Flat in u: every u in [-1, 2] is optimal, least norm picks 0.
  const StructuredConvex f(MatrixXd::Zero(2, 2), VectorXd::Zero(2), 0.0,
                           SetDescriptor::box(v2(-5, -1), v2(5, 2)));
  const ProjectResult r = inf_project(f, {0}, v1(1));
  EXPECT_NEAR((*r.minimizer)(0), 0.0, 1e-9);
}

TEST(FyResidual, Cases) {
  EXPECT_NEAR(fy_residual(square(), v1(1), v1(2)), 0.0, 1e-12);
  EXPECT_NEAR(fy_residual(square(), v1(1), v1(0)), 1.0, 1e-12);
  EXPECT_NEAR(fy_residual(unit_box(), v1(1), v1(7)), 0.0, 1e-12);
  EXPECT_THROW(fy_residual(unit_box(), v1(2), v1(0)), std::domain_error);
}

TEST(SaddleSubgradCheck, Cases) {
  // h(x, p) = p^2/4 - x^2 at (1, 2).
  const ProjectedConvex hp(StructuredConvex::quadratic(m1(0.25), v1(0), -1.0));
  const ProjectedConvex negh(StructuredConvex::quadratic(m1(1.0), v1(0), -1.0));
  auto r = saddle_subgrad_check(hp, negh, v1(1), v1(2), v1(-2), v1(1));
  EXPECT_NEAR(r.first, 0.0, 1e-12);
  EXPECT_NEAR(r.second, 0.0, 1e-12);
  r = saddle_subgrad_check(hp, negh, v1(1), v1(2), v1(0), v1(0));
  EXPECT_NEAR(r.first, 1.0, 1e-12);
  EXPECT_NEAR(r.second, 1.0, 1e-12);
  // h(x, p) = x p at (0, 0): both sections are zero.
  const ProjectedConvex zero(StructuredConvex::zero(1));
  r = saddle_subgrad_check(zero, zero, v1(0), v1(0), v1(0), v1(0));
  EXPECT_NEAR(r.first, 0.0, 1e-12);
  EXPECT_NEAR(r.second, 0.0, 1e-12);
}

TEST(ProjectedConvex, SignedPermutationAndTilt) {
  MatrixXd Q = MatrixXd::Zero(2, 2);
  Q(0, 0) = 1.0;
  Q(1, 1) = 2.0;
  const ProjectedConvex h(StructuredConvex::quadratic(Q, v2(1, 0)));
  const ProjectedConvex g = h.signed_permuted({1, 0}, v2(-1, 1));
  // g(y) = h(S y) with (S y)[1] = -y0, (S y)[0] = y1.
  EXPECT_NEAR(g.value(v2(2, 3)).value(), h.value(v2(3, -2)).value(), 1e-12);
  EXPECT_NEAR(h.tilted(v2(1, 1)).value(v2(2, 3)).value(), h.value(v2(2, 3)).value() + 5.0, 1e-12);
}

TEST(ProjectedConvex, EliminatedMatchesInfProject) {
  const ProjectedConvex h(dynamics_phi(false), 2);
  EXPECT_NEAR(h.value(v2(1, 3)).value(), 4.0, 1e-10);
  const ProjectedConvex e = h.eliminated({0});
  EXPECT_NEAR(e.value(v1(3)).value(), 0.0, 1e-10);
}

class StructuredFamily : public ::testing::TestWithParam<int> {};

TEST_P(StructuredFamily, FenchelYoungAndConjugateArgmax) {
  auto rng = sbolza::testing::make_rng(31, GetParam());
  std::normal_distribution<double> N(0.0, 1.0);
  for (int k = 0; k < 40; ++k) {
    const int d = 1 + k % 3;
    VectorXd c;
    const StructuredConvex f = sbolza::testing::random_structured(rng, d, &c);
    VectorXd y(d);
    for (int i = 0; i < d; ++i) y(i) = 2.0 * N(rng);
    EXPECT_GE(fy_residual(f, c, y), -1e-9);
    const ConjResult r = conjugate(f, y);
    if (r.value.finite() && r.argmax) EXPECT_NEAR(fy_residual(f, *r.argmax, y), 0.0, 1e-7);
  }
}

TEST_P(StructuredFamily, ProxIsFirmlyNonexpansive) {
  auto rng = sbolza::testing::make_rng(32, GetParam());
  std::normal_distribution<double> N(0.0, 3.0);
  for (int k = 0; k < 40; ++k) {
    const int d = 1 + k % 3;
    const StructuredConvex f = sbolza::testing::random_structured(rng, d);
    VectorXd a(d), b(d);
    for (int i = 0; i < d; ++i) a(i) = N(rng), b(i) = N(rng);
    const VectorXd pa = prox(f, a, 0.5), pb = prox(f, b, 0.5);
    EXPECT_LE((pa - pb).squaredNorm(), (pa - pb).dot(a - b) + 1e-9);
    EXPECT_TRUE(f.contains(pa));
  }
}

TEST_P(StructuredFamily, BiconjugateRecoversFunction) {
  auto rng = sbolza::testing::make_rng(33, GetParam());
  std::normal_distribution<double> N(0.0, 0.3);
  for (int k = 0; k < 20; ++k) {
    const int d = 1 + k % 3;
    VectorXd c;
    const StructuredConvex f = sbolza::testing::random_structured(rng, d, &c);
    const ProjectedConvex h(f);
    VectorXd z = c;
    for (int i = 0; i < d; ++i) z(i) += N(rng);
    const ExtReal a = eval(f, z), b = h.conjugate_function().conjugate_function().value(z);
    ASSERT_EQ(a.kind(), b.kind());
    if (a.finite()) EXPECT_NEAR(a.value(), b.value(), 1e-7 * (1.0 + std::abs(a.value())));
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, StructuredFamily, ::testing::Range(0, 5));
