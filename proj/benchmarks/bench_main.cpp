#include <benchmark/benchmark.h>

#include "instances.hpp"
#include "sbolza/characteristics.hpp"
#include "sbolza/convexcalc.hpp"
#include "sbolza/oracleverify.hpp"
#include "sbolza/qp.hpp"

using namespace sbolza;

namespace {

// Dense box QP with n variables and n/2 general inequalities.
qp::Problem box_qp(int n) {
  auto rng = testing::make_rng(1, static_cast<std::uint64_t>(n));
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd M(n, n), G(n / 2, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = N(rng);
  for (int i = 0; i < n / 2; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = N(rng);
  qp::Problem p = qp::Problem::empty(n);
  p.H = (M.transpose() * M / n + 0.1 * Eigen::MatrixXd::Identity(n, n)).sparseView();
  for (int i = 0; i < n; ++i) {
    p.c(i) = 3.0 * N(rng);
    p.lo(i) = -1.0;
    p.hi(i) = 1.0;
  }
  p.G = G.sparseView();
  p.h = Eigen::VectorXd::Constant(n / 2, 0.5);
  return p;
}

void BM_QpSolve(benchmark::State& st) {
  const qp::Problem p = box_qp(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(qp::solve(p).value);
}
BENCHMARK(BM_QpSolve)->Arg(8)->Arg(32)->Arg(128);

void BM_Conjugate(benchmark::State& st) {
  auto rng = testing::make_rng(2, 0);
  const convexcalc::StructuredConvex f = testing::random_structured(rng, 3);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(3, 0.7);
  for (auto _ : st) benchmark::DoNotOptimize(convexcalc::conjugate(f, y).value);
}
BENCHMARK(BM_Conjugate);

void BM_SolvePrimalLq(benchmark::State& st) {
  const lcontrol::LQProblem lq = testing::random_lq(2024, static_cast<int>(st.range(0)));
  const bolza::BolzaProblem p = lcontrol::lc_to_bolza(lq.to_lc()).bolza;
  for (auto _ : st) benchmark::DoNotOptimize(bolza::solve_primal(p).optimal_value);
}
BENCHMARK(BM_SolvePrimalLq)->DenseRange(0, 3);

void BM_LqCharacteristics(benchmark::State& st) {
  const lcontrol::LQProblem lq = testing::random_lq(2024, static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(lcontrol::lq_solve_characteristics(lq, lq.xi).value);
}
BENCHMARK(BM_LqCharacteristics)->DenseRange(0, 3);

void BM_ValueAndSubgradient(benchmark::State& st) {
  const bolza::BolzaProblem p = testing::quad_problem();
  for (auto _ : st) benchmark::DoNotOptimize(bolza::value_and_subgradient(p, 0, p.xi).value);
}
BENCHMARK(BM_ValueAndSubgradient);

void BM_FuzzInstance(benchmark::State& st) {
  int i = 0;
  for (auto _ : st) benchmark::DoNotOptimize(oracleverify::fuzz_weak_duality(17 + i++, 1).violations);
}
BENCHMARK(BM_FuzzInstance);

void BM_GridOracle(benchmark::State& st) {
  const bolza::BolzaProblem p = testing::quad_problem();
  const oracleverify::GridSpec g = oracleverify::GridSpec::uniform(1, -10.0, 10.0, 1e-3);
  for (auto _ : st) benchmark::DoNotOptimize(oracleverify::grid_oracle(p, g).value);
}
BENCHMARK(BM_GridOracle);

}  // namespace

BENCHMARK_MAIN();
