#include "instances.hpp"

#include <algorithm>
#include <cmath>

namespace sbolza::testing {

using convexcalc::ProjectedConvex;
using convexcalc::SetDescriptor;
using convexcalc::StructuredConvex;
using probspace::NoiseSample;

namespace {

MatrixXd normal(std::mt19937_64& rng, int r, int c, double sd = 1.0) {
  std::normal_distribution<double> N(0.0, sd);
  MatrixXd M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = N(rng);
  return M;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double lattice(double v, double step) { return std::round(v / step) * step; }

// Zero-mean two-point or degenerate noise.
std::vector<NoiseSample> noise_stage(std::mt19937_64& rng, int n, bool branch) {
  if (!branch) return {{VectorXd::Zero(n), 1.0}};
  const VectorXd w = normal(rng, n, 1, 0.7);
  return {{w, 0.5}, {-w, 0.5}};
}

}  // namespace

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

probspace::TreePtr single_atom_tree(int tau, int T) {
  std::vector<std::vector<NoiseSample>> stages(T - tau, {{VectorXd::Zero(1), 1.0}});
  return std::make_shared<const probspace::ScenarioTree>(probspace::build_tree(stages, tau));
}

bolza::FnPtr fn(const StructuredConvex& f, int kept) { return std::make_shared<const ProjectedConvex>(f, kept); }

bolza::BolzaProblem quad_problem(double xi) {
  bolza::BolzaProblem p;
  p.tree = single_atom_tree();
  p.n = 1;
  MatrixXd Q = MatrixXd::Zero(2, 2);
  Q(1, 1) = 1.0;
  p.lagrangians = {{fn(StructuredConvex::quadratic(Q), 2)}};
  p.terminal = fn(StructuredConvex::quadratic(MatrixXd::Ones(1, 1)), 1);
  p.xi = VectorXd::Constant(1, xi);
  p.start = 0;
  return p;
}

bolza::BolzaProblem flat_problem(double xi) {
  bolza::BolzaProblem p;
  p.tree = single_atom_tree();
  p.n = 1;
  p.lagrangians = {{fn(StructuredConvex::zero(2), 2)}};
  p.terminal = fn(StructuredConvex::zero(1), 1);
  p.xi = VectorXd::Constant(1, xi);
  p.start = 0;
  return p;
}

lcontrol::LQProblem one_step_lq(bool noisy) {
  lcontrol::LQProblem q;
  q.n = q.m = 1;
  q.A = q.B = q.R = q.Q = MatrixXd::Ones(1, 1);
  q.P = MatrixXd::Zero(1, 1);
  q.tau = 0;
  q.T = 1;
  q.x_lo = VectorXd::Constant(1, -10.0);
  q.x_hi = VectorXd::Constant(1, 10.0);
  if (noisy) q.noise = {{{VectorXd::Constant(1, 1.0), 0.5}, {VectorXd::Constant(1, -1.0), 0.5}}};
  else q.noise = {{{VectorXd::Zero(1), 1.0}}};
  q.xi = VectorXd::Constant(1, 2.0);
  return q;
}

lcontrol::LQProblem random_lq(std::uint64_t seed, int index) {
  auto rng = make_rng(seed, static_cast<std::uint64_t>(index));
  lcontrol::LQProblem q;
  q.n = pick(rng, 1, 2);
  q.m = pick(rng, 1, 2);
  q.tau = pick(rng, 0, 1);
  q.T = q.tau + pick(rng, 1, 2);
  const int n = q.n, m = q.m;
  q.A = MatrixXd::Identity(n, n) + normal(rng, n, n, 0.3);
  q.B = normal(rng, n, m);
  const MatrixXd Mp = normal(rng, n, n, 0.5);
  q.P = uniform(rng, 0.0, 1.0) < 0.5 ? MatrixXd::Zero(n, n) : MatrixXd(Mp.transpose() * Mp);
  const MatrixXd Mr = normal(rng, m, m, 0.7);
  q.R = Mr.transpose() * Mr + 0.5 * MatrixXd::Identity(m, m);
  const MatrixXd Mq = normal(rng, n, n, 0.7);
  q.Q = Mq.transpose() * Mq;
  q.x_lo = VectorXd::Constant(n, -5.0);
  q.x_hi = VectorXd::Constant(n, 5.0);
  int atoms = 1;
  if (uniform(rng, 0.0, 1.0) < 0.5) {
    const VectorXd g = normal(rng, n, 1, 0.5);
    q.gamma = {{g, 0.5}, {-g, 0.5}};
    atoms = 2;
  }
  for (int t = q.tau; t < q.T; ++t) {
    const bool branch = atoms * 2 <= 8 && uniform(rng, 0.0, 1.0) < 0.7;
    q.noise.push_back(noise_stage(rng, n, branch));
    if (branch) atoms *= 2;
  }
  q.xi = VectorXd(n);
  for (int i = 0; i < n; ++i) q.xi(i) = uniform(rng, -2.0, 2.0);
  return q;
}

namespace {

// PSD quadratic on the lattice with a linear term, over a lattice box.
StructuredConvex lattice_stage(std::mt19937_64& rng, int d, double box) {
  MatrixXd M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) M(i, j) = lattice(uniform(rng, -1.0, 1.0), 0.25);
  MatrixXd Q = M.transpose() * M + 0.25 * MatrixXd::Identity(d, d);
  VectorXd l(d);
  for (int i = 0; i < d; ++i) l(i) = lattice(uniform(rng, -2.0, 2.0), 0.25);
  const SetDescriptor dom = SetDescriptor::box(VectorXd::Constant(d, -box), VectorXd::Constant(d, box));
  return StructuredConvex(Q, l, 0.0, dom);
}

}  // namespace

bolza::BolzaProblem oracle_instance(std::uint64_t seed, int index) {
  auto rng = make_rng(seed, static_cast<std::uint64_t>(index));
  bolza::BolzaProblem p;
  // Shapes with at most three grid dimensions.
  const int shape = index % 5;
  std::vector<double> prob;
  std::vector<probspace::Partition> parts;
  switch (shape) {
    case 0:  // one atom, n = 1, two stages
      p.n = 1;
      prob = {1.0};
      parts = {{{0}}, {{0}}, {{0}}};
      break;
    case 1:  // one atom, n = 2, one stage
      p.n = 2;
      prob = {1.0};
      parts = {{{0}}, {{0}}};
      break;
    case 2:  // two atoms split at the first stage
      p.n = 1;
      prob = {0.5, 0.5};
      parts = {{{0, 1}}, {{0}, {1}}};
      break;
    case 3:  // split at the second stage
      p.n = 1;
      prob = {0.5, 0.5};
      parts = {{{0, 1}}, {{0, 1}}, {{0}, {1}}};
      break;
    default:  // x_s itself random, mean-constrained
      p.n = 1;
      prob = {0.25, 0.75};
      parts = {{{0}, {1}}, {{0}, {1}}};
      break;
  }
  p.tree = std::make_shared<const probspace::ScenarioTree>(prob, 0, parts);
  const int n = p.n;
  const double box = 2.0 + lattice(uniform(rng, 0.0, 2.0), 0.5);
  for (int t = 1; t <= p.tree->T(); ++t) {
    std::vector<bolza::FnPtr> row(p.tree->num_atoms());
    for (int c = 0; c < p.tree->num_cells(t); ++c) {
      const bolza::FnPtr f = fn(lattice_stage(rng, 2 * n, box), 2 * n);
      for (int a : p.tree->partition(t)[c]) row[a] = f;
    }
    p.lagrangians.push_back(row);
  }
  MatrixXd G = MatrixXd::Identity(n, n) * lattice(uniform(rng, 0.5, 2.0), 0.25);
  VectorXd gl(n);
  for (int i = 0; i < n; ++i) gl(i) = lattice(uniform(rng, -1.0, 1.0), 0.25);
  p.terminal = fn(StructuredConvex::quadratic(G, gl), n);
  p.xi = VectorXd(n);
  for (int i = 0; i < n; ++i) p.xi(i) = lattice(uniform(rng, -1.0, 1.0), 0.5);
  p.start = 0;
  p.validate();
  return p;
}

StructuredConvex random_structured(std::mt19937_64& rng, int d, VectorXd* inside) {
  const VectorXd c = normal(rng, d, 1);
  MatrixXd M = normal(rng, d, d);
  if (d > 1 && uniform(rng, 0.0, 1.0) < 0.3) M.row(0).setZero();  // singular
  const double scale = uniform(rng, 0.0, 1.0) < 0.15 ? 0.0 : uniform(rng, 0.1, 2.0);
  const MatrixXd Q = scale * M.transpose() * M;
  const VectorXd l = normal(rng, d, 1);
  std::vector<SetDescriptor> parts;
  const int kind = pick(rng, 0, 4);
  if (kind >= 1) {
    VectorXd lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
      lo(i) = uniform(rng, 0.0, 1.0) < 0.2 ? -std::numeric_limits<double>::infinity() : c(i) - uniform(rng, 0.2, 3.0);
      hi(i) = uniform(rng, 0.0, 1.0) < 0.2 ? std::numeric_limits<double>::infinity() : c(i) + uniform(rng, 0.2, 3.0);
    }
    parts.push_back(SetDescriptor::box(lo, hi));
  }
  if (kind == 2 || kind == 4) {
    const MatrixXd A = normal(rng, 1, d);
    const VectorXd b = A * c + VectorXd::Constant(1, uniform(rng, 0.1, 1.0));
    parts.push_back(SetDescriptor::polyhedron(A, b));
  }
  if (kind == 3 && d > 1) {
    const MatrixXd A = normal(rng, 1, d);
    parts.push_back(SetDescriptor::affine(A, A * c));
  }
  if (inside) *inside = c;
  const SetDescriptor dom = parts.empty() ? SetDescriptor::all() : SetDescriptor::intersection(parts);
  return StructuredConvex(Q, l, uniform(rng, -1.0, 1.0), dom);
}

}  // namespace sbolza::testing
