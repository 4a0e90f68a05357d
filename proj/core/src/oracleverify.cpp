#include "sbolza/oracleverify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace sbolza::oracleverify {

namespace {

using convexcalc::SetDescriptor;
using convexcalc::StructuredConvex;
using probspace::AdaptedProcess;
using probspace::Schedule;
using probspace::ScenarioTree;
using probspace::Values;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::int64_t axis_points(double lo, double hi, double step) {
  return static_cast<std::int64_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

struct Box {
  std::vector<double> lo, hi, step;
  std::vector<std::int64_t> pts;
  std::int64_t total = 1;

  Box(std::vector<double> l, std::vector<double> h, std::vector<double> s)
      : lo(std::move(l)), hi(std::move(h)), step(std::move(s)) {
    for (std::size_t i = 0; i < lo.size(); ++i) {
      pts.push_back(axis_points(lo[i], hi[i], step[i]));
      total *= pts.back();
    }
  }

  VectorXd point(std::int64_t idx) const {
    VectorXd z(static_cast<Eigen::Index>(lo.size()));
    for (std::size_t i = lo.size(); i-- > 0;) {
      z(i) = lo[i] + static_cast<double>(idx % pts[i]) * step[i];
      idx /= pts[i];
    }
    return z;
  }
};

struct Best {
  double value = kInf;
  std::int64_t index = -1;
};

// Exhaustive scan; ties go to the smallest index so threads merge
// deterministically.
Best scan(const Objective& f, const Box& box) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<unsigned>(std::min<std::int64_t>(hw, std::max<std::int64_t>(1, box.total / 4096)));
  std::vector<Best> part(workers);
  auto run = [&](unsigned w) {
    const std::int64_t a = box.total * w / workers, b = box.total * (w + 1) / workers;
    Best best;
    for (std::int64_t i = a; i < b; ++i) {
      const ExtReal v = f(box.point(i));
      if (v.is_neg_inf()) {
        best = {-kInf, i};
        break;
      }
      if (v.finite() && v.value() < best.value) best = {v.value(), i};
    }
    part[w] = best;
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> th;
    for (unsigned w = 0; w < workers; ++w) th.emplace_back(run, w);
    for (auto& t : th) t.join();
  }
  Best out;
  for (const Best& b : part) {
    if (b.index < 0) continue;
    if (out.index < 0 || b.value < out.value) out = b;
  }
  return out;
}

bool on_window_edge(const Box& box, const VectorXd& z, const GridSpec& spec) {
  for (int i = 0; i < z.size(); ++i) {
    const bool at_lo = z(i) <= box.lo[i] + 0.5 * box.step[i];
    const bool at_hi = z(i) >= box.lo[i] + static_cast<double>(box.pts[i] - 1) * box.step[i] - 0.5 * box.step[i];
    if (at_lo && box.lo[i] > spec.lower[i] + 0.5 * spec.step[i]) return true;
    if (at_hi && box.hi[i] < spec.upper[i] - 0.5 * spec.step[i]) return true;
  }
  return false;
}

}  // namespace

GridSpec GridSpec::uniform(int dims, double lo, double hi, double step) {
  GridSpec g;
  g.lower.assign(dims, lo);
  g.upper.assign(dims, hi);
  g.step.assign(dims, step);
  return g;
}

double GridSpec::count() const {
  double fine = 1.0, coarse = 1.0;
  for (int i = 0; i < dims(); ++i) {
    if (coarse_step > 0.0) {
      coarse *= static_cast<double>(axis_points(lower[i], upper[i], coarse_step));
      fine *= std::floor(2.0 * std::min(refine_radius, 0.5 * (upper[i] - lower[i])) / step[i] + 1e-9) + 1.0;
    } else {
      fine *= static_cast<double>(axis_points(lower[i], upper[i], step[i]));
    }
  }
  return coarse_step > 0.0 ? coarse + fine : fine;
}

void GridSpec::validate() const {
  if (lower.size() != upper.size() || lower.size() != step.size())
    throw std::invalid_argument("grid bounds and steps differ in length");
  for (int i = 0; i < dims(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i])
      throw std::invalid_argument("grid bounds must be finite and ordered");
    if (!(step[i] > 0.0)) throw std::invalid_argument("grid step must be positive");
  }
  if (coarse_step > 0.0 && !(refine_radius > 0.0))
    throw std::invalid_argument("refinement needs a positive radius");
  const double c = count();
  if (c > cap) {
    std::ostringstream os;
    os << "grid needs " << c << " evaluations, budget is " << cap;
    throw std::invalid_argument(os.str());
  }
}

GridResult grid_minimize(const Objective& f, const GridSpec& spec) {
  spec.validate();
  const int d = spec.dims();
  GridResult res;
  if (d == 0) {
    res.value = f(VectorXd());
    res.evaluations = 1;
    res.argmin = VectorXd();
    return res;
  }
  Box box(spec.lower, spec.upper, spec.step);
  if (spec.coarse_step > 0.0) {
    const Box coarse(spec.lower, spec.upper, std::vector<double>(d, spec.coarse_step));
    Best b = scan(f, coarse);
    res.evaluations += coarse.total;
    if (b.index < 0 || b.value == -kInf) {
      res.value = b.index < 0 ? ExtReal::pos_inf() : ExtReal::neg_inf();
      if (b.index >= 0) res.argmin = coarse.point(b.index);
      return res;
    }
    VectorXd centre = coarse.point(b.index);
    for (int round = 0; round < 50; ++round) {
      std::vector<double> lo(d), hi(d);
      for (int i = 0; i < d; ++i) {
        // Window aligned with the fine lattice of the full box.
        const double k = std::round((centre(i) - spec.lower[i]) / spec.step[i]);
        const double r = std::floor(spec.refine_radius / spec.step[i]);
        lo[i] = spec.lower[i] + std::max(0.0, k - r) * spec.step[i];
        hi[i] = std::min(spec.upper[i], spec.lower[i] + (k + r) * spec.step[i]);
      }
      box = Box(lo, hi, spec.step);
      b = scan(f, box);
      res.evaluations += box.total;
      if (b.index < 0) break;
      const VectorXd z = box.point(b.index);
      if (!on_window_edge(box, z, spec) || b.value == -kInf) break;
      centre = z;
    }
    if (b.index < 0) {
      res.value = ExtReal::pos_inf();
      return res;
    }
    res.value = ExtReal::from_double(b.value);
    res.argmin = box.point(b.index);
  } else {
    const Best b = scan(f, box);
    res.evaluations += box.total;
    if (b.index < 0) {
      res.value = ExtReal::pos_inf();
      return res;
    }
    res.value = ExtReal::from_double(b.value);
    res.argmin = box.point(b.index);
  }
  if (!res.value.finite()) return res;
  // Local slope along each axis from the neighbouring grid points.
  double acc = 0.0;
  for (int i = 0; i < d; ++i) {
    double slope = 0.0;
    for (double sgn : {-1.0, 1.0}) {
      VectorXd z = res.argmin;
      z(i) += sgn * spec.step[i];
      if (z(i) < spec.lower[i] - 1e-12 || z(i) > spec.upper[i] + 1e-12) continue;
      const ExtReal v = f(z);
      ++res.evaluations;
      if (v.finite()) slope = std::max(slope, std::abs(v.value() - res.value.value()) / spec.step[i]);
    }
    acc += 0.5 * spec.step[i] * slope;
  }
  res.accuracy = acc;
  return res;
}

int grid_dims(const BolzaProblem& p, int s) {
  const auto& tr = *p.tree;
  int d = p.n * (tr.num_cells(s) - 1);
  for (int t = s + 1; t <= tr.T(); ++t) d += p.n * tr.num_cells(t);
  return d;
}

Objective bolza_objective(const BolzaProblem& p, int s, const VectorXd& xi) {
  for (int t = s + 1; t <= p.T(); ++t)
    for (int a = 0; a < p.tree->num_atoms(); ++a)
      if (p.L(t, a).lifted() > 0) throw std::invalid_argument("grid oracle needs explicit stage functions");
  if (p.terminal->lifted() > 0) throw std::invalid_argument("grid oracle needs an explicit terminal function");
  return [&p, s, xi](const VectorXd& z) -> ExtReal {
    const auto& tr = *p.tree;
    const int n = p.n, N = tr.num_atoms();
    const int K = tr.num_cells(s);
    int off = 0;
    Values x(n, N);
    VectorXd last = xi;
    std::vector<VectorXd> cellx(K);
    for (int c = 0; c + 1 < K; ++c) {
      cellx[c] = z.segment(off, n);
      off += n;
      last -= tr.cell_prob(s, c) * cellx[c];
    }
    cellx[K - 1] = last / tr.cell_prob(s, K - 1);
    for (int a = 0; a < N; ++a) x.col(a) = cellx[tr.cell_of(s, a)];
    double acc = 0.0;
    VectorXd arg(2 * n);
    for (int t = s + 1; t <= tr.T(); ++t) {
      const int base = off;
      Values nx(n, N);
      for (int a = 0; a < N; ++a) {
        const VectorXd dx = z.segment(base + n * tr.cell_of(t, a), n);
        arg << x.col(a), dx;
        const ExtReal v = convexcalc::eval_subgrad(p.L(t, a).phi(), arg).value;
        if (!v.finite()) return v;
        acc += tr.prob(a) * v.value();
        nx.col(a) = x.col(a) + dx;
      }
      off += n * tr.num_cells(t);
      x = nx;
    }
    VectorXd mean = VectorXd::Zero(n);
    for (int a = 0; a < N; ++a) mean += tr.prob(a) * x.col(a);
    const ExtReal g = convexcalc::eval_subgrad(p.terminal->phi(), mean).value;
    if (!g.finite()) return g;
    return acc + g.value();
  };
}

GridResult grid_oracle(const BolzaProblem& p, const GridSpec& spec) { return grid_oracle(p, p.start, p.xi, spec); }

GridResult grid_oracle(const BolzaProblem& p, int s, const VectorXd& xi, const GridSpec& spec) {
  if (spec.dims() != grid_dims(p, s)) throw std::invalid_argument("grid has the wrong number of axes");
  return grid_minimize(bolza_objective(p, s, xi), spec);
}

int grid_dims(const lcontrol::LCProblem& lc) {
  const auto tree = lcontrol::lc_tree(lc);
  int d = lc.n * (tree->num_cells(lc.tau) - 1);
  for (int t = lc.tau; t < lc.T; ++t) d += lc.m * tree->num_cells(t);
  return d;
}

Objective lc_objective(const lcontrol::LCProblem& lc) {
  lc.validate();
  const auto tree = lcontrol::lc_tree(lc);
  struct Stage {
    convexcalc::FlatSet U, D, X;
  };
  std::vector<Stage> stages;
  for (int k = 0; k < lc.horizon(); ++k)
    stages.push_back({convexcalc::flatten(lc.controls[k], lc.m), convexcalc::flatten(lc.mixed[k], lc.n + lc.m),
                      convexcalc::flatten(lc.states[k], lc.n)});
  return [&lc, tree, stages](const VectorXd& z) -> ExtReal {
    const auto& tr = *tree;
    const int n = lc.n, m = lc.m, N = tr.num_atoms(), tau = lc.tau;
    const int K = tr.num_cells(tau);
    int off = 0;
    std::vector<VectorXd> cellx(K);
    VectorXd last = lc.xi;
    for (int c = 0; c + 1 < K; ++c) {
      cellx[c] = z.segment(off, n);
      off += n;
      last -= tr.cell_prob(tau, c) * cellx[c];
    }
    cellx[K - 1] = last / tr.cell_prob(tau, K - 1);
    Values x(n, N);
    for (int a = 0; a < N; ++a) x.col(a) = cellx[tr.cell_of(tau, a)];
    double acc = 0.0;
    VectorXd xu(n + m);
    for (int t = tau; t < lc.T; ++t) {
      const Stage& st = stages[t - tau];
      for (int a = 0; a < N; ++a) {
        const VectorXd u = z.segment(off + m * tr.cell_of(t, a), m);
        xu << x.col(a), u;
        if (st.U.violation(u) > convexcalc::kFeasTol || st.D.violation(xu) > convexcalc::kFeasTol ||
            st.X.violation(x.col(a)) > convexcalc::kFeasTol)
          return ExtReal::pos_inf();
        const ExtReal v = convexcalc::eval_subgrad(lc.stage_costs[t - tau], xu).value;
        if (!v.finite()) return v;
        acc += tr.prob(a) * v.value();
        x.col(a) = lc.A * x.col(a) + lc.B * u + tr.noise(a, t + 1 - tau);
      }
      off += m * tr.num_cells(t);
    }
    VectorXd mean = VectorXd::Zero(n);
    for (int a = 0; a < N; ++a) mean += tr.prob(a) * x.col(a);
    const ExtReal g = convexcalc::eval_subgrad(lc.terminal, mean).value;
    if (!g.finite()) return g;
    return acc + g.value();
  };
}

GridResult grid_oracle_lc(const lcontrol::LCProblem& lc, const GridSpec& spec) {
  if (spec.dims() != grid_dims(lc)) throw std::invalid_argument("grid has the wrong number of axes");
  return grid_minimize(lc_objective(lc), spec);
}

bool SlopeInterval::contains(const VectorXd& g, double slack) const {
  if (g.size() != left.size()) return false;
  for (int i = 0; i < g.size(); ++i) {
    const double pad = slack * (1.0 + std::abs(g(i)));
    if (g(i) < left(i) - pad || g(i) > right(i) + pad) return false;
  }
  return true;
}

SlopeInterval finite_diff_subgradient(const Objective& V, const VectorXd& xi, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  const ExtReal v0 = V(xi);
  if (!v0.finite()) throw std::domain_error("value function is not finite at the base point");
  const int n = static_cast<int>(xi.size());
  SlopeInterval out;
  out.left.resize(n);
  out.right.resize(n);
  out.one_sided.assign(n, false);
  for (int i = 0; i < n; ++i) {
    VectorXd z = xi;
    z(i) = xi(i) - h;
    const ExtReal lo = V(z);
    z(i) = xi(i) + h;
    const ExtReal hi = V(z);
    out.left(i) = lo.finite() ? (v0.value() - lo.value()) / h : -kInf;
    out.right(i) = hi.finite() ? (hi.value() - v0.value()) / h : kInf;
    out.one_sided[i] = !lo.finite() || !hi.finite();
  }
  return out;
}

namespace {

double uniform(std::mt19937_64& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

std::vector<double> dirichlet(std::mt19937_64& rng, int k) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> w(k);
  double s = 0.0;
  for (double& x : w) {
    x = std::max(g(rng), 1e-3);
    s += x;
  }
  double acc = 0.0;
  for (int i = 0; i + 1 < k; ++i) {
    w[i] /= s;
    acc += w[i];
  }
  w[k - 1] = 1.0 - acc;
  return w;
}

Eigen::MatrixXd random_psd(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = gauss(rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  const Eigen::MatrixXd U = qr.householderQ();
  VectorXd lam(d);
  const bool singular = uniform(rng, 0.0, 1.0) < 0.25;
  for (int i = 0; i < d; ++i) lam(i) = (singular && i == 0) ? 0.0 : uniform(rng, 0.1, 10.0);
  Eigen::MatrixXd M = U * lam.asDiagonal() * U.transpose();
  return 0.5 * (M + M.transpose());
}

// Random quadratic over a box of half-widths in [0.5, 5] that contains z,
// sometimes cut by a half-space with z on its feasible side.
StructuredConvex random_function(std::mt19937_64& rng, const VectorXd& z) {
  std::normal_distribution<double> gauss;
  const int d = static_cast<int>(z.size());
  VectorXd lin(d), lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    lin(i) = gauss(rng);
    const double h = uniform(rng, 0.5, 5.0);
    const double c = z(i) + uniform(rng, -0.5, 0.5) * h;
    lo(i) = c - h;
    hi(i) = c + h;
  }
  std::vector<SetDescriptor> parts{SetDescriptor::box(lo, hi)};
  if (uniform(rng, 0.0, 1.0) < 0.3) {
    Eigen::MatrixXd a(1, d);
    for (int i = 0; i < d; ++i) a(0, i) = gauss(rng);
    parts.push_back(SetDescriptor::polyhedron(a, VectorXd::Constant(1, (a * z)(0) + uniform(rng, 0.0, 1.0))));
  }
  return StructuredConvex(random_psd(rng, d), lin, gauss(rng), SetDescriptor::intersection(std::move(parts)));
}

}  // namespace

FuzzInstance random_instance(std::uint64_t seed, int index, const FuzzLimits& limits) {
  std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(sq);
  std::normal_distribution<double> gauss;
  const int horizon = std::uniform_int_distribution<int>(1, limits.max_horizon)(rng);
  const int n = std::uniform_int_distribution<int>(1, limits.max_n)(rng);
  const int tau = std::uniform_int_distribution<int>(0, 1)(rng);
  std::vector<std::vector<probspace::NoiseSample>> stages;
  int atoms = 1;
  for (int k = 0; k < horizon; ++k) {
    const int room = std::min(3, limits.max_atoms / atoms);
    const int b = std::uniform_int_distribution<int>(1, std::max(1, room))(rng);
    atoms *= b;
    const auto w = dirichlet(rng, b);
    std::vector<probspace::NoiseSample> st;
    for (int j = 0; j < b; ++j) st.push_back({VectorXd::Constant(1, static_cast<double>(j)), w[j]});
    stages.push_back(st);
  }
  const auto tree = std::make_shared<const ScenarioTree>(probspace::build_tree(stages, tau));
  const int T = tree->T();

  FuzzInstance inst;
  inst.x = AdaptedProcess::zeros(tree, n, tau, Schedule::primal);
  for (int t = tau; t <= T; ++t)
    for (const auto& cell : tree->partition(t)) {
      VectorXd v(n);
      for (int i = 0; i < n; ++i) v(i) = 2.0 * gauss(rng);
      for (int a : cell) inst.x.at(t).col(a) = v;
    }
  inst.p = AdaptedProcess::zeros(tree, n, tau, Schedule::dual);
  for (int t = tau; t <= T; ++t) {
    const int pt = std::min(t + 1, T);
    for (const auto& cell : tree->partition(pt)) {
      VectorXd v(n);
      for (int i = 0; i < n; ++i) v(i) = 2.0 * gauss(rng);
      for (int a : cell) inst.p.at(t).col(a) = v;
    }
  }
  // p_T constant; E^tau p_tau is whatever the sample gives on each cell.
  for (int a = 1; a < tree->num_atoms(); ++a) inst.p.at(T).col(a) = inst.p.at(T).col(0);
  const Values es = probspace::cond_expect(*tree, tau, inst.p.at(tau));
  const VectorXd target = es.col(0);
  for (int a = 0; a < tree->num_atoms(); ++a) inst.p.at(tau).col(a) += target - es.col(a);

  BolzaProblem& p = inst.problem;
  p.tree = tree;
  p.n = n;
  p.start = tau;
  p.xi = inst.x.mean(tau);
  for (int t = tau + 1; t <= T; ++t) {
    std::vector<bolza::FnPtr> Ls(tree->num_atoms());
    for (const auto& cell : tree->partition(t)) {
      const int a0 = cell.front();
      VectorXd z(2 * n);
      z << inst.x.at(t - 1).col(a0), inst.x.at(t).col(a0) - inst.x.at(t - 1).col(a0);
      auto L = std::make_shared<const convexcalc::ProjectedConvex>(random_function(rng, z));
      for (int a : cell) Ls[a] = L;
    }
    p.lagrangians.push_back(std::move(Ls));
  }
  p.terminal = std::make_shared<const convexcalc::ProjectedConvex>(random_function(rng, inst.x.mean(T)));
  return inst;
}

FuzzReport fuzz_weak_duality(std::uint64_t seed, int count, const FuzzLimits& limits, double tol) {
  FuzzReport rep;
  rep.seed = seed;
  rep.count = count;
  rep.limits = limits;
  rep.slacks.assign(std::max(count, 0), 0.0);
  std::vector<FuzzInstance> instances(std::max(count, 0));
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(std::max(count, 1)));
  auto run = [&](unsigned w) {
    for (int i = static_cast<int>(w); i < count; i += static_cast<int>(workers)) {
      FuzzInstance inst = random_instance(seed, i, limits);
      const bolza::DualBolzaProblem d = bolza::dualize(inst.problem);
      rep.slacks[i] = bolza::pair_slack(inst.problem, d, inst.x, inst.p);
      instances[i] = std::move(inst);
    }
  };
  std::vector<std::thread> th;
  for (unsigned w = 0; w < workers; ++w) th.emplace_back(run, w);
  for (auto& t : th) t.join();

  rep.min_slack = count > 0 ? kInf : 0.0;
  for (int i = 0; i < count; ++i) {
    const double s = rep.slacks[i];
    if (!std::isfinite(s)) {
      ++rep.skipped;
      continue;
    }
    rep.min_slack = std::min(rep.min_slack, s);
    if (s < -tol) {
      ++rep.violations;
      rep.failures.push_back({i, s, std::move(instances[i])});
    }
  }
  return rep;
}

}  // namespace sbolza::oracleverify
