#include "sbolza/probspace.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sbolza::probspace {

namespace {

constexpr double kMassTol = 1e-12;

Partition normalized(Partition part) {
  for (auto& c : part) std::sort(c.begin(), c.end());
  std::sort(part.begin(), part.end(), [](const Cell& a, const Cell& b) {
    if (a.empty() || b.empty()) return a.size() < b.size();
    return a.front() < b.front();
  });
  return part;
}

}  // namespace

ScenarioTree::ScenarioTree(std::vector<double> prob, int tau, std::vector<Partition> partitions)
    : prob_(std::move(prob)), tau_(tau) {
  if (prob_.empty()) throw std::invalid_argument("scenario tree needs at least one atom");
  if (partitions.empty()) throw std::invalid_argument("scenario tree needs at least one partition");
  double total = 0.0;
  for (std::size_t i = 0; i < prob_.size(); ++i) {
    if (!(prob_[i] > 0.0)) {
      std::ostringstream os;
      os << "atom " << i << " has non-positive probability " << prob_[i];
      throw std::invalid_argument(os.str());
    }
    total += prob_[i];
  }
  if (std::abs(total - 1.0) > kMassTol) {
    std::ostringstream os;
    os.precision(17);
    os << "atom probabilities sum to " << total << ", expected 1";
    throw std::invalid_argument(os.str());
  }

  const int na = num_atoms();
  for (auto& part : partitions) partitions_.push_back(normalized(std::move(part)));
  cell_index_.assign(partitions_.size(), std::vector<int>(na, -1));
  cell_prob_.resize(partitions_.size());
  for (std::size_t k = 0; k < partitions_.size(); ++k) {
    const auto& part = partitions_[k];
    for (std::size_t c = 0; c < part.size(); ++c) {
      if (part[c].empty()) throw std::invalid_argument("partition contains an empty cell");
      double pc = 0.0;
      for (int a : part[c]) {
        if (a < 0 || a >= na) throw std::invalid_argument("partition references an unknown atom");
        if (cell_index_[k][a] != -1) throw std::invalid_argument("partition cells overlap");
        cell_index_[k][a] = static_cast<int>(c);
        pc += prob_[a];
      }
      cell_prob_[k].push_back(pc);
    }
    for (int a = 0; a < na; ++a) {
      if (cell_index_[k][a] == -1) {
        std::ostringstream os;
        os << "partition at time " << tau_ + static_cast<int>(k) << " does not cover atom " << a;
        throw std::invalid_argument(os.str());
      }
    }
  }
  if (!refines()) throw std::invalid_argument("partition chain is not refining");
}

const Partition& ScenarioTree::partition(int t) const {
  if (!has_time(t)) throw std::out_of_range("time outside tree range");
  return partitions_[t - tau_];
}

int ScenarioTree::cell_of(int t, int atom) const {
  if (!has_time(t)) throw std::out_of_range("time outside tree range");
  return cell_index_[t - tau_][atom];
}

double ScenarioTree::cell_prob(int t, int cell) const {
  if (!has_time(t)) throw std::out_of_range("time outside tree range");
  return cell_prob_[t - tau_].at(cell);
}

int ScenarioTree::ancestor(int t, int t2, int c) const {
  const int atom = partition(t2).at(c).front();
  return cell_of(t, atom);
}

void ScenarioTree::set_noise(std::vector<std::vector<Eigen::VectorXd>> noise) {
  if (static_cast<int>(noise.size()) != num_atoms()) throw std::invalid_argument("noise must be given per atom");
  noise_ = std::move(noise);
}

ScenarioTree ScenarioTree::shifted(int from, int new_tau) const {
  if (!has_time(from)) throw std::out_of_range("time outside tree range");
  std::vector<Partition> parts(partitions_.begin() + (from - tau_), partitions_.end());
  ScenarioTree out(prob_, new_tau, std::move(parts));
  out.noise_ = noise_;
  return out;
}

bool ScenarioTree::refines() const {
  for (std::size_t k = 0; k + 1 < partitions_.size(); ++k) {
    for (const auto& cell : partitions_[k + 1]) {
      const int parent = cell_index_[k][cell.front()];
      for (int a : cell) {
        if (cell_index_[k][a] != parent) return false;
      }
    }
  }
  return true;
}

ScenarioTree build_tree(const std::vector<std::vector<NoiseSample>>& stages, int tau) {
  for (std::size_t k = 0; k < stages.size(); ++k) {
    if (stages[k].empty()) {
      std::ostringstream os;
      os << "noise stage " << k << " has no samples";
      throw std::invalid_argument(os.str());
    }
    double total = 0.0;
    for (const auto& s : stages[k]) {
      if (!(s.weight > 0.0)) throw std::invalid_argument("noise sample weights must be positive");
      total += s.weight;
    }
    if (std::abs(total - 1.0) > kMassTol) {
      std::ostringstream os;
      os.precision(17);
      os << "noise stage " << k << " weights sum to " << total << ", expected 1";
      throw std::invalid_argument(os.str());
    }
  }

  // Atoms enumerate noise paths lexicographically (last stage fastest).
  std::size_t na = 1;
  for (const auto& st : stages) na *= st.size();
  std::vector<double> prob(na, 1.0);
  std::vector<std::vector<Eigen::VectorXd>> noise(na);
  std::vector<std::vector<int>> digits(na, std::vector<int>(stages.size(), 0));
  for (std::size_t a = 0; a < na; ++a) {
    std::size_t rem = a;
    for (std::size_t k = stages.size(); k-- > 0;) {
      digits[a][k] = static_cast<int>(rem % stages[k].size());
      rem /= stages[k].size();
    }
    for (std::size_t k = 0; k < stages.size(); ++k) {
      const auto& s = stages[k][digits[a][k]];
      prob[a] *= s.weight;
      noise[a].push_back(s.value);
    }
  }
  // Path products can drift from 1 by a few ulps; rescale only that drift.
  double total = 0.0;
  for (double p : prob) total += p;
  if (std::abs(total - 1.0) > kMassTol) throw std::invalid_argument("path probabilities do not sum to 1");
  for (double& p : prob) p /= total;

  std::vector<Partition> parts;
  for (std::size_t k = 0; k <= stages.size(); ++k) {
    std::size_t block = 1;
    for (std::size_t j = k; j < stages.size(); ++j) block *= stages[j].size();
    Partition part;
    for (std::size_t start = 0; start < na; start += block) {
      Cell c;
      for (std::size_t a = start; a < start + block; ++a) c.push_back(static_cast<int>(a));
      part.push_back(std::move(c));
    }
    parts.push_back(std::move(part));
  }
  ScenarioTree tree(std::move(prob), tau, std::move(parts));
  if (!stages.empty()) tree.set_noise(std::move(noise));
  return tree;
}

Values cond_expect(const ScenarioTree& tree, int t, const Values& x) {
  if (!tree.has_time(t)) throw std::out_of_range("cond_expect: time outside tree range");
  if (x.cols() != tree.num_atoms()) throw std::invalid_argument("cond_expect: value columns must match atoms");
  Values out(x.rows(), x.cols());
  const auto& part = tree.partition(t);
  for (std::size_t c = 0; c < part.size(); ++c) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.rows());
    double pc = 0.0;
    for (int a : part[c]) {
      acc += tree.prob(a) * x.col(a);
      pc += tree.prob(a);
    }
    acc /= pc;
    for (int a : part[c]) out.col(a) = acc;
  }
  return out;
}

Eigen::VectorXd AdaptedProcess::mean(int t) const {
  const Values& v = at(t);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(v.rows());
  for (int a = 0; a < v.cols(); ++a) m += tree->prob(a) * v.col(a);
  return m;
}

AdaptedProcess AdaptedProcess::zeros(TreePtr tree, int dim, int s, Schedule schedule) {
  AdaptedProcess p;
  p.dim = dim;
  p.s = s;
  p.schedule = schedule;
  for (int t = s; t <= tree->T(); ++t) p.values.push_back(Values::Zero(dim, tree->num_atoms()));
  p.tree = std::move(tree);
  return p;
}

double expect_pair(const ScenarioTree& tree, const std::vector<Values>& y, const std::vector<Values>& x) {
  if (y.size() != x.size()) throw std::invalid_argument("expect_pair: window length mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k].rows() != y[k].rows() || x[k].cols() != y[k].cols() || x[k].cols() != tree.num_atoms())
      throw std::invalid_argument("expect_pair: shape mismatch");
    for (int a = 0; a < x[k].cols(); ++a) acc += tree.prob(a) * y[k].col(a).dot(x[k].col(a));
  }
  return acc;
}

double expect_pair(const AdaptedProcess& y, const AdaptedProcess& x) {
  if (y.tree.get() != x.tree.get() && y.tree->num_atoms() != x.tree->num_atoms())
    throw std::invalid_argument("expect_pair: processes live on different trees");
  if (y.s != x.s || y.dim != x.dim) throw std::invalid_argument("expect_pair: window or dimension mismatch");
  return expect_pair(*x.tree, y.values, x.values);
}

double cell_spread(const ScenarioTree& tree, int t, const Values& x) {
  double worst = 0.0;
  for (const auto& cell : tree.partition(t)) {
    const auto ref = x.col(cell.front());
    for (int a : cell) worst = std::max(worst, (x.col(a) - ref).cwiseAbs().maxCoeff());
  }
  return worst;
}

AdaptedCheck check_adapted(const AdaptedProcess& x, Schedule schedule, double tol) {
  const ScenarioTree& tree = *x.tree;
  AdaptedCheck out;
  auto note = [&](double dev) {
    out.deviation = std::max(out.deviation, dev);
    if (dev > tol) out.adapted = false;
  };
  if (schedule == Schedule::primal) {
    for (int t = x.s; t <= x.T(); ++t) note(cell_spread(tree, t, x.at(t)));
    return out;
  }
  // Dual schedule: p_{t-1} is measurable at time t, E^s[p_s] and p_T constant.
  for (int t = x.s + 1; t <= x.T(); ++t) note(cell_spread(tree, t, x.at(t - 1)));
  const Values es = cond_expect(tree, x.s, x.at(x.s));
  for (int a = 0; a < es.cols(); ++a) note((es.col(a) - es.col(0)).cwiseAbs().maxCoeff());
  const Values& pT = x.at(x.T());
  for (int a = 0; a < pT.cols(); ++a) note((pT.col(a) - pT.col(0)).cwiseAbs().maxCoeff());
  return out;
}

}  // namespace sbolza::probspace
