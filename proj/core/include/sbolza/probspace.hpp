#pragma once

#include <Eigen/Dense>
#include <memory>
#include <stdexcept>
#include <vector>

namespace sbolza::probspace {

using Cell = std::vector<int>;
using Partition = std::vector<Cell>;

struct NoiseSample {
  Eigen::VectorXd value;
  double weight = 0.0;
};

// Finite probability space with a refining partition chain over times
// tau..T. Partition cells are ordered by their smallest atom.
class ScenarioTree {
 public:
  ScenarioTree(std::vector<double> prob, int tau, std::vector<Partition> partitions);

  int num_atoms() const { return static_cast<int>(prob_.size()); }
  int tau() const { return tau_; }
  int T() const { return tau_ + static_cast<int>(partitions_.size()) - 1; }
  bool has_time(int t) const { return t >= tau() && t <= T(); }

  double prob(int atom) const { return prob_[atom]; }
  const std::vector<double>& probs() const { return prob_; }

  const Partition& partition(int t) const;
  int num_cells(int t) const { return static_cast<int>(partition(t).size()); }
  int cell_of(int t, int atom) const;
  double cell_prob(int t, int cell) const;
  // Cell of partitions[t] that contains cell c of partitions[t2], t <= t2.
  int ancestor(int t, int t2, int c) const;

  // Per-atom noise path (empty unless built from samples). noise(atom, k) is
  // the k-th stage value along the atom's path.
  bool has_noise() const { return !noise_.empty(); }
  int num_noise_stages() const { return noise_.empty() ? 0 : static_cast<int>(noise_[0].size()); }
  const Eigen::VectorXd& noise(int atom, int stage) const { return noise_.at(atom).at(stage); }
  void set_noise(std::vector<std::vector<Eigen::VectorXd>> noise);

  // Re-label times: returns the same space restricted to partitions[from..],
  // with the first kept partition labelled new_tau.
  ScenarioTree shifted(int from, int new_tau) const;

  // True when every cell of partitions[t+1] sits inside a cell of partitions[t].
  bool refines() const;

 private:
  std::vector<double> prob_;
  int tau_ = 0;
  std::vector<Partition> partitions_;
  std::vector<std::vector<int>> cell_index_;  // [t - tau][atom]
  std::vector<std::vector<double>> cell_prob_;
  std::vector<std::vector<Eigen::VectorXd>> noise_;
};

using TreePtr = std::shared_ptr<const ScenarioTree>;

// Product tree over noise stages; partitions[tau + k] groups atoms sharing
// the first k noise values, so there are stages.size() + 1 times.
ScenarioTree build_tree(const std::vector<std::vector<NoiseSample>>& stages, int tau = 0);

// Values at one time: n x num_atoms, column per atom.
using Values = Eigen::MatrixXd;

Values cond_expect(const ScenarioTree& tree, int t, const Values& x);

enum class Schedule { primal, dual };

// Tree-indexed process on the window [s, T]; values[k] holds time s + k.
struct AdaptedProcess {
  TreePtr tree;
  int dim = 0;
  int s = 0;
  Schedule schedule = Schedule::primal;
  std::vector<Values> values;

  int T() const { return s + static_cast<int>(values.size()) - 1; }
  const Values& at(int t) const { return values.at(t - s); }
  Values& at(int t) { return values.at(t - s); }
  Values delta(int t) const { return at(t) - at(t - 1); }
  Eigen::VectorXd mean(int t) const;

  static AdaptedProcess zeros(TreePtr tree, int dim, int s, Schedule schedule);
};

double expect_pair(const ScenarioTree& tree, const std::vector<Values>& y, const std::vector<Values>& x);
double expect_pair(const AdaptedProcess& y, const AdaptedProcess& x);

struct AdaptedCheck {
  bool adapted = true;
  double deviation = 0.0;  // worst within-cell spread, infinity norm
};

AdaptedCheck check_adapted(const AdaptedProcess& x, Schedule schedule, double tol = 1e-9);

// Spread of a single time slice over the cells of partitions[t].
double cell_spread(const ScenarioTree& tree, int t, const Values& x);

}  // namespace sbolza::probspace
