#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mtil {

using SparseRowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Tabular MDP <S, A, r, P, rho, gamma> with a per-state observation row.
/// Transitions are one row-stochastic S x S matrix per action.
struct FiniteMdp {
  int num_states = 0;
  int num_actions = 0;
  Eigen::MatrixXd reward;                 // S x A, entries in [0, 1]
  std::vector<SparseRowMat> transition;   // length A, each S x S
  Eigen::VectorXd initial_dist;           // length S
  double gamma = 0.99;
  Eigen::MatrixXd observation;            // S x obs_dim

  int obs_dim() const { return static_cast<int>(observation.cols()); }

  /// Throws std::invalid_argument when any structural invariant fails:
  /// row sums within 1e-9 of 1, rewards in [0,1], gamma < 1, shapes.
  void validate() const;
};

/// Stationary Markovian policy as an S x A row-stochastic matrix.
struct TabularPolicy {
  Eigen::MatrixXd probs;

  static TabularPolicy uniform(int num_states, int num_actions);
  static TabularPolicy deterministic(const std::vector<int>& actions, int num_actions);

  int num_states() const { return static_cast<int>(probs.rows()); }
  int num_actions() const { return static_cast<int>(probs.cols()); }
  bool is_deterministic() const;

  /// Highest-probability action, lowest index on ties.
  int argmax_action(int state) const;

  void validate() const;
};

/// Discounted stationary distributions nu_pi (states) and mu_pi
/// (state-action pairs); both sum to 1 and mu(s,a) = nu(s) pi(a|s).
struct StationaryDist {
  Eigen::VectorXd state_dist;
  Eigen::MatrixXd state_action_dist;
};

/// Expert demonstrations: (state, action) index pairs.
struct DemoSet {
  std::vector<std::pair<int, int>> pairs;
  std::string task_id;
  std::uint64_t seed = 0;
};

/// Line-oriented text format: header "task_id,seed,n" then one
/// "state_index,action_index" pair per line.
void write_demo_set(std::ostream& out, const DemoSet& demos);
DemoSet read_demo_set(std::istream& in);

}  // namespace mtil
