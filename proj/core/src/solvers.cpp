#include "mtil/solvers.hpp"

#include <Eigen/LU>
#include <sstream>
#include <stdexcept>

namespace mtil {

namespace {

void check_dims(const FiniteMdp& mdp, const TabularPolicy& policy) {
  if (policy.probs.rows() != mdp.num_states || policy.probs.cols() != mdp.num_actions)
    throw std::invalid_argument("policy shape does not match MDP state/action counts");
}

}  // namespace

Eigen::VectorXd policy_reward(const FiniteMdp& mdp, const TabularPolicy& policy) {
  check_dims(mdp, policy);
  return (mdp.reward.array() * policy.probs.array()).rowwise().sum();
}

Eigen::MatrixXd policy_transition_dense(const FiniteMdp& mdp, const TabularPolicy& policy) {
  check_dims(mdp, policy);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_states);
  for (int a = 0; a < mdp.num_actions; ++a) {
    const auto& t = mdp.transition[a];
    for (int s = 0; s < t.outerSize(); ++s) {
      const double w = policy.probs(s, a);
      if (w == 0.0) continue;
      for (SparseRowMat::InnerIterator it(t, s); it; ++it) p(s, it.col()) += w * it.value();
    }
  }
  return p;
}

Eigen::VectorXd policy_evaluation(const FiniteMdp& mdp, const TabularPolicy& policy) {
  const Eigen::VectorXd r_pi = policy_reward(mdp, policy);
  const Eigen::MatrixXd p_pi = policy_transition_dense(mdp, policy);
  Eigen::MatrixXd system = -mdp.gamma * p_pi;
  system.diagonal().array() += 1.0;
  Eigen::VectorXd v = system.partialPivLu().solve(r_pi);
  const double residual = (v - (r_pi + mdp.gamma * (p_pi * v))).lpNorm<Eigen::Infinity>();
  if (residual > 1e-9) {
    std::ostringstream msg;
    msg << "policy_evaluation: Bellman residual " << residual << " exceeds 1e-9";
    throw std::runtime_error(msg.str());
  }
  return v;
}

ValueIterationResult value_iteration(const FiniteMdp& mdp, double tol, int max_iterations) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  const int s_count = mdp.num_states;
  const int a_count = mdp.num_actions;

  Eigen::VectorXd v = Eigen::VectorXd::Zero(s_count);
  Eigen::MatrixXd q(s_count, a_count);
  double residual = 0.0;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    for (int a = 0; a < a_count; ++a)
      q.col(a) = mdp.reward.col(a) + mdp.gamma * (mdp.transition[a] * v);
    Eigen::VectorXd v_next = q.rowwise().maxCoeff();
    residual = (v_next - v).lpNorm<Eigen::Infinity>();
    v = std::move(v_next);
    if (residual <= tol) break;
  }
  if (residual > tol) {
    std::ostringstream msg;
    msg << "value_iteration: iteration cap " << max_iterations
        << " exceeded, residual " << residual;
    throw std::runtime_error(msg.str());
  }

  // Greedy extraction; strict > keeps the lowest index among exact ties.
  std::vector<int> greedy(s_count, 0);
  for (int a = 0; a < a_count; ++a)
    q.col(a) = mdp.reward.col(a) + mdp.gamma * (mdp.transition[a] * v);
  for (int s = 0; s < s_count; ++s) {
    int best = 0;
    for (int a = 1; a < a_count; ++a) {
      if (q(s, a) > q(s, best)) best = a;
    }
    greedy[s] = best;
  }

  ValueIterationResult result;
  result.values = std::move(v);
  result.policy = TabularPolicy::deterministic(greedy, a_count);
  result.iterations = iter + 1;
  result.residual = residual;
  return result;
}

StationaryDist stationary_distribution(const FiniteMdp& mdp, const TabularPolicy& policy) {
  const Eigen::MatrixXd p_pi = policy_transition_dense(mdp, policy);
  Eigen::MatrixXd system = -mdp.gamma * p_pi.transpose();
  system.diagonal().array() += 1.0;
  const Eigen::VectorXd rhs = (1.0 - mdp.gamma) * mdp.initial_dist;
  Eigen::VectorXd nu = system.partialPivLu().solve(rhs);
  const double residual = (nu - (rhs + mdp.gamma * (p_pi.transpose() * nu))).lpNorm<Eigen::Infinity>();
  if (residual > 1e-9)
    throw std::runtime_error("stationary_distribution: fixed-point residual exceeds 1e-9");

  StationaryDist dist;
  dist.state_dist = std::move(nu);
  dist.state_action_dist = policy.probs.array().colwise() * dist.state_dist.array();
  return dist;
}

double value_gap(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2) {
  if (v1.size() != v2.size())
    throw std::invalid_argument("value_gap: vectors must have equal length");
  return (v1 - v2).lpNorm<Eigen::Infinity>();
}

}  // namespace mtil
