#pragma once

#include "mtil/mdp.hpp"

namespace mtil {

/// r_pi(s) = sum_a pi(a|s) r(s,a).
Eigen::VectorXd policy_reward(const FiniteMdp& mdp, const TabularPolicy& policy);

/// P_pi(s,s') = sum_a pi(a|s) P(s'|s,a), assembled dense for direct solves.
Eigen::MatrixXd policy_transition_dense(const FiniteMdp& mdp, const TabularPolicy& policy);

/// Exact v^pi: solves (I - gamma P_pi) v = r_pi by dense LU. The residual of
/// the Bellman fixed point is checked to 1e-9.
Eigen::VectorXd policy_evaluation(const FiniteMdp& mdp, const TabularPolicy& policy);

struct ValueIterationResult {
  Eigen::VectorXd values;
  TabularPolicy policy;  // deterministic; ties broken toward the lowest action index
  int iterations = 0;
  double residual = 0.0;
};

/// Bellman iteration to residual <= tol, then greedy policy extraction.
ValueIterationResult value_iteration(const FiniteMdp& mdp, double tol = 1e-10,
                                     int max_iterations = 1000000);

/// Solves nu = (1-gamma) rho + gamma P_pi^T nu exactly and assembles
/// mu(s,a) = nu(s) pi(a|s).
StationaryDist stationary_distribution(const FiniteMdp& mdp, const TabularPolicy& policy);

/// Max absolute componentwise difference, ||v1 - v2||_inf.
double value_gap(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2);

}  // namespace mtil
