#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtil/mdp.hpp"
#include "mtil/policy.hpp"

namespace mtil {

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int epochs = 200;
  int batch_size = 128;
  double lr_repr = 1e-3;
  double lr_head = 1e-2;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<int> hidden = {64, 64};
  int repr_dim = 32;
  double c_phi = 10.0;
  double c_f = 10.0;
  bool full_batch = false;  // one batch per epoch containing every sample

  void validate() const;
};

struct LossTraceRow {
  int epoch = 0;
  std::string task_id;
  double loss = 0.0;
};

/// "epoch,task_id,loss" rows.
void write_loss_trace(std::ostream& out, const std::vector<LossTraceRow>& trace);

struct MultitaskModel {
  ReprParams repr;
  std::vector<HeadParams> heads;  // one per source task, same order as demos
  std::vector<LossTraceRow> trace;
};

/// Simultaneous gradient descent on the shared representation and all task
/// heads over the joint empirical risk, head norms projected after every
/// step. Samples route to their task's head; minibatches are drawn from the
/// shuffled concatenated dataset.
MultitaskModel train_multitask(const std::vector<DemoSet>& demos,
                               const Eigen::MatrixXd& observations, int num_actions,
                               const TrainConfig& cfg);

struct TransferResult {
  HeadParams head;
  std::vector<LossTraceRow> trace;
};

/// Head-only descent on the target demos; the representation is read-only.
TransferResult transfer(const ReprParams& repr, const DemoSet& target_demos,
                        const Eigen::MatrixXd& observations, int num_actions,
                        const TrainConfig& cfg);

struct BcModel {
  PolicyParams policy;
  std::vector<LossTraceRow> trace;
};

/// Single-task behavioral cloning: representation and head trained from
/// scratch on the target demos (train_multitask with T = 1).
BcModel train_bc(const DemoSet& target_demos, const Eigen::MatrixXd& observations,
                 int num_actions, const TrainConfig& cfg);

/// Softmax action distribution of the parametric policy at every state.
TabularPolicy tabularize(const PolicyParams& policy, const Eigen::MatrixXd& observations);

struct EvalResult {
  Eigen::VectorXd values;        // exact v for the evaluated policy
  double raw_return = 0.0;       // rho^T v
  double expert_return = 0.0;    // rho^T v_expert
  double random_return = 0.0;    // rho^T v_uniform
  double normalized_return = 0.0;
  bool normalized_valid = false;  // false when expert and random returns coincide
};

/// Exact evaluation against the expert: normalized return anchors the expert
/// at 1 and the uniform-random policy at 0.
EvalResult evaluate_policy(const FiniteMdp& mdp, const TabularPolicy& policy,
                           const TabularPolicy& expert);
EvalResult evaluate_policy(const FiniteMdp& mdp, const PolicyParams& policy,
                           const TabularPolicy& expert);

}  // namespace mtil
