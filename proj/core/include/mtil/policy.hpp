#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "mtil/rng.hpp"

namespace mtil {

/// MLP representation phi with tanh hidden layers and a final radial
/// projection phi(s) = c_phi * u / max(1, ||u||_2), so ||phi(s)||_2 <= c_phi
/// holds for every input by construction.
struct ReprParams {
  std::vector<Eigen::MatrixXd> weights;  // layer l maps [in_l] -> [out_l]
  std::vector<Eigen::VectorXd> biases;
  double c_phi = 10.0;

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
};

/// Linear task head f(x) = W x with a Frobenius-norm budget c_f.
struct HeadParams {
  Eigen::MatrixXd weight;  // [num_actions x repr_dim]
  double c_f = 10.0;
};

/// Softmax policy pi(s) = softmax(W phi(s)).
struct PolicyParams {
  ReprParams repr;
  HeadParams head;
};

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
ReprParams make_repr(int input_dim, const std::vector<int>& hidden, int output_dim,
                     double c_phi, SplitRng& rng);
HeadParams make_head(int num_actions, int repr_dim, double c_f, SplitRng& rng);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);

/// -log softmax_a(logits), computed with max subtraction.
double log_softmax_loss(const Eigen::VectorXd& logits, int action);

/// Batched representation forward: one observation per row, projected rows out.
Eigen::MatrixXd repr_forward(const ReprParams& repr, const Eigen::MatrixXd& obs);

struct ForwardResult {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
};
ForwardResult forward(const PolicyParams& policy, const Eigen::VectorXd& obs);

/// Batched logits for a batch of observation rows: [n x num_actions].
Eigen::MatrixXd policy_logits(const PolicyParams& policy, const Eigen::MatrixXd& obs);

struct ReprGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};
ReprGrads zero_grads_like(const ReprParams& repr);

/// Intermediate activations kept for the backward pass.
struct ReprForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // inputs[l] feeds layer l; inputs[0] = obs
  Eigen::MatrixXd pre_projection;       // u, [n x D]
  Eigen::VectorXd pre_projection_norm;  // ||u_i||_2 per row
  Eigen::MatrixXd phi;                  // projected output
};
void repr_forward_cached(const ReprParams& repr, const Eigen::MatrixXd& obs,
                         ReprForwardCache& cache);

/// Accumulates parameter gradients for dL/dphi (one row per sample).
void repr_backward(const ReprParams& repr, const ReprForwardCache& cache,
                   const Eigen::MatrixXd& dphi, ReprGrads& grads);

struct LossAndGrads {
  double loss = 0.0;
  ReprGrads repr_grads;
  Eigen::MatrixXd head_grad;
};

/// Mean log-softmax loss over the batch and exact analytic gradients of all
/// representation and head parameters.
LossAndGrads loss_and_grads(const PolicyParams& policy, const Eigen::MatrixXd& obs,
                            const std::vector<int>& actions);

struct MultitaskGrads {
  double loss = 0.0;
  ReprGrads repr_grads;
  std::vector<Eigen::MatrixXd> head_grads;
};

/// Joint objective over a batch routed to per-task heads: sample i uses
/// heads[head_of[i]]. Mean loss over the batch; per_sample_loss (optional)
/// receives each sample's loss for trace aggregation.
MultitaskGrads multitask_loss_and_grads(const ReprParams& repr,
                                        const std::vector<HeadParams>& heads,
                                        const Eigen::MatrixXd& obs,
                                        const std::vector<int>& actions,
                                        const std::vector<int>& head_of,
                                        std::vector<double>* per_sample_loss = nullptr);

/// Radial projection of the head onto ||W||_F <= c_f; the representation is
/// projected architecturally and is returned untouched.
void project_head(HeadParams& head);
PolicyParams project_constraints(PolicyParams policy);

/// Named-tensor text container; values are written as hex floats so
/// round-trips are bit-exact.
void save_repr(std::ostream& out, const ReprParams& repr);
ReprParams load_repr(std::istream& in);
void save_policy(std::ostream& out, const PolicyParams& policy);
PolicyParams load_policy(std::istream& in);

/// Serialized byte image (used for bit-equality checks).
std::string repr_bytes(const ReprParams& repr);

}  // namespace mtil
