#include "mtil/train.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "mtil/rng.hpp"
#include "mtil/solvers.hpp"

namespace mtil {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be positive");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (!(lr_repr > 0.0) || !(lr_head > 0.0))
    throw std::invalid_argument("TrainConfig: learning rates must be positive");
  if (repr_dim < 1) throw std::invalid_argument("TrainConfig: repr_dim must be positive");
  if (!(c_phi > 0.0) || !(c_f > 0.0))
    throw std::invalid_argument("TrainConfig: constraint radii must be positive");
}

void write_loss_trace(std::ostream& out, const std::vector<LossTraceRow>& trace) {
  out << "epoch,task_id,loss\n";
  char buf[64];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.loss);
    out << row.epoch << ',' << row.task_id << ',' << buf << '\n';
  }
}

namespace {

// Adam (or plain SGD) over one tensor, moments stored alongside.
class TensorOptimizer {
 public:
  TensorOptimizer(Eigen::Index rows, Eigen::Index cols, const TrainConfig& cfg, double lr)
      : cfg_(cfg),
        lr_(lr),
        m_(Eigen::MatrixXd::Zero(rows, cols)),
        v_(Eigen::MatrixXd::Zero(rows, cols)) {}

  void step(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad) {
    if (cfg_.optimizer == Optimizer::sgd) {
      param -= lr_ * grad;
      return;
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_.array().matrix() + (1.0 - cfg_.beta2) * grad.array().square().matrix();
    const double bias1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bias2 = 1.0 - std::pow(cfg_.beta2, t_);
    param.array() -=
        lr_ * (m_.array() / bias1) / ((v_.array() / bias2).sqrt() + cfg_.adam_eps);
  }

 private:
  const TrainConfig& cfg_;
  double lr_;
  int t_ = 0;
  Eigen::MatrixXd m_, v_;
};

struct Sample {
  int state;
  int action;
  int task;
};

std::string task_label(const DemoSet& demos, int index) {
  return demos.task_id.empty() ? std::to_string(index) : demos.task_id;
}

}  // namespace

MultitaskModel train_multitask(const std::vector<DemoSet>& demos,
                               const Eigen::MatrixXd& observations, int num_actions,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (demos.empty()) throw std::invalid_argument("train_multitask: need at least one task");
  const int t_count = static_cast<int>(demos.size());
  const int s_count = static_cast<int>(observations.rows());
  std::vector<Sample> samples;
  for (int t = 0; t < t_count; ++t) {
    if (demos[t].pairs.empty())
      throw std::invalid_argument("train_multitask: empty demo set for task " + std::to_string(t));
    for (const auto& [s, a] : demos[t].pairs) {
      if (s < 0 || s >= s_count)
        throw std::invalid_argument("train_multitask: demo state outside observation table");
      if (a < 0 || a >= num_actions)
        throw std::invalid_argument("train_multitask: demo action outside action space");
      samples.push_back({s, a, t});
    }
  }

  SplitRng rng(cfg.seed);
  SplitRng init_rng = rng.sub("init");
  MultitaskModel model;
  model.repr = make_repr(static_cast<int>(observations.cols()), cfg.hidden, cfg.repr_dim,
                         cfg.c_phi, init_rng);
  model.heads.reserve(demos.size());
  for (int t = 0; t < t_count; ++t) {
    SplitRng head_rng = rng.sub("init-head", static_cast<std::uint64_t>(t));
    model.heads.push_back(make_head(num_actions, cfg.repr_dim, cfg.c_f, head_rng));
    project_head(model.heads.back());
  }

  std::vector<TensorOptimizer> repr_w_opt, repr_b_opt, head_opt;
  for (std::size_t l = 0; l < model.repr.weights.size(); ++l) {
    repr_w_opt.emplace_back(model.repr.weights[l].rows(), model.repr.weights[l].cols(), cfg,
                            cfg.lr_repr);
    repr_b_opt.emplace_back(model.repr.biases[l].size(), 1, cfg, cfg.lr_repr);
  }
  for (const auto& head : model.heads)
    head_opt.emplace_back(head.weight.rows(), head.weight.cols(), cfg, cfg.lr_head);

  const int n_total = static_cast<int>(samples.size());
  const int batch = cfg.full_batch ? n_total : std::min(cfg.batch_size, n_total);
  std::vector<int> order(samples.size());
  for (int i = 0; i < n_total; ++i) order[i] = i;

  Eigen::MatrixXd obs_batch;
  std::vector<int> actions, head_of;
  std::vector<double> sample_losses;
  std::vector<double> task_loss_sum(demos.size());
  std::vector<int> task_loss_count(demos.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SplitRng shuffle_rng = rng.sub("shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    std::fill(task_loss_sum.begin(), task_loss_sum.end(), 0.0);
    std::fill(task_loss_count.begin(), task_loss_count.end(), 0);

    for (int begin = 0; begin < n_total; begin += batch) {
      const int size = std::min(batch, n_total - begin);
      obs_batch.resize(size, observations.cols());
      actions.assign(size, 0);
      head_of.assign(size, 0);
      for (int i = 0; i < size; ++i) {
        const Sample& smp = samples[static_cast<std::size_t>(order[begin + i])];
        obs_batch.row(i) = observations.row(smp.state);
        actions[i] = smp.action;
        head_of[i] = smp.task;
      }

      MultitaskGrads grads = multitask_loss_and_grads(model.repr, model.heads, obs_batch,
                                                      actions, head_of, &sample_losses);
      for (int i = 0; i < size; ++i) {
        const int t = head_of[i];
        task_loss_sum[t] += sample_losses[i];
        ++task_loss_count[t];
      }

      for (std::size_t l = 0; l < model.repr.weights.size(); ++l) {
        repr_w_opt[l].step(model.repr.weights[l], grads.repr_grads.weights[l]);
        repr_b_opt[l].step(model.repr.biases[l], grads.repr_grads.biases[l]);
      }
      for (int t = 0; t < t_count; ++t) {
        head_opt[t].step(model.heads[t].weight, grads.head_grads[t]);
        project_head(model.heads[t]);
      }
    }

    for (int t = 0; t < t_count; ++t) {
      model.trace.push_back(
          {epoch, task_label(demos[t], t), task_loss_sum[t] / task_loss_count[t]});
    }
  }
  return model;
}

TransferResult transfer(const ReprParams& repr, const DemoSet& target_demos,
                        const Eigen::MatrixXd& observations, int num_actions,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (target_demos.pairs.empty())
    throw std::invalid_argument("transfer: target demo set is empty");
  if (observations.cols() != repr.input_dim())
    throw std::invalid_argument("transfer: observation dimension does not match representation");

  // Frozen representation: features of every state computed once.
  const Eigen::MatrixXd phi_table = repr_forward(repr, observations);
  const int s_count = static_cast<int>(phi_table.rows());
  for (const auto& [s, a] : target_demos.pairs) {
    if (s < 0 || s >= s_count) throw std::invalid_argument("transfer: demo state out of range");
    if (a < 0 || a >= num_actions)
      throw std::invalid_argument("transfer: demo action outside action space");
  }

  SplitRng rng(cfg.seed);
  SplitRng head_rng = rng.sub("init-head-transfer");
  HeadParams head = make_head(num_actions, repr.output_dim(), cfg.c_f, head_rng);
  project_head(head);
  TensorOptimizer opt(head.weight.rows(), head.weight.cols(), cfg, cfg.lr_head);

  const int n_total = static_cast<int>(target_demos.pairs.size());
  const int batch = cfg.full_batch ? n_total : std::min(cfg.batch_size, n_total);
  std::vector<int> order(target_demos.pairs.size());
  for (int i = 0; i < n_total; ++i) order[i] = i;

  TransferResult result;
  const std::string label = target_demos.task_id.empty() ? "target" : target_demos.task_id;
  Eigen::MatrixXd phi_batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SplitRng shuffle_rng = rng.sub("shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;

    for (int begin = 0; begin < n_total; begin += batch) {
      const int size = std::min(batch, n_total - begin);
      phi_batch.resize(size, phi_table.cols());
      Eigen::MatrixXd logits(size, num_actions);
      double batch_loss = 0.0;
      for (int i = 0; i < size; ++i)
        phi_batch.row(i) = phi_table.row(target_demos.pairs[static_cast<std::size_t>(order[begin + i])].first);
      logits = phi_batch * head.weight.transpose();
      const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
      Eigen::MatrixXd p = (logits.colwise() - row_max).array().exp();
      const Eigen::VectorXd z = p.rowwise().sum();
      p.array().colwise() /= z.array();
      for (int i = 0; i < size; ++i) {
        const int a = target_demos.pairs[static_cast<std::size_t>(order[begin + i])].second;
        batch_loss += row_max[i] + std::log(z[i]) - logits(i, a);
        p(i, a) -= 1.0;
      }
      loss_sum += batch_loss;
      p /= static_cast<double>(size);
      const Eigen::MatrixXd grad = p.transpose() * phi_batch;
      opt.step(head.weight, grad);
      project_head(head);
    }
    result.trace.push_back({epoch, label, loss_sum / n_total});
  }
  result.head = std::move(head);
  return result;
}

BcModel train_bc(const DemoSet& target_demos, const Eigen::MatrixXd& observations,
                 int num_actions, const TrainConfig& cfg) {
  MultitaskModel model = train_multitask({target_demos}, observations, num_actions, cfg);
  BcModel bc;
  bc.policy.repr = std::move(model.repr);
  bc.policy.head = std::move(model.heads[0]);
  bc.trace = std::move(model.trace);
  return bc;
}

TabularPolicy tabularize(const PolicyParams& policy, const Eigen::MatrixXd& observations) {
  const Eigen::MatrixXd logits = policy_logits(policy, observations);
  TabularPolicy tab;
  tab.probs.resize(logits.rows(), logits.cols());
  for (int s = 0; s < logits.rows(); ++s)
    tab.probs.row(s) = softmax(logits.row(s).transpose()).transpose();
  return tab;
}

EvalResult evaluate_policy(const FiniteMdp& mdp, const TabularPolicy& policy,
                           const TabularPolicy& expert) {
  EvalResult result;
  result.values = policy_evaluation(mdp, policy);
  result.raw_return = mdp.initial_dist.dot(result.values);
  result.expert_return = mdp.initial_dist.dot(policy_evaluation(mdp, expert));
  result.random_return = mdp.initial_dist.dot(
      policy_evaluation(mdp, TabularPolicy::uniform(mdp.num_states, mdp.num_actions)));
  const double denom = result.expert_return - result.random_return;
  if (std::abs(denom) > 1e-12) {
    result.normalized_return = (result.raw_return - result.random_return) / denom;
    result.normalized_valid = true;
  }
  return result;
}

EvalResult evaluate_policy(const FiniteMdp& mdp, const PolicyParams& policy,
                           const TabularPolicy& expert) {
  return evaluate_policy(mdp, tabularize(policy, mdp.observation), expert);
}

}  // namespace mtil
