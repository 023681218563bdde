#include "mtil/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mtil/rng.hpp"
#include "mtil/solvers.hpp"
#include "mtil/train.hpp"

namespace mtil {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd row_logsumexp(const Eigen::MatrixXd& logits) {
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  return row_max.array() +
         (logits.colwise() - row_max).array().exp().rowwise().sum().log();
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& logits) {
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  Eigen::MatrixXd p = (logits.colwise() - row_max).array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

void require_deterministic(const TabularPolicy& expert, const char* where) {
  if (!expert.is_deterministic())
    throw std::invalid_argument(std::string(where) + ": expert must be deterministic");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

PopulationTask make_population_task(const FiniteMdp& mdp, const TabularPolicy& expert) {
  const StationaryDist dist = stationary_distribution(mdp, expert);
  PopulationTask task;
  task.observations = mdp.observation;
  task.mu = dist.state_action_dist;
  task.nu = dist.state_dist;
  return task;
}

double population_risk_logits(const PopulationTask& task, const Eigen::MatrixXd& logits) {
  const Eigen::VectorXd lse = row_logsumexp(logits);
  return task.nu.dot(lse) - (task.mu.array() * logits.array()).sum();
}

double population_risk(const PopulationTask& task, const HeadParams& head,
                       const ReprParams& repr) {
  const Eigen::MatrixXd logits =
      repr_forward(repr, task.observations) * head.weight.transpose();
  return population_risk_logits(task, logits);
}

double population_risk(const FiniteMdp& mdp, const TabularPolicy& expert,
                       const PolicyParams& policy) {
  return population_risk(make_population_task(mdp, expert), policy.head, policy.repr);
}

double expected_kl(const FiniteMdp& mdp, const TabularPolicy& expert,
                   const PolicyParams& policy) {
  require_deterministic(expert, "expected_kl");
  // For one-hot expert rows the KL reduces to the expert-action log loss,
  // which equals the population risk.
  return population_risk(mdp, expert, policy);
}

double expected_kl(const FiniteMdp& mdp, const TabularPolicy& expert,
                   const TabularPolicy& policy) {
  require_deterministic(expert, "expected_kl");
  const StationaryDist dist = stationary_distribution(mdp, expert);
  double total = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    if (dist.state_dist[s] == 0.0) continue;
    const int a_star = expert.argmax_action(s);
    const double p = policy.probs(s, a_star);
    if (p <= 0.0) return kInf;
    total += dist.state_dist[s] * (-std::log(p));
  }
  return total;
}

double transfer_risk(const PopulationTask& target, const HeadParams& learned_head,
                     const ReprParams& learned_repr, const HeadParams& reference_head,
                     const ReprParams& reference_repr) {
  return population_risk(target, learned_head, learned_repr) -
         population_risk(target, reference_head, reference_repr);
}

namespace {

// Exact risk and gradient for a linear head over fixed features.
struct HeadObjective {
  const PopulationTask& task;
  const Eigen::MatrixXd& features;  // S x D

  double risk(const Eigen::MatrixXd& w) const {
    return population_risk_logits(task, features * w.transpose());
  }

  Eigen::MatrixXd gradient(const Eigen::MatrixXd& w) const {
    const Eigen::MatrixXd logits = features * w.transpose();
    Eigen::MatrixXd weighted = row_softmax(logits);
    weighted.array().colwise() *= task.nu.array();
    return (weighted - task.mu).transpose() * features;
  }
};

void project_to_ball(Eigen::MatrixXd& w, double radius) {
  const double norm = w.norm();
  if (norm > radius) w *= radius / norm;
}

// Projected gradient descent with step halving on non-decrease. The
// objective is convex, so restarts mainly guard against slow starts.
HeadFitResult pgd_min_head(const HeadObjective& objective, int num_actions, int repr_dim,
                           double c_f, const PgdOptions& opts) {
  SplitRng rng = SplitRng(opts.seed).sub("pgd");
  HeadFitResult best;
  best.risk = kInf;
  for (int restart = 0; restart < opts.restarts; ++restart) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(num_actions, repr_dim);
    if (restart > 0) {
      for (int r = 0; r < num_actions; ++r)
        for (int c = 0; c < repr_dim; ++c) w(r, c) = rng.normal();
      w *= c_f * rng.next_unit() / w.norm();
    }
    double risk = objective.risk(w);
    double lr = opts.lr;
    int stale = 0;
    for (int step = 0; step < opts.steps && stale < 60 && lr > 1e-14; ++step) {
      const Eigen::MatrixXd grad = objective.gradient(w);
      Eigen::MatrixXd candidate = w - lr * grad;
      project_to_ball(candidate, c_f);
      const double cand_risk = objective.risk(candidate);
      if (cand_risk <= risk) {
        stale = (risk - cand_risk < 1e-13) ? stale + 1 : 0;
        w = std::move(candidate);
        risk = cand_risk;
        lr *= 1.25;  // recover step size after successful moves
      } else {
        lr *= 0.5;
      }
    }
    if (risk < best.risk) {
      best.risk = risk;
      best.head.weight = w;
      best.head.c_f = c_f;
    }
  }
  return best;
}

}  // namespace

HeadFitResult fit_min_risk_head(const PopulationTask& task, const Eigen::MatrixXd& features,
                                int num_actions, double c_f, const PgdOptions& opts) {
  if (features.rows() != task.observations.rows())
    throw std::invalid_argument("fit_min_risk_head: one feature row per state required");
  HeadObjective objective{task, features};
  return pgd_min_head(objective, num_actions, static_cast<int>(features.cols()), c_f, opts);
}

double task_avg_rep_difference(const ReprParams& phi_prime, const ReprParams& phi_star,
                               const std::vector<HeadParams>& heads_star,
                               const std::vector<PopulationTask>& tasks, double c_f,
                               const PgdOptions& opts) {
  if (heads_star.size() != tasks.size())
    throw std::invalid_argument("task_avg_rep_difference: one reference head per task");
  if (tasks.empty()) throw std::invalid_argument("task_avg_rep_difference: no tasks");

  double total = 0.0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Eigen::MatrixXd prime_features = repr_forward(phi_prime, tasks[t].observations);
    PgdOptions task_opts = opts;
    task_opts.seed = SplitRng(opts.seed).sub("task-avg", t).next_u64();
    const HeadFitResult fit = fit_min_risk_head(
        tasks[t], prime_features, static_cast<int>(heads_star[t].weight.rows()), c_f,
        task_opts);
    const double reference = population_risk(tasks[t], heads_star[t], phi_star);
    total += fit.risk - reference;
  }
  return total / static_cast<double>(tasks.size());
}

double worst_case_rep_difference(const ReprParams& phi_prime, const ReprParams& phi_star,
                                 const PopulationTask& target, int num_actions, double c_f,
                                 const PgdOptions& opts) {
  PgdOptions prime_opts = opts;
  prime_opts.seed = SplitRng(opts.seed).sub("worst-prime").next_u64();
  PgdOptions star_opts = opts;
  star_opts.seed = SplitRng(opts.seed).sub("worst-star").next_u64();

  const HeadFitResult prime_fit = fit_min_risk_head(
      target, repr_forward(phi_prime, target.observations), num_actions, c_f, prime_opts);
  const HeadFitResult star_fit = fit_min_risk_head(
      target, repr_forward(phi_star, target.observations), num_actions, c_f, star_opts);
  return prime_fit.risk - star_fit.risk;
}

DiversityEstimate diversity_estimate(double d_bar, double d_worst) {
  DiversityEstimate est;
  if (d_bar < -1e-3 || d_worst < -1e-3) {
    est.undefined = true;
    return est;
  }
  if (d_worst > 1e-9) {
    est.sigma = d_bar / d_worst;
    return est;
  }
  est.infinite = true;
  est.sigma = kInf;
  return est;
}

double linear_rademacher_draw_sup(const Eigen::MatrixXd& data, const Eigen::MatrixXd& signs,
                                  double c_f) {
  if (signs.rows() != data.rows())
    throw std::invalid_argument("linear_rademacher_draw_sup: one sign row per data row");
  return c_f / static_cast<double>(data.rows()) * (signs.transpose() * data).norm();
}

namespace {

Eigen::MatrixXd draw_signs(int rows, int cols, SplitRng& rng) {
  Eigen::MatrixXd signs(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) signs(r, c) = rng.next_unit() < 0.5 ? -1.0 : 1.0;
  return signs;
}

// Duplicate data rows contribute through their summed signs only, so function
// evaluations are needed on unique rows alone. Grouping keeps the estimator
// exact and makes the MLP ascents cheap on tabular data.
struct GroupedData {
  Eigen::MatrixXd unique_rows;
  std::vector<int> group_of;  // original row -> unique row
  int original_count = 0;
};

GroupedData group_rows(const Eigen::MatrixXd& data) {
  GroupedData grouped;
  grouped.original_count = static_cast<int>(data.rows());
  grouped.group_of.resize(static_cast<std::size_t>(data.rows()));
  std::map<std::vector<double>, int> index_of;
  std::vector<int> order;
  for (int r = 0; r < data.rows(); ++r) {
    std::vector<double> key(data.row(r).begin(), data.row(r).end());
    const auto [it, inserted] = index_of.try_emplace(std::move(key), static_cast<int>(order.size()));
    if (inserted) order.push_back(r);
    grouped.group_of[static_cast<std::size_t>(r)] = it->second;
  }
  grouped.unique_rows.resize(static_cast<Eigen::Index>(order.size()), data.cols());
  for (std::size_t u = 0; u < order.size(); ++u)
    grouped.unique_rows.row(static_cast<Eigen::Index>(u)) = data.row(order[u]);
  return grouped;
}

// Signs drawn i.i.d. per original row, accumulated into per-unique-row sums.
Eigen::MatrixXd draw_aggregated_signs(const GroupedData& grouped, int cols, SplitRng& rng) {
  Eigen::MatrixXd agg =
      Eigen::MatrixXd::Zero(grouped.unique_rows.rows(), cols);
  for (int r = 0; r < grouped.original_count; ++r) {
    const int u = grouped.group_of[static_cast<std::size_t>(r)];
    for (int c = 0; c < cols; ++c) agg(u, c) += rng.next_unit() < 0.5 ? -1.0 : 1.0;
  }
  return agg;
}

// Gradient ascent over MLP parameters for one sign draw; lower estimate of
// the per-draw sup. `signs` may be an aggregated sign matrix over unique
// rows, with inv_n carrying the original 1/N.
double mlp_class_draw_sup(const FunctionClassSpec& spec, const Eigen::MatrixXd& data,
                          const Eigen::MatrixXd& signs, double inv_n, SplitRng& rng) {
  const bool composed = spec.kind == FunctionClassSpec::Kind::composed;

  const auto objective = [&](const ReprParams& repr, Eigen::MatrixXd* dphi) {
    const Eigen::MatrixXd phi = repr_forward(repr, data);
    if (!composed) {
      if (dphi) *dphi = signs * inv_n;
      return inv_n * (signs.array() * phi.array()).sum();
    }
    // Composed class: the optimal head for fixed phi is the closed-form
    // Frobenius maximizer, so the objective reduces to (c_f/N)||eps^T phi||_F.
    const Eigen::MatrixXd m = signs.transpose() * phi;
    const double norm = m.norm();
    if (dphi) {
      if (norm > 0.0)
        *dphi = (spec.c_f * inv_n / norm) * (signs * m);
      else
        dphi->setZero(phi.rows(), phi.cols());
    }
    return spec.c_f * inv_n * norm;
  };

  double best = -kInf;
  for (int restart = 0; restart < spec.ascent_restarts; ++restart) {
    SplitRng init_rng = rng.sub("ascent-init", static_cast<std::uint64_t>(restart));
    ReprParams repr = make_repr(static_cast<int>(data.cols()), spec.hidden, spec.repr_dim,
                                spec.c_phi, init_rng);
    for (auto& w : repr.weights) w *= 2.0;

    double value = objective(repr, nullptr);
    double lr = spec.ascent_lr;
    for (int step = 0; step < spec.ascent_steps && lr > 1e-12; ++step) {
      ReprForwardCache cache;
      repr_forward_cached(repr, data, cache);
      Eigen::MatrixXd dphi;
      objective(repr, &dphi);
      ReprGrads grads = zero_grads_like(repr);
      repr_backward(repr, cache, dphi, grads);

      ReprParams candidate = repr;
      for (std::size_t l = 0; l < repr.weights.size(); ++l) {
        candidate.weights[l] += lr * grads.weights[l];
        candidate.biases[l] += lr * grads.biases[l];
      }
      const double cand_value = objective(candidate, nullptr);
      if (cand_value >= value) {
        repr = std::move(candidate);
        value = cand_value;
        lr *= 1.25;
      } else {
        lr *= 0.5;
      }
    }
    best = std::max(best, value);
  }
  return best;
}

}  // namespace

RademacherEstimate empirical_rademacher(const FunctionClassSpec& spec,
                                        const Eigen::MatrixXd& data, int num_draws,
                                        std::uint64_t seed) {
  if (num_draws < 1) throw std::invalid_argument("empirical_rademacher: num_draws >= 1");
  if (data.rows() < 1) throw std::invalid_argument("empirical_rademacher: empty data");

  int output_dim = 0;
  switch (spec.kind) {
    case FunctionClassSpec::Kind::constant:
      output_dim = static_cast<int>(spec.constant_value.size());
      break;
    case FunctionClassSpec::Kind::linear_heads:
    case FunctionClassSpec::Kind::composed:
      output_dim = spec.num_actions;
      break;
    case FunctionClassSpec::Kind::repr_class:
      output_dim = spec.repr_dim;
      break;
  }
  if (output_dim < 1) throw std::invalid_argument("empirical_rademacher: empty output dim");

  const int n = static_cast<int>(data.rows());
  const GroupedData grouped = group_rows(data);
  std::vector<double> values;
  values.reserve(num_draws);
  SplitRng root(seed);
  for (int k = 0; k < num_draws; ++k) {
    SplitRng draw_rng = root.sub("draw", static_cast<std::uint64_t>(k));
    const Eigen::MatrixXd agg = draw_aggregated_signs(grouped, output_dim, draw_rng);
    double value = 0.0;
    switch (spec.kind) {
      case FunctionClassSpec::Kind::constant:
        value = (agg * spec.constant_value).sum() / n;
        break;
      case FunctionClassSpec::Kind::linear_heads:
        value = spec.c_f / n * (agg.transpose() * grouped.unique_rows).norm();
        break;
      case FunctionClassSpec::Kind::repr_class:
      case FunctionClassSpec::Kind::composed:
        value = mlp_class_draw_sup(spec, grouped.unique_rows, agg, 1.0 / n, draw_rng);
        break;
    }
    values.push_back(value);
  }

  RademacherEstimate est;
  est.num_draws = num_draws;
  double sum = 0.0;
  for (double v : values) sum += v;
  est.mean = sum / num_draws;
  if (num_draws > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - est.mean) * (v - est.mean);
    est.std_error = std::sqrt(sq / (num_draws - 1)) / std::sqrt(double(num_draws));
  }
  return est;
}

double linear_rademacher_bound(double c_f, double c_phi, int num_actions, int m) {
  if (m < 1) throw std::invalid_argument("linear_rademacher_bound: m must be >= 1");
  return c_f * c_phi * std::sqrt(static_cast<double>(num_actions) / m);
}

ZetaEstimate realizability_zeta(const ReprParams& repr, const Eigen::MatrixXd& observations,
                                const std::vector<std::vector<int>>& expert_actions,
                                int num_actions, double c_f, const ZetaOptions& opts) {
  if (expert_actions.empty()) throw std::invalid_argument("realizability_zeta: no tasks");
  const Eigen::MatrixXd features = repr_forward(repr, observations);
  const int s_count = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());

  ZetaEstimate out;
  out.heads.reserve(expert_actions.size());
  double worst_loss = 0.0;

  for (std::size_t t = 0; t < expert_actions.size(); ++t) {
    const auto& actions = expert_actions[t];
    if (static_cast<int>(actions.size()) != s_count)
      throw std::invalid_argument("realizability_zeta: one expert action per state");

    // max_s loss(s) and its smoothed logsumexp surrogate.
    const auto state_losses = [&](const Eigen::MatrixXd& w) -> Eigen::VectorXd {
      const Eigen::MatrixXd logits = features * w.transpose();
      const Eigen::VectorXd lse = row_logsumexp(logits);
      Eigen::VectorXd losses(s_count);
      for (int s = 0; s < s_count; ++s) losses[s] = lse[s] - logits(s, actions[s]);
      return losses;
    };
    const auto max_loss = [&](const Eigen::MatrixXd& w) {
      return state_losses(w).maxCoeff();
    };
    const auto loss_grad_at = [&](const Eigen::MatrixXd& w, const Eigen::VectorXd& weights) {
      // Gradient of sum_s weights_s * loss_s.
      const Eigen::MatrixXd logits = features * w.transpose();
      Eigen::MatrixXd delta = row_softmax(logits);
      for (int s = 0; s < s_count; ++s) delta(s, actions[s]) -= 1.0;
      delta.array().colwise() *= weights.array();
      return Eigen::MatrixXd(delta.transpose() * features);
    };

    SplitRng rng = SplitRng(opts.seed).sub("zeta", t);
    Eigen::MatrixXd best_w = Eigen::MatrixXd::Zero(num_actions, d);
    double best = max_loss(best_w);

    for (int restart = 0; restart < opts.restarts; ++restart) {
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(num_actions, d);
      if (restart > 0) {
        for (int r = 0; r < num_actions; ++r)
          for (int c = 0; c < d; ++c) w(r, c) = rng.normal();
        w *= c_f * rng.next_unit() / w.norm();
      }

      // Phase 1: smoothed max via a logsumexp weighting, step-halving descent.
      constexpr double kBeta = 50.0;
      const auto smooth_loss = [&](const Eigen::MatrixXd& wm) {
        const Eigen::VectorXd losses = state_losses(wm);
        const double m = losses.maxCoeff();
        return m + std::log((kBeta * (losses.array() - m)).exp().sum()) / kBeta;
      };
      double value = smooth_loss(w);
      double lr = opts.lr;
      const int phase1 = opts.steps / 2;
      for (int step = 0; step < phase1 && lr > 1e-14; ++step) {
        const Eigen::VectorXd losses = state_losses(w);
        const double m = losses.maxCoeff();
        Eigen::VectorXd weights = (kBeta * (losses.array() - m)).exp();
        weights /= weights.sum();
        Eigen::MatrixXd candidate = w - lr * loss_grad_at(w, weights);
        project_to_ball(candidate, c_f);
        const double cand = smooth_loss(candidate);
        if (cand <= value) {
          w = std::move(candidate);
          value = cand;
          lr *= 1.25;
        } else {
          lr *= 0.5;
        }
      }
      if (max_loss(w) < best) {
        best = max_loss(w);
        best_w = w;
      }

      // Phase 2: subgradient steps on the true max, best iterate kept.
      Eigen::VectorXd point = Eigen::VectorXd::Zero(s_count);
      for (int step = 0; step < opts.steps - phase1; ++step) {
        const Eigen::VectorXd losses = state_losses(w);
        int arg = 0;
        losses.maxCoeff(&arg);
        point.setZero();
        point[arg] = 1.0;
        const double step_lr = opts.lr / std::sqrt(step + 1.0);
        w -= step_lr * loss_grad_at(w, point);
        project_to_ball(w, c_f);
        const double current = state_losses(w).maxCoeff();
        if (current < best) {
          best = current;
          best_w = w;
        }
      }
    }

    worst_loss = std::max(worst_loss, best);
    HeadParams head;
    head.weight = best_w;
    head.c_f = c_f;
    out.heads.push_back(std::move(head));
  }

  out.zeta = 1.0 - std::exp(-worst_loss);
  return out;
}

double policy_error_bound(double epsilon, double gamma) {
  if (epsilon < 0.0) throw std::invalid_argument("policy_error_bound: epsilon must be >= 0");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("policy_error_bound: gamma must lie in [0, 1)");
  return 2.0 * std::sqrt(2.0) * std::sqrt(epsilon) / ((1.0 - gamma) * (1.0 - gamma));
}

Theorem5Check verify_theorem5(const FiniteMdp& mdp, const TabularPolicy& expert,
                              const PolicyParams& policy) {
  Theorem5Check check;
  const Eigen::VectorXd v_expert = policy_evaluation(mdp, expert);
  const Eigen::VectorXd v_policy =
      policy_evaluation(mdp, tabularize(policy, mdp.observation));
  check.lhs = value_gap(v_expert, v_policy);
  check.epsilon = expected_kl(mdp, expert, policy);
  if (std::isinf(check.epsilon)) {
    check.infinite_kl = true;
    check.rhs = kInf;
    check.holds = true;
    return check;
  }
  check.rhs = policy_error_bound(check.epsilon, mdp.gamma);
  check.holds = check.lhs <= check.rhs + 1e-9;
  return check;
}

BoundReport compose_bound_report(const BoundInputs& in) {
  if (!(in.delta > 0.0 && in.delta < 1.0))
    throw std::invalid_argument("compose_bound_report: delta must lie in (0, 1)");
  BoundReport report;
  report.n = in.n;
  report.t = in.t;
  report.m = in.m;
  report.num_actions = in.num_actions;
  report.gamma = in.gamma;
  report.c_f = in.c_f;
  report.c_phi = in.c_phi;
  report.delta = in.delta;
  report.transfer_risk = in.transfer_risk;
  report.d_bar = in.d_bar;
  report.d_worst = in.d_worst;
  report.zeta_hat = in.zeta;
  report.kl_expected = in.kl_expected;
  report.policy_error_lhs = in.policy_error_lhs;
  report.b_const = std::log(static_cast<double>(in.num_actions)) + 2.0 * in.c_phi * in.c_f;
  report.rademacher_repr = in.repr_rademacher.mean;
  report.rademacher_repr_stderr = in.repr_rademacher.std_error;
  report.rademacher_linear_bound =
      linear_rademacher_bound(in.c_f, in.c_phi, in.num_actions, std::max(in.m, 1));
  report.sigma_hat = in.sigma.sigma;
  report.sigma_infinite = in.sigma.infinite;
  report.sigma_undefined = in.sigma.undefined;

  const double log_term = std::log(2.0 / in.delta);
  report.gen_target_term =
      8.0 * in.c_f * in.c_phi * std::sqrt(static_cast<double>(in.num_actions) / std::max(in.m, 1)) +
      2.0 * report.b_const * std::sqrt(log_term / (2.0 * std::max(in.m, 1)));
  report.gen_source_term =
      8.0 * std::sqrt(2.0) * in.c_f * in.repr_rademacher.mean +
      2.0 * report.b_const * std::sqrt(log_term / (2.0 * std::max(in.n * in.t, 1)));

  if (in.sigma.undefined) {
    report.bounds_available = false;
    report.epsilon_gen = std::numeric_limits<double>::quiet_NaN();
    report.policy_error_rhs = std::numeric_limits<double>::quiet_NaN();
    return report;
  }

  if (!in.sigma.infinite && in.sigma.sigma <= 0.0) {
    // d_bar at numerical zero (within optimization tolerance): the measured
    // diversity certificate is vacuous and the composed bound degenerates to
    // an infinite, trivially true right-hand side.
    report.epsilon_gen = kInf;
    report.policy_error_rhs = kInf;
    report.theorem1_holds = true;
    return report;
  }

  const double diversity_scale = in.sigma.infinite ? 0.0 : 1.0 / in.sigma.sigma;
  report.epsilon_gen = report.gen_target_term + diversity_scale * report.gen_source_term;
  report.policy_error_rhs =
      policy_error_bound(report.epsilon_gen + 2.0 * in.zeta, in.gamma);
  report.theorem1_holds = report.policy_error_lhs <= report.policy_error_rhs + 1e-9;
  return report;
}

std::string BoundReport::csv_header() {
  return "transfer_risk,d_bar,d_worst,sigma_hat,zeta_hat,b_const,rademacher_repr,"
         "rademacher_repr_stderr,rademacher_linear_bound,delta,epsilon_gen,"
         "gen_target_term,gen_source_term,policy_error_lhs,policy_error_rhs,kl_expected,"
         "sigma_infinite,sigma_undefined,bounds_available,theorem1_holds";
}

std::string BoundReport::csv_row() const {
  std::ostringstream out;
  out << fmt(transfer_risk) << ',' << fmt(d_bar) << ',' << fmt(d_worst) << ','
      << fmt(sigma_hat) << ',' << fmt(zeta_hat) << ',' << fmt(b_const) << ','
      << fmt(rademacher_repr) << ',' << fmt(rademacher_repr_stderr) << ','
      << fmt(rademacher_linear_bound) << ',' << fmt(delta) << ',' << fmt(epsilon_gen) << ','
      << fmt(gen_target_term) << ',' << fmt(gen_source_term) << ','
      << fmt(policy_error_lhs) << ',' << fmt(policy_error_rhs) << ',' << fmt(kl_expected)
      << ',' << (sigma_infinite ? 1 : 0) << ',' << (sigma_undefined ? 1 : 0) << ','
      << (bounds_available ? 1 : 0) << ',' << (theorem1_holds ? 1 : 0);
  return out.str();
}

std::string BoundReport::key_value_text() const {
  std::ostringstream out;
  out << "n " << n << "\nt " << t << "\nm " << m << "\nnum_actions " << num_actions
      << "\ngamma " << fmt(gamma) << "\nc_f " << fmt(c_f) << "\nc_phi " << fmt(c_phi)
      << "\ntransfer_risk " << fmt(transfer_risk) << "\nd_bar " << fmt(d_bar)
      << "\nd_worst " << fmt(d_worst) << "\nsigma_hat " << fmt(sigma_hat) << "\nzeta_hat "
      << fmt(zeta_hat) << "\nb_const " << fmt(b_const) << "\nrademacher_repr "
      << fmt(rademacher_repr) << "\nrademacher_repr_stderr " << fmt(rademacher_repr_stderr)
      << "\nrademacher_linear_bound " << fmt(rademacher_linear_bound) << "\ndelta "
      << fmt(delta) << "\nepsilon_gen " << fmt(epsilon_gen) << "\ngen_target_term "
      << fmt(gen_target_term) << "\ngen_source_term " << fmt(gen_source_term)
      << "\npolicy_error_lhs " << fmt(policy_error_lhs) << "\npolicy_error_rhs "
      << fmt(policy_error_rhs) << "\nkl_expected " << fmt(kl_expected) << "\nsigma_infinite "
      << (sigma_infinite ? 1 : 0) << "\nsigma_undefined " << (sigma_undefined ? 1 : 0)
      << "\nbounds_available " << (bounds_available ? 1 : 0) << "\ntheorem1_holds "
      << (theorem1_holds ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace mtil
