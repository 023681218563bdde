#include <doctest.h>

#include <cmath>
#include <limits>

#include "mtil/demos.hpp"
#include "mtil/envs.hpp"
#include "mtil/metrics.hpp"
#include "mtil/solvers.hpp"
#include "mtil/train.hpp"
#include "oracles.hpp"

using namespace mtil;

namespace {

// Single-layer scalar representation emitting exactly `value` (|value| <= 1)
// at the observation x = 1.
ReprParams scalar_repr(double value) {
  ReprParams repr;
  repr.c_phi = 1.0;
  repr.weights = {Eigen::MatrixXd::Constant(1, 1, value)};
  repr.biases = {Eigen::VectorXd::Zero(1)};
  return repr;
}

// One-state population task with a deterministic expert playing action 0.
PopulationTask one_state_task() {
  PopulationTask task;
  task.observations = Eigen::MatrixXd::Ones(1, 1);
  task.mu = Eigen::MatrixXd::Zero(1, 2);
  task.mu(0, 0) = 1.0;
  task.nu = Eigen::VectorXd::Ones(1);
  return task;
}

// Exhaustive minimum of the one-state risk over the ||W||_2 <= 1 grid at
// resolution 1e-3; the loss at (w1, w2) is softplus(-(w1 - w2) * phi).
double grid_min_risk(double phi) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = -1000; i <= 1000; ++i) {
    for (int j = -1000; j <= 1000; ++j) {
      const double w1 = i / 1000.0, w2 = j / 1000.0;
      if (w1 * w1 + w2 * w2 > 1.0) continue;
      best = std::min(best, std::log1p(std::exp((w2 - w1) * phi)));
    }
  }
  return best;
}

PolicyParams uniform_policy(int obs_dim, int repr_dim, int actions) {
  PolicyParams policy;
  policy.repr.c_phi = 10.0;
  policy.repr.weights = {Eigen::MatrixXd::Zero(repr_dim, obs_dim)};
  policy.repr.biases = {Eigen::VectorXd::Zero(repr_dim)};
  policy.head.c_f = 10.0;
  policy.head.weight = Eigen::MatrixXd::Zero(actions, repr_dim);
  return policy;
}

}  // namespace

TEST_CASE("population risk of the uniform policy against a deterministic expert") {
  const FiniteMdp lake = make_frozen_lake(0, 63, 0.2, 0.99);
  const TabularPolicy expert = value_iteration(lake).policy;
  const PolicyParams uniform = uniform_policy(lake.obs_dim(), 4, lake.num_actions);
  CHECK(population_risk(lake, expert, uniform) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

namespace {

// Margin-scaled construction: amplify the planted head until the smallest
// top-two logit gap over states clears `target_gap`; the argmax pattern (and
// so the expert) is unchanged.
PolicyParams margin_scaled_policy(const TaskFamily& family, double target_gap) {
  const PlantedGroundTruth& truth = *family.planted;
  const Eigen::MatrixXd logits = repr_forward(truth.repr, family.target_task.observation) *
                                 truth.target_head.weight.transpose();
  double min_gap = std::numeric_limits<double>::infinity();
  for (int s = 0; s < logits.rows(); ++s) {
    Eigen::VectorXd row = logits.row(s);
    int best = 0;
    for (int a = 1; a < row.size(); ++a)
      if (row[a] > row[best]) best = a;
    double second = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < row.size(); ++a)
      if (a != best) second = std::max(second, row[a]);
    min_gap = std::min(min_gap, row[best] - second);
  }
  PolicyParams policy{truth.repr, truth.target_head};
  policy.head.weight *= target_gap / min_gap;
  policy.head.c_f = policy.head.weight.norm();
  return policy;
}

}  // namespace

TEST_CASE("population risk of a margin-scaled planted pair is tiny") {
  const TaskFamily family = make_planted_family(20, 4, 6, 1, 3);
  const PolicyParams policy = margin_scaled_policy(family, 12.0);
  CHECK(population_risk(family.target_task, family.planted->target_expert, policy) < 1e-3);
}

TEST_CASE("population risk matches the empirical mean over exact demos") {
  const FiniteMdp lake = make_frozen_lake(0, 63, 0.25, 0.99);
  const TabularPolicy expert = value_iteration(lake).policy;
  SplitRng rng(5);
  PolicyParams policy;
  policy.repr = make_repr(lake.obs_dim(), {16}, 8, 10.0, rng);
  policy.head = make_head(lake.num_actions, 8, 10.0, rng);

  const double exact = population_risk(lake, expert, policy);
  const DemoSet demos = sample_demos_exact(lake, expert, 100000, 44, "lake");
  const Eigen::MatrixXd logits = policy_logits(policy, lake.observation);
  double mean = 0.0;
  for (const auto& [s, a] : demos.pairs) mean += log_softmax_loss(logits.row(s).transpose(), a);
  mean /= static_cast<double>(demos.pairs.size());
  CHECK(std::abs(exact - mean) < 0.01);
}

TEST_CASE("expected KL: identity, uniform, and agreement with population risk") {
  const FiniteMdp lake = make_frozen_lake(0, 63, 0.2, 0.99);
  const TabularPolicy expert = value_iteration(lake).policy;
  CHECK(expected_kl(lake, expert, expert) == 0.0);

  const TabularPolicy uniform_tab = TabularPolicy::uniform(lake.num_states, lake.num_actions);
  CHECK(expected_kl(lake, expert, uniform_tab) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  SplitRng rng(6);
  PolicyParams policy;
  policy.repr = make_repr(lake.obs_dim(), {8}, 6, 10.0, rng);
  policy.head = make_head(lake.num_actions, 6, 10.0, rng);
  CHECK(expected_kl(lake, expert, policy) ==
        doctest::Approx(population_risk(lake, expert, policy)).epsilon(1e-12));

  // Zero mass on an expert action reports +infinity.
  TabularPolicy zeroed = uniform_tab;
  const int a_star = expert.argmax_action(0);
  zeroed.probs(0, a_star) = 0.0;
  zeroed.probs.row(0) /= zeroed.probs.row(0).sum();
  CHECK(std::isinf(expected_kl(lake, expert, zeroed)));

  CHECK_THROWS_AS(expected_kl(lake, uniform_tab, policy), std::invalid_argument);
}

TEST_CASE("transfer risk vanishes at the reference and respects the descent floor") {
  const TaskFamily family = make_planted_family(25, 4, 6, 1, 8);
  const PlantedGroundTruth& truth = *family.planted;
  const PopulationTask target = make_population_task(family.target_task, truth.target_expert);

  CHECK(transfer_risk(target, truth.target_head, truth.repr, truth.target_head, truth.repr) ==
        0.0);

  // Against the population minimizer found by long full-batch descent, the
  // excess risk of any other head stays non-negative.
  PgdOptions opts;
  opts.seed = 99;
  const HeadFitResult reference = fit_min_risk_head(
      target, repr_forward(truth.repr, target.observations), 4, truth.head_bound, opts);
  SplitRng rng(123);
  for (int trial = 0; trial < 5; ++trial) {
    HeadParams probe = make_head(4, 6, truth.head_bound, rng);
    project_head(probe);
    CHECK(transfer_risk(target, probe, truth.repr, reference.head, truth.repr) >= -1e-6);
  }
}

TEST_CASE("task-average representation difference: identity case and grid oracle") {
  // Identity case: reference heads are the population minimizers.
  const TaskFamily family = make_planted_family(20, 4, 6, 2, 31);
  const PlantedGroundTruth& truth = *family.planted;
  std::vector<PopulationTask> tasks;
  std::vector<HeadParams> minimizers;
  for (int t = 0; t < 2; ++t) {
    tasks.push_back(make_population_task(family.source_tasks[t], truth.source_experts[t]));
    PgdOptions opts;
    opts.seed = 500 + t;
    minimizers.push_back(fit_min_risk_head(tasks.back(),
                                           repr_forward(truth.repr, tasks.back().observations),
                                           4, truth.head_bound, opts)
                             .head);
  }
  PgdOptions opts;
  opts.seed = 7;
  const double d_identity =
      task_avg_rep_difference(truth.repr, truth.repr, minimizers, tasks, truth.head_bound, opts);
  CHECK(std::abs(d_identity) <= 1e-3);

  // One-state toy against the exhaustive grid.
  const PopulationTask toy = one_state_task();
  const ReprParams phi_prime = scalar_repr(0.7);
  const ReprParams phi_star = scalar_repr(0.4);
  HeadParams star_head;
  star_head.c_f = 1.0;
  star_head.weight = Eigen::MatrixXd::Zero(2, 1);
  star_head.weight(0, 0) = 0.6;
  star_head.weight(1, 0) = -0.3;

  PgdOptions toy_opts;
  toy_opts.seed = 21;
  const double measured = task_avg_rep_difference(phi_prime, phi_star, {star_head}, {toy}, 1.0,
                                                  toy_opts);
  const double star_risk = population_risk(toy, star_head, phi_star);
  const double expected = grid_min_risk(0.7) - star_risk;
  CHECK(std::abs(measured - expected) <= 1e-3);
}

TEST_CASE("worst-case representation difference: self-difference and grid oracle") {
  SplitRng rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    const TaskFamily family = make_planted_family(15, 4, 5, 1, 600 + trial);
    const PopulationTask target =
        make_population_task(family.target_task, family.planted->target_expert);
    PgdOptions opts;
    opts.seed = trial;
    SplitRng init = rng.sub("phi", trial);
    ReprParams phi = make_repr(target.observations.cols(), {8}, 5, 10.0, init);
    CHECK(std::abs(worst_case_rep_difference(phi, phi, target, 4, 10.0, opts)) <= 1e-3);
  }

  // Nested grid on the one-state toy. The inner infimum does not involve the
  // outer head, so the nested search reduces to a difference of grid minima.
  const PopulationTask toy = one_state_task();
  const ReprParams phi_prime = scalar_repr(0.7);
  const ReprParams phi_star = scalar_repr(0.4);
  PgdOptions opts;
  opts.seed = 3;
  const double measured = worst_case_rep_difference(phi_prime, phi_star, toy, 2, 1.0, opts);
  const double expected = grid_min_risk(0.7) - grid_min_risk(0.4);
  CHECK(std::abs(measured - expected) <= 2e-3);

  // Dominates the particular-minimizer difference.
  PgdOptions fit_opts;
  fit_opts.seed = 4;
  const double inf_prime =
      fit_min_risk_head(toy, repr_forward(phi_prime, toy.observations), 2, 1.0, fit_opts).risk;
  const double inf_star =
      fit_min_risk_head(toy, repr_forward(phi_star, toy.observations), 2, 1.0, fit_opts).risk;
  CHECK(measured >= inf_prime - inf_star - 1e-3);
}

TEST_CASE("diversity estimate conventions") {
  const DiversityEstimate plain = diversity_estimate(0.2, 0.1);
  CHECK_FALSE(plain.infinite);
  CHECK_FALSE(plain.undefined);
  CHECK(plain.sigma == doctest::Approx(2.0));

  const DiversityEstimate infinite = diversity_estimate(0.2, 0.0);
  CHECK(infinite.infinite);
  CHECK(std::isinf(infinite.sigma));

  CHECK(diversity_estimate(-0.01, 0.1).undefined);
  CHECK(diversity_estimate(0.1, -0.01).undefined);
}

TEST_CASE("Rademacher estimate of a constant class is zero within noise") {
  Eigen::VectorXd constant(3);
  constant << 0.5, -1.0, 2.0;
  FunctionClassSpec spec;
  spec.kind = FunctionClassSpec::Kind::constant;
  spec.constant_value = constant;
  const Eigen::MatrixXd data = Eigen::MatrixXd::Random(50, 4);
  const RademacherEstimate est = empirical_rademacher(spec, data, 2000, 9);
  CHECK(std::abs(est.mean) <= 3.0 * est.std_error);
}

TEST_CASE("Rademacher estimate matches the exhaustive sign enumeration") {
  Eigen::MatrixXd data(3, 1);
  data << 0.8, -0.3, 0.5;
  FunctionClassSpec spec;
  spec.kind = FunctionClassSpec::Kind::linear_heads;
  spec.c_f = 1.0;
  spec.num_actions = 1;

  double exact = 0.0;
  for (int mask = 0; mask < 8; ++mask) {
    double dot = 0.0;
    for (int n = 0; n < 3; ++n) dot += ((mask >> n) & 1 ? 1.0 : -1.0) * data(n, 0);
    exact += std::abs(dot) / 3.0;
  }
  exact /= 8.0;

  const RademacherEstimate est = empirical_rademacher(spec, data, 4000, 12);
  CHECK(std::abs(est.mean - exact) <= 3.0 * est.std_error);
}

TEST_CASE("linear-class estimate respects the closed-form norm bound") {
  SplitRng rng(14);
  const double c_phi = 2.0;
  Eigen::MatrixXd data(60, 5);
  for (int r = 0; r < 60; ++r) {
    Eigen::VectorXd row(5);
    for (int c = 0; c < 5; ++c) row[c] = rng.normal();
    data.row(r) = c_phi * rng.next_unit() * row / row.norm();
  }
  FunctionClassSpec spec;
  spec.kind = FunctionClassSpec::Kind::linear_heads;
  spec.c_f = 3.0;
  spec.num_actions = 4;
  const RademacherEstimate est = empirical_rademacher(spec, data, 500, 15);
  CHECK(est.mean <= linear_rademacher_bound(spec.c_f, c_phi, spec.num_actions, 60) +
                        3.0 * est.std_error);
}

TEST_CASE("per-draw linear sup equals the explicit maximizer value") {
  SplitRng rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + rng.uniform_int(0, 12), d = 2 + rng.uniform_int(0, 5),
              k = 1 + rng.uniform_int(0, 4);
    Eigen::MatrixXd data(n, d), signs(n, k);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < d; ++c) data(r, c) = rng.normal();
      for (int c = 0; c < k; ++c) signs(r, c) = rng.next_unit() < 0.5 ? -1.0 : 1.0;
    }
    const double c_f = 1.0 + 3.0 * rng.next_unit();
    const double closed = linear_rademacher_draw_sup(data, signs, c_f);
    const Eigen::MatrixXd corr = signs.transpose() * data;
    const Eigen::MatrixXd w_star = c_f * corr / corr.norm();
    const double explicit_value =
        (signs.array() * (data * w_star.transpose()).array()).sum() / n;
    CHECK(std::abs(closed - explicit_value) <= 1e-12);
  }
}

TEST_CASE("composed-class estimate stays within the absolute envelope") {
  SplitRng rng(33);
  Eigen::MatrixXd data(40, 6);
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 6; ++c) data(r, c) = rng.normal();
  FunctionClassSpec spec;
  spec.kind = FunctionClassSpec::Kind::composed;
  spec.c_f = 2.0;
  spec.num_actions = 3;
  spec.hidden = {8};
  spec.repr_dim = 4;
  spec.c_phi = 1.5;
  spec.ascent_steps = 80;
  const RademacherEstimate est = empirical_rademacher(spec, data, 40, 18);
  CHECK(est.mean >= 0.0);
  // Per draw the sup is (c_f/N)||eps^T Phi||_F <= c_f c_phi sqrt(|A|),
  // whatever the representation does.
  CHECK(est.mean <= spec.c_f * spec.c_phi * std::sqrt(double(spec.num_actions)) + 1e-9);
}

TEST_CASE("linear Rademacher bound arithmetic") {
  CHECK(linear_rademacher_bound(1.0, 1.0, 4, 400) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(linear_rademacher_bound(1.0, 1.0, 4, 100) == doctest::Approx(0.2).epsilon(1e-12));
  const double once = linear_rademacher_bound(2.0, 3.0, 5, 50);
  const double doubled = linear_rademacher_bound(2.0, 3.0, 5, 100);
  CHECK(once / doubled == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(linear_rademacher_bound(1.0, 1.0, 4, 0), std::invalid_argument);
}

TEST_CASE("realizability: zero representation forces the uniform residual") {
  ReprParams zero;
  zero.c_phi = 10.0;
  zero.weights = {Eigen::MatrixXd::Zero(4, 3)};
  zero.biases = {Eigen::VectorXd::Zero(4)};
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Random(6, 3);
  const std::vector<std::vector<int>> actions = {{0, 1, 2, 3, 4, 0}};
  ZetaOptions opts;
  opts.restarts = 2;
  opts.steps = 100;
  const ZetaEstimate est = realizability_zeta(zero, obs, actions, 5, 10.0, opts);
  CHECK(est.zeta == doctest::Approx(1.0 - 0.2).epsilon(1e-12));
}

TEST_CASE("realizability on a single state matches the grid oracle") {
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Ones(1, 1);
  const ReprParams repr = scalar_repr(0.8);
  ZetaOptions opts;
  opts.seed = 5;
  const ZetaEstimate est = realizability_zeta(repr, obs, {{0}}, 2, 1.0, opts);

  // ||W||_2 <= 1 grid: residual 1 - softmax_0((w1 - w2) * 0.8).
  double best_mass = 0.0;
  for (int i = -1000; i <= 1000; ++i)
    for (int j = -1000; j <= 1000; ++j) {
      const double w1 = i / 1000.0, w2 = j / 1000.0;
      if (w1 * w1 + w2 * w2 > 1.0) continue;
      best_mass = std::max(best_mass, 1.0 / (1.0 + std::exp(-(w1 - w2) * 0.8)));
    }
  CHECK(std::abs(est.zeta - (1.0 - best_mass)) <= 1e-3);
}

TEST_CASE("realizability of the planted representation stays below one half") {
  const TaskFamily family = make_planted_family(30, 5, 8, 3, 41);
  const PlantedGroundTruth& truth = *family.planted;
  std::vector<std::vector<int>> actions;
  for (int t = 0; t < 3; ++t) {
    std::vector<int> acts;
    for (int s = 0; s < 30; ++s) acts.push_back(truth.source_experts[t].argmax_action(s));
    actions.push_back(std::move(acts));
  }
  ZetaOptions opts;
  opts.seed = 11;
  const ZetaEstimate est = realizability_zeta(truth.repr, family.target_task.observation,
                                              actions, 5, truth.head_bound, opts);
  CHECK(est.zeta < 0.5);
}

TEST_CASE("policy error bound arithmetic and monotonicity") {
  CHECK(policy_error_bound(0.02, 0.9) == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(policy_error_bound(0.0, 0.5) == 0.0);
  CHECK(policy_error_bound(0.1, 0.9) > policy_error_bound(0.05, 0.9));
  CHECK(policy_error_bound(0.1, 0.95) > policy_error_bound(0.1, 0.9));
  CHECK_THROWS_AS(policy_error_bound(-1.0, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(policy_error_bound(0.1, 1.0), std::invalid_argument);
}

TEST_CASE("value gap bound holds for random softmax policies on frozen lake") {
  const FiniteMdp lake = make_frozen_lake(0, 63, 0.2, 0.99);
  const TabularPolicy expert = value_iteration(lake).policy;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitRng rng(seed);
    PolicyParams policy;
    policy.repr = make_repr(lake.obs_dim(), {16}, 8, 10.0, rng);
    policy.head = make_head(lake.num_actions, 8, 10.0, rng);
    const Theorem5Check check = verify_theorem5(lake, expert, policy);
    CHECK(check.holds);
    CHECK_FALSE(check.infinite_kl);
  }
}

TEST_CASE("value gap bound: near-expert and uniform policies") {
  const TaskFamily family = make_planted_family(20, 4, 6, 1, 3);
  const PlantedGroundTruth& truth = *family.planted;
  const Theorem5Check near_expert = verify_theorem5(
      family.target_task, truth.target_expert, margin_scaled_policy(family, 12.0));
  CHECK(near_expert.holds);
  CHECK(near_expert.lhs <= near_expert.rhs + 1e-9);

  const FiniteMdp lake = make_frozen_lake(0, 63, 0.2, 0.99);
  const TabularPolicy expert = value_iteration(lake).policy;
  const PolicyParams uniform = uniform_policy(lake.obs_dim(), 4, lake.num_actions);
  const Theorem5Check check = verify_theorem5(lake, expert, uniform);
  CHECK(check.epsilon == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(check.lhs <= policy_error_bound(std::log(5.0), lake.gamma) + 1e-9);
}

TEST_CASE("bound report: zero error terms reduce to the realizability term") {
  BoundInputs inputs;
  inputs.n = 100;
  inputs.t = 4;
  inputs.m = 100;
  inputs.num_actions = 1;  // log|A| = 0
  inputs.c_f = 0.0;
  inputs.c_phi = 0.0;
  inputs.gamma = 0.9;
  inputs.zeta = 0.125;
  inputs.sigma.sigma = 1.0;
  const BoundReport report = compose_bound_report(inputs);
  CHECK(report.epsilon_gen == 0.0);
  CHECK(report.policy_error_rhs ==
        doctest::Approx(policy_error_bound(0.25, 0.9)).epsilon(1e-12));
  CHECK(report.bounds_available);
}

TEST_CASE("bound report: infinite and undefined diversity") {
  BoundInputs inputs;
  inputs.n = 1000;
  inputs.t = 8;
  inputs.m = 500;
  inputs.num_actions = 5;
  inputs.c_f = 10.0;
  inputs.c_phi = 10.0;
  inputs.gamma = 0.99;
  inputs.zeta = 0.2;
  inputs.repr_rademacher.mean = 0.3;

  inputs.sigma = diversity_estimate(0.5, 0.0);  // infinite sentinel
  const BoundReport inf_report = compose_bound_report(inputs);
  CHECK(inf_report.bounds_available);
  CHECK(inf_report.epsilon_gen == doctest::Approx(inf_report.gen_target_term).epsilon(1e-12));

  inputs.sigma = diversity_estimate(-0.5, 0.1);  // undefined
  const BoundReport bad_report = compose_bound_report(inputs);
  CHECK_FALSE(bad_report.bounds_available);
  CHECK(std::isnan(bad_report.epsilon_gen));

  CHECK_THROWS_AS(
      [] {
        BoundInputs bad;
        bad.delta = 0.0;
        compose_bound_report(bad);
      }(),
      std::invalid_argument);
}

TEST_CASE("bound report serialization is stable") {
  BoundInputs inputs;
  inputs.n = 10;
  inputs.t = 2;
  inputs.m = 10;
  inputs.num_actions = 3;
  inputs.c_f = 1.0;
  inputs.c_phi = 1.0;
  inputs.gamma = 0.9;
  inputs.zeta = 0.1;
  inputs.sigma.sigma = 2.0;
  const BoundReport report = compose_bound_report(inputs);

  const std::string header = BoundReport::csv_header();
  const std::string row = report.csv_row();
  CHECK(std::count(header.begin(), header.end(), ',') ==
        std::count(row.begin(), row.end(), ','));
  CHECK(header.rfind("transfer_risk,", 0) == 0);
  const std::string kv = report.key_value_text();
  CHECK(kv.find("epsilon_gen ") != std::string::npos);
  CHECK(kv.find("zeta_hat ") != std::string::npos);
}
