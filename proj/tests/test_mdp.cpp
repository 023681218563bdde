#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mtil/demos.hpp"
#include "mtil/envs.hpp"
#include "mtil/mdp.hpp"
#include "mtil/solvers.hpp"
#include "oracles.hpp"

using namespace mtil;

namespace {

FiniteMdp single_state_mdp(int actions, double gamma) {
  FiniteMdp mdp;
  mdp.num_states = 1;
  mdp.num_actions = actions;
  mdp.gamma = gamma;
  mdp.reward = Eigen::MatrixXd::Zero(1, actions);
  for (int a = 0; a < actions; ++a) {
    SparseRowMat t(1, 1);
    t.insert(0, 0) = 1.0;
    t.makeCompressed();
    mdp.transition.push_back(std::move(t));
  }
  mdp.initial_dist = Eigen::VectorXd::Ones(1);
  mdp.observation = Eigen::MatrixXd::Ones(1, 1);
  return mdp;
}

}  // namespace

TEST_CASE("policy evaluation: geometric series on a single state") {
  FiniteMdp mdp = single_state_mdp(1, 0.9);
  mdp.reward(0, 0) = 1.0;
  mdp.validate();
  const Eigen::VectorXd v = policy_evaluation(mdp, TabularPolicy::uniform(1, 1));
  CHECK(v[0] == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("policy evaluation: zero reward gives zero value") {
  const FiniteMdp mdp = oracles::random_mdp(4, 3, 0.9, 21);
  FiniteMdp zero = mdp;
  zero.reward.setZero();
  const Eigen::VectorXd v = policy_evaluation(zero, TabularPolicy::uniform(4, 3));
  CHECK(v.lpNorm<Eigen::Infinity>() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("policy evaluation matches Monte-Carlo rollouts on a random MDP") {
  const FiniteMdp mdp = oracles::random_mdp(4, 3, 0.9, 77);
  const TabularPolicy policy = TabularPolicy::uniform(4, 3);
  const Eigen::VectorXd v = policy_evaluation(mdp, policy);
  SplitRng rng(123);
  // Horizon 250 leaves a truncation bias below 4e-11 at gamma = 0.9.
  const double estimate = oracles::mc_discounted_return(mdp, policy, 0, 100000, 250, rng);
  CHECK(std::abs(v[0] - estimate) < 0.01);
}

TEST_CASE("policy evaluation satisfies the Bellman fixed point") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const FiniteMdp mdp = oracles::random_mdp(6, 4, 0.95, seed);
    SplitRng rng(seed + 100);
    Eigen::MatrixXd probs(6, 4);
    for (int s = 0; s < 6; ++s) {
      for (int a = 0; a < 4; ++a) probs(s, a) = rng.next_unit() + 0.05;
      probs.row(s) /= probs.row(s).sum();
    }
    const TabularPolicy policy{probs};
    const Eigen::VectorXd v = policy_evaluation(mdp, policy);
    const Eigen::VectorXd bellman =
        policy_reward(mdp, policy) + mdp.gamma * (policy_transition_dense(mdp, policy) * v);
    CHECK((v - bellman).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("policy evaluation rejects mismatched shapes") {
  const FiniteMdp mdp = oracles::random_mdp(4, 3, 0.9, 5);
  CHECK_THROWS_AS(policy_evaluation(mdp, TabularPolicy::uniform(5, 3)), std::invalid_argument);
  CHECK_THROWS_AS(policy_evaluation(mdp, TabularPolicy::uniform(4, 2)), std::invalid_argument);
}

TEST_CASE("value iteration picks the dominant action") {
  FiniteMdp mdp = single_state_mdp(2, 0.5);
  mdp.reward(0, 0) = 1.0;
  mdp.validate();
  const auto result = value_iteration(mdp, 1e-12);
  CHECK(result.values[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(result.policy.probs(0, 0) == 1.0);
}

TEST_CASE("value iteration matches brute-force policy enumeration") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const FiniteMdp mdp = oracles::random_mdp(4, 3, 0.9, seed);
    const auto result = value_iteration(mdp, 1e-10);
    Eigen::VectorXd best = Eigen::VectorXd::Constant(4, -1.0);
    for (const auto& policy : oracles::all_deterministic_policies(4, 3))
      best = best.cwiseMax(policy_evaluation(mdp, policy));
    CHECK((result.values - best).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("value iteration is greedy with respect to its own values") {
  const FiniteMdp mdp = oracles::random_mdp(5, 4, 0.9, 33);
  const auto result = value_iteration(mdp, 1e-10);
  std::vector<Eigen::VectorXd> backups;
  for (int a = 0; a < mdp.num_actions; ++a)
    backups.push_back(mdp.reward.col(a) + mdp.gamma * (mdp.transition[a] * result.values));
  for (int s = 0; s < mdp.num_states; ++s) {
    double best_q = -1.0;
    int best_a = 0;
    for (int a = 0; a < mdp.num_actions; ++a) {
      if (backups[static_cast<std::size_t>(a)][s] > best_q) {
        best_q = backups[static_cast<std::size_t>(a)][s];
        best_a = a;
      }
    }
    CHECK(result.policy.probs(s, best_a) == 1.0);
  }
}

TEST_CASE("value iteration: deterministic two-step chain to the goal") {
  // Adjacent to the goal with slip 0: reward collected on the entering step.
  const FiniteMdp lake = make_frozen_lake(0, 1, 0.0, 0.9);
  const auto result = value_iteration(lake, 1e-12);
  CHECK(result.values[0] == doctest::Approx(1.0).epsilon(1e-9));  // one RIGHT move
  CHECK(result.values[1] == doctest::Approx(0.0).epsilon(1e-9));  // goal leads to terminal
  CHECK(result.policy.probs(0, 2) == 1.0);                        // RIGHT
}

TEST_CASE("value iteration reports the iteration cap") {
  const FiniteMdp mdp = oracles::random_mdp(4, 3, 0.9, 1);
  CHECK_THROWS_AS(value_iteration(mdp, 1e-12, 3), std::runtime_error);
}

TEST_CASE("stationary distribution: two-state absorbing chain") {
  FiniteMdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 1;
  mdp.gamma = 0.5;
  mdp.reward = Eigen::MatrixXd::Zero(2, 1);
  SparseRowMat t(2, 2);
  t.insert(0, 1) = 1.0;
  t.insert(1, 1) = 1.0;
  t.makeCompressed();
  mdp.transition = {t};
  mdp.initial_dist = Eigen::VectorXd::Zero(2);
  mdp.initial_dist[0] = 1.0;
  mdp.observation = Eigen::MatrixXd::Identity(2, 2);
  mdp.validate();

  const StationaryDist dist = stationary_distribution(mdp, TabularPolicy::uniform(2, 1));
  CHECK(dist.state_dist[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(dist.state_dist[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("stationary distribution: normalization and fixed point") {
  for (std::uint64_t seed : {4, 9}) {
    const FiniteMdp mdp = oracles::random_mdp(6, 3, 0.97, seed);
    const TabularPolicy policy = TabularPolicy::uniform(6, 3);
    const StationaryDist dist = stationary_distribution(mdp, policy);
    CHECK(std::abs(dist.state_dist.sum() - 1.0) <= 1e-8);
    CHECK(std::abs(dist.state_action_dist.sum() - 1.0) <= 1e-8);
    const Eigen::VectorXd fixed_point =
        (1.0 - mdp.gamma) * mdp.initial_dist +
        mdp.gamma * (policy_transition_dense(mdp, policy).transpose() * dist.state_dist);
    CHECK((dist.state_dist - fixed_point).lpNorm<Eigen::Infinity>() <= 1e-8);
    for (int s = 0; s < 6; ++s)
      for (int a = 0; a < 3; ++a)
        CHECK(dist.state_action_dist(s, a) ==
              doctest::Approx(dist.state_dist[s] * policy.probs(s, a)).epsilon(1e-8));
  }
}

TEST_CASE("stationary distribution matches geometric-horizon rollouts on frozen lake") {
  const FiniteMdp lake = make_frozen_lake(0, 63, 0.2, 0.99);
  const TabularPolicy expert = value_iteration(lake).policy;
  const StationaryDist dist = stationary_distribution(lake, expert);
  SplitRng rng(2024);
  const Eigen::VectorXd freq = oracles::geometric_rollout_state_freq(lake, expert, 100000, rng);
  CHECK(oracles::total_variation(dist.state_dist, freq) <= 0.02);
}

TEST_CASE("exact demo sampling matches the stationary distribution") {
  const FiniteMdp lake = make_frozen_lake(0, 63, 0.25, 0.99);
  const TabularPolicy expert = value_iteration(lake).policy;
  const StationaryDist dist = stationary_distribution(lake, expert);
  const DemoSet demos = sample_demos_exact(lake, expert, 100000, 31, "lake");

  Eigen::MatrixXd freq = Eigen::MatrixXd::Zero(lake.num_states, lake.num_actions);
  for (const auto& [s, a] : demos.pairs) freq(s, a) += 1.0;
  freq /= static_cast<double>(demos.pairs.size());
  double tv = 0.0;
  for (int s = 0; s < lake.num_states; ++s)
    for (int a = 0; a < lake.num_actions; ++a)
      tv += std::abs(freq(s, a) - dist.state_action_dist(s, a));
  CHECK(tv / 2.0 <= 0.02);
}

TEST_CASE("exact demo sampling is reproducible and expert-consistent") {
  const FiniteMdp lake = make_frozen_lake(3, 60, 0.1, 0.99);
  const TabularPolicy expert = value_iteration(lake).policy;
  const DemoSet a = sample_demos_exact(lake, expert, 500, 9, "lake");
  const DemoSet b = sample_demos_exact(lake, expert, 500, 9, "lake");
  CHECK(a.pairs == b.pairs);
  // Deterministic expert: every sampled action is the expert argmax.
  for (const auto& [s, act] : a.pairs) CHECK(act == expert.argmax_action(s));
  // Prefix property: a shorter draw is a prefix of a longer one.
  const DemoSet longer = sample_demos_exact(lake, expert, 800, 9, "lake");
  for (int i = 0; i < 500; ++i)
    CHECK(a.pairs[static_cast<std::size_t>(i)] == longer.pairs[static_cast<std::size_t>(i)]);
  CHECK_THROWS_AS(sample_demos_exact(lake, expert, 0, 9), std::invalid_argument);
}

TEST_CASE("rollout demo sampling: episode counting and trimming") {
  FiniteMdp mdp = single_state_mdp(2, 0.9);
  mdp.reward(0, 1) = 1.0;
  mdp.validate();
  const TabularPolicy expert = TabularPolicy::deterministic({1}, 2);
  const DemoSet demos = sample_demos_rollout(mdp, expert, 7, 3, 11);
  CHECK(demos.pairs.size() == 7);  // 3 episodes collected, 2 samples trimmed
  for (const auto& [s, a] : demos.pairs) {
    CHECK(s == 0);
    CHECK(a == 1);  // argmax action of the absorbing expert
  }
}

TEST_CASE("rollout demos match the truncated occupancy oracle") {
  const FiniteMdp lake = make_frozen_lake(0, 63, 0.2, 0.99);
  const TabularPolicy expert = value_iteration(lake).policy;
  const DemoSet demos = sample_demos_rollout(lake, expert, 100000, 100, 17);

  Eigen::VectorXd freq = Eigen::VectorXd::Zero(lake.num_states);
  for (const auto& [s, a] : demos.pairs) freq[s] += 1.0;
  freq /= static_cast<double>(demos.pairs.size());

  // Deterministic action selection in the roll-outs: occupancy of the greedy
  // deterministic policy over H steps.
  const Eigen::VectorXd occupancy = oracles::truncated_occupancy(lake, expert, 100);
  CHECK(oracles::total_variation(freq, occupancy) <= 0.05);
}

TEST_CASE("value gap") {
  Eigen::VectorXd a(3), b(3);
  a << 1, 2, 3;
  b << 1, 2, 3;
  CHECK(value_gap(a, b) == 0.0);
  Eigen::VectorXd c(2), d(2);
  c << 0, 0;
  d << 0, 1;
  CHECK(value_gap(c, d) == 1.0);

  SplitRng rng(55);
  Eigen::VectorXd x(10), y(10);
  for (int i = 0; i < 10; ++i) {
    x[i] = rng.normal();
    y[i] = rng.normal();
  }
  double loop_max = 0.0;
  for (int i = 0; i < 10; ++i) loop_max = std::max(loop_max, std::abs(x[i] - y[i]));
  CHECK(value_gap(x, y) == loop_max);
  Eigen::VectorXd z(3);
  CHECK_THROWS_AS(value_gap(x, z), std::invalid_argument);
}

TEST_CASE("demo set text round-trip") {
  DemoSet demos;
  demos.task_id = "lake0";
  demos.seed = 99;
  demos.pairs = {{0, 1}, {5, 4}, {64, 0}};
  std::stringstream buffer;
  write_demo_set(buffer, demos);
  CHECK(buffer.str() == "lake0,99,3\n0,1\n5,4\n64,0\n");
  const DemoSet loaded = read_demo_set(buffer);
  CHECK(loaded.task_id == demos.task_id);
  CHECK(loaded.seed == demos.seed);
  CHECK(loaded.pairs == demos.pairs);
}

TEST_CASE("mdp validation rejects broken inputs") {
  FiniteMdp mdp = single_state_mdp(1, 0.9);
  mdp.reward(0, 0) = 1.5;
  CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
  mdp.reward(0, 0) = 0.5;
  mdp.gamma = 1.0;
  CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
  mdp.gamma = 0.9;
  mdp.initial_dist[0] = 0.7;
  CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
  mdp.initial_dist[0] = 1.0;
  mdp.transition[0].coeffRef(0, 0) = 0.9;
  CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
}
