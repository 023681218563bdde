#include <benchmark/benchmark.h>

#include "mtil/demos.hpp"
#include "mtil/envs.hpp"
#include "mtil/metrics.hpp"
#include "mtil/rng.hpp"
#include "mtil/solvers.hpp"
#include "mtil/train.hpp"

namespace {

mtil::FiniteMdp random_mdp(int states, int actions, std::uint64_t seed) {
  mtil::SplitRng rng(seed);
  mtil::FiniteMdp mdp;
  mdp.num_states = states;
  mdp.num_actions = actions;
  mdp.gamma = 0.95;
  mdp.reward.resize(states, actions);
  mdp.observation = Eigen::MatrixXd::Identity(states, states);
  mdp.initial_dist = Eigen::VectorXd::Constant(states, 1.0 / states);
  for (int s = 0; s < states; ++s)
    for (int a = 0; a < actions; ++a) mdp.reward(s, a) = rng.next_unit();
  for (int a = 0; a < actions; ++a) {
    mtil::SparseRowMat t(states, states);
    for (int s = 0; s < states; ++s) {
      Eigen::VectorXd row(states);
      for (int i = 0; i < states; ++i) row[i] = rng.next_unit();
      row /= row.sum();
      for (int i = 0; i < states; ++i) t.insert(s, i) = row[i];
    }
    t.makeCompressed();
    mdp.transition.push_back(std::move(t));
  }
  return mdp;
}

void BM_PolicyEvaluationLake(benchmark::State& state) {
  const mtil::FiniteMdp lake = mtil::make_frozen_lake(0, 63, 0.2, 0.99);
  const mtil::TabularPolicy uniform =
      mtil::TabularPolicy::uniform(lake.num_states, lake.num_actions);
  for (auto _ : state) benchmark::DoNotOptimize(mtil::policy_evaluation(lake, uniform));
}
BENCHMARK(BM_PolicyEvaluationLake);

void BM_ValueIteration(benchmark::State& state) {
  const mtil::FiniteMdp mdp = random_mdp(static_cast<int>(state.range(0)), 5, 3);
  for (auto _ : state) benchmark::DoNotOptimize(mtil::value_iteration(mdp, 1e-8));
}
BENCHMARK(BM_ValueIteration)->Arg(16)->Arg(64)->Arg(256);

void BM_LossAndGrads(benchmark::State& state) {
  mtil::SplitRng rng(11);
  mtil::PolicyParams policy;
  policy.repr = mtil::make_repr(65, {64, 64}, 32, 10.0, rng);
  policy.head = mtil::make_head(5, 32, 10.0, rng);
  const int batch = static_cast<int>(state.range(0));
  Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(batch, 65);
  std::vector<int> actions(batch);
  for (int i = 0; i < batch; ++i) {
    obs(i, rng.uniform_int(0, 64)) = 1.0;
    actions[i] = rng.uniform_int(0, 4);
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(mtil::loss_and_grads(policy, obs, actions));
}
BENCHMARK(BM_LossAndGrads)->Arg(128)->Arg(512);

void BM_LinearRademacherDraw(benchmark::State& state) {
  mtil::SplitRng rng(7);
  Eigen::MatrixXd data(256, 32), signs(256, 5);
  for (int r = 0; r < 256; ++r) {
    for (int c = 0; c < 32; ++c) data(r, c) = rng.normal();
    for (int c = 0; c < 5; ++c) signs(r, c) = rng.next_unit() < 0.5 ? -1.0 : 1.0;
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(mtil::linear_rademacher_draw_sup(data, signs, 10.0));
}
BENCHMARK(BM_LinearRademacherDraw);

}  // namespace

BENCHMARK_MAIN();
