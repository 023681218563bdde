#include "mtil/demos.hpp"

#include <stdexcept>
#include <vector>

#include "mtil/rng.hpp"
#include "mtil/solvers.hpp"

namespace mtil {

DemoSet sample_demos_exact(const FiniteMdp& mdp, const TabularPolicy& expert, int n,
                           std::uint64_t seed, const std::string& task_id) {
  if (n < 1) throw std::invalid_argument("sample_demos_exact: n must be >= 1");
  const StationaryDist dist = stationary_distribution(mdp, expert);

  // Flatten mu row-major into one categorical table over (s, a) cells.
  std::vector<double> weights;
  weights.reserve(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a)
      weights.push_back(dist.state_action_dist(s, a));
  const CategoricalSampler sampler(weights);

  SplitRng rng = SplitRng(seed).sub("demo-exact");
  DemoSet demos;
  demos.task_id = task_id;
  demos.seed = seed;
  demos.pairs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int cell = sampler.sample(rng);
    demos.pairs.emplace_back(cell / mdp.num_actions, cell % mdp.num_actions);
  }
  return demos;
}

DemoSet sample_demos_rollout(const FiniteMdp& mdp, const TabularPolicy& expert, int n,
                             int timeout_h, std::uint64_t seed, const std::string& task_id) {
  if (n < 1) throw std::invalid_argument("sample_demos_rollout: n must be >= 1");
  if (timeout_h < 1) throw std::invalid_argument("sample_demos_rollout: timeout_h must be >= 1");
  if (expert.probs.rows() != mdp.num_states || expert.probs.cols() != mdp.num_actions)
    throw std::invalid_argument("sample_demos_rollout: expert shape mismatch");

  // Deterministic expert action per state and per-(s,a) transition samplers.
  std::vector<int> action_of(mdp.num_states);
  std::vector<CategoricalSampler> next_of;
  next_of.reserve(mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s) {
    action_of[s] = expert.argmax_action(s);
    Eigen::VectorXd row = mdp.transition[action_of[s]].row(s).toDense();
    next_of.emplace_back(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  const CategoricalSampler init(
      std::span<const double>(mdp.initial_dist.data(), static_cast<std::size_t>(mdp.initial_dist.size())));

  SplitRng rng = SplitRng(seed).sub("demo-rollout");
  const int episodes = (n + timeout_h - 1) / timeout_h;
  DemoSet demos;
  demos.task_id = task_id;
  demos.seed = seed;
  demos.pairs.reserve(static_cast<std::size_t>(episodes) * timeout_h);
  for (int e = 0; e < episodes; ++e) {
    int s = init.sample(rng);
    for (int h = 0; h < timeout_h; ++h) {
      const int a = action_of[s];
      demos.pairs.emplace_back(s, a);
      s = next_of[s].sample(rng);
    }
  }
  demos.pairs.resize(n);  // trim the n mod H extras
  return demos;
}

}  // namespace mtil
