#include "mtil/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mtil/metrics.hpp"

namespace mtil {

namespace {

constexpr double kPi = std::numbers::pi;

using Triplet = Eigen::Triplet<double>;

SparseRowMat sparse_from_triplets(int rows, int cols, std::vector<Triplet>& triplets) {
  SparseRowMat m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::frozen_lake: return "frozen_lake";
    case FamilyKind::pendulum: return "pendulum";
    case FamilyKind::planted: return "planted";
  }
  return "unknown";
}

FamilyKind family_kind_from_string(const std::string& name) {
  if (name == "frozen_lake") return FamilyKind::frozen_lake;
  if (name == "pendulum") return FamilyKind::pendulum;
  if (name == "planted") return FamilyKind::planted;
  throw std::invalid_argument("unknown family kind: " + name);
}

bool operator==(const TaskParams& a, const TaskParams& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case FamilyKind::frozen_lake:
      return a.lake.start == b.lake.start && a.lake.goal == b.lake.goal &&
             a.lake.slip == b.lake.slip;
    case FamilyKind::pendulum:
      return a.pendulum.max_torque == b.pendulum.max_torque;
    case FamilyKind::planted:
      return a.planted_task_seed == b.planted_task_seed;
  }
  return false;
}

FiniteMdp make_frozen_lake(int start_cell, int goal_cell, double slip, double gamma) {
  if (start_cell < 0 || start_cell >= kLakeCells || goal_cell < 0 || goal_cell >= kLakeCells)
    throw std::invalid_argument("make_frozen_lake: cell out of range");
  if (start_cell == goal_cell)
    throw std::invalid_argument("make_frozen_lake: start must differ from goal");
  if (!(slip >= 0.0 && slip <= 1.0))
    throw std::invalid_argument("make_frozen_lake: slip must lie in [0, 1]");

  // Action order follows {LEFT, DOWN, RIGHT, UP, STAY}.
  const int dr[] = {0, 1, 0, -1, 0};
  const int dc[] = {-1, 0, 1, 0, 0};
  // Perpendicular directions per move action (STAY has none).
  const int perp[4][2] = {{3, 1}, {0, 2}, {3, 1}, {0, 2}};

  const auto move = [&](int cell, int dir) {
    const int r = cell / kLakeSide + dr[dir];
    const int c = cell % kLakeSide + dc[dir];
    if (r < 0 || r >= kLakeSide || c < 0 || c >= kLakeSide) return cell;  // walls reflect
    return r * kLakeSide + c;
  };

  FiniteMdp mdp;
  mdp.num_states = kLakeStates;
  mdp.num_actions = kLakeActions;
  mdp.gamma = gamma;
  mdp.reward = Eigen::MatrixXd::Zero(kLakeStates, kLakeActions);
  mdp.initial_dist = Eigen::VectorXd::Zero(kLakeStates);
  mdp.initial_dist[start_cell] = 1.0;
  mdp.observation = Eigen::MatrixXd::Identity(kLakeStates, kLakeStates);

  mdp.transition.reserve(kLakeActions);
  for (int a = 0; a < kLakeActions; ++a) {
    std::vector<Triplet> triplets;
    triplets.reserve(kLakeStates * 3);
    for (int s = 0; s < kLakeStates; ++s) {
      if (s == kLakeTerminal) {
        triplets.emplace_back(s, s, 1.0);
        continue;
      }
      if (s == goal_cell) {
        triplets.emplace_back(s, kLakeTerminal, 1.0);
        continue;
      }
      if (a == 4) {  // STAY, unaffected by slip
        triplets.emplace_back(s, s, 1.0);
        continue;
      }
      triplets.emplace_back(s, move(s, a), 1.0 - slip);
      triplets.emplace_back(s, move(s, perp[a][0]), slip / 2.0);
      triplets.emplace_back(s, move(s, perp[a][1]), slip / 2.0);
    }
    mdp.transition.push_back(sparse_from_triplets(kLakeStates, kLakeStates, triplets));
  }

  // Reward 1 on transition into the goal: r(s,a) = P(land on goal | s, a).
  for (int a = 0; a < kLakeActions; ++a) {
    for (int s = 0; s < kLakeStates; ++s)
      mdp.reward(s, a) = mdp.transition[a].coeff(s, goal_cell);
  }

  mdp.validate();
  return mdp;
}

std::vector<double> pendulum_torques(double max_torque) {
  std::vector<double> base = {-2.0, -1.0, -0.5, -0.25, -0.125, 0.0,
                              0.125, 0.25, 0.5, 1.0, 2.0};
  for (double& u : base) u *= max_torque / 2.0;
  return base;
}

FiniteMdp make_discrete_pendulum(double max_torque, int angle_bins, int velocity_bins,
                                 double gamma) {
  if (!(max_torque > 0.0))
    throw std::invalid_argument("make_discrete_pendulum: max_torque must be positive");
  if (angle_bins < 8 || velocity_bins < 8)
    throw std::invalid_argument("make_discrete_pendulum: bins must be >= 8");

  constexpr double kGravity = 10.0, kMass = 1.0, kLength = 1.0, kDt = 0.05;
  constexpr double kMaxSpeed = 8.0;
  const double angle_width = 2.0 * kPi / angle_bins;
  const double vel_width = 2.0 * kMaxSpeed / velocity_bins;
  const int s_count = angle_bins * velocity_bins;
  const std::vector<double> torques = pendulum_torques(max_torque);
  const int a_count = static_cast<int>(torques.size());

  const auto angle_center = [&](int i) { return -kPi + (i + 0.5) * angle_width; };
  const auto vel_center = [&](int j) { return -kMaxSpeed + (j + 0.5) * vel_width; };
  const auto wrap = [&](double th) { return th - 2.0 * kPi * std::floor((th + kPi) / (2.0 * kPi)); };
  const auto snap = [&](double th, double thdot) {
    int i = static_cast<int>(std::floor((wrap(th) + kPi) / angle_width));
    i = std::clamp(i, 0, angle_bins - 1);
    int j = static_cast<int>(std::floor((thdot + kMaxSpeed) / vel_width));
    j = std::clamp(j, 0, velocity_bins - 1);
    return i * velocity_bins + j;
  };

  const double max_cost = kPi * kPi + 0.1 * kMaxSpeed * kMaxSpeed + 0.001 * max_torque * max_torque;

  FiniteMdp mdp;
  mdp.num_states = s_count;
  mdp.num_actions = a_count;
  mdp.gamma = gamma;
  mdp.reward.resize(s_count, a_count);
  mdp.initial_dist = Eigen::VectorXd::Constant(s_count, 1.0 / s_count);
  mdp.observation.resize(s_count, 3);

  for (int i = 0; i < angle_bins; ++i) {
    for (int j = 0; j < velocity_bins; ++j) {
      const int s = i * velocity_bins + j;
      mdp.observation(s, 0) = std::cos(angle_center(i));
      mdp.observation(s, 1) = std::sin(angle_center(i));
      mdp.observation(s, 2) = vel_center(j) / kMaxSpeed;
    }
  }

  mdp.transition.reserve(a_count);
  for (int a = 0; a < a_count; ++a) {
    const double u = torques[a];
    std::vector<Triplet> triplets;
    triplets.reserve(s_count);
    for (int i = 0; i < angle_bins; ++i) {
      for (int j = 0; j < velocity_bins; ++j) {
        const int s = i * velocity_bins + j;
        const double th = angle_center(i);
        const double thdot = vel_center(j);
        const double thddot =
            3.0 * kGravity / (2.0 * kLength) * std::sin(th) + 3.0 / (kMass * kLength * kLength) * u;
        const double thdot_next = std::clamp(thdot + thddot * kDt, -kMaxSpeed, kMaxSpeed);
        const double th_next = th + thdot_next * kDt;
        triplets.emplace_back(s, snap(th_next, thdot_next), 1.0);

        const double cost = th * th + 0.1 * thdot * thdot + 0.001 * u * u;
        mdp.reward(s, a) = 1.0 - cost / max_cost;
      }
    }
    mdp.transition.push_back(sparse_from_triplets(s_count, s_count, triplets));
  }

  mdp.validate();
  return mdp;
}

void TaskFamily::validate() const {
  if (source_tasks.empty()) throw std::invalid_argument("TaskFamily: needs at least one source task");
  if (params_per_task.size() != source_tasks.size())
    throw std::invalid_argument("TaskFamily: one parameter record per source task");
  target_task.validate();
  for (const auto& task : source_tasks) {
    task.validate();
    if (task.num_states != target_task.num_states ||
        task.num_actions != target_task.num_actions ||
        task.obs_dim() != target_task.obs_dim())
      throw std::invalid_argument("TaskFamily: tasks must share state/action/observation spaces");
  }
}

namespace {

struct LakeDrawSpace {
  std::vector<int> starts;
  std::vector<int> goals;
  double slip_min, slip_max;

  bool point_range() const {
    return starts.size() == 1 && goals.size() == 1 && slip_min == slip_max;
  }
};

LakeDrawSpace lake_draw_space(const FrozenLakeRanges& ranges) {
  LakeDrawSpace space;
  space.starts = ranges.start_cells;
  space.goals = ranges.goal_cells;
  if (space.starts.empty())
    for (int c = 0; c < kLakeCells; ++c) space.starts.push_back(c);
  if (space.goals.empty())
    for (int c = 0; c < kLakeCells; ++c) space.goals.push_back(c);
  for (int c : space.starts)
    if (c < 0 || c >= kLakeCells) throw std::invalid_argument("frozen lake ranges: start cell out of range");
  for (int c : space.goals)
    if (c < 0 || c >= kLakeCells) throw std::invalid_argument("frozen lake ranges: goal cell out of range");
  if (!(ranges.slip_min >= 0.0 && ranges.slip_min <= ranges.slip_max && ranges.slip_max <= 1.0))
    throw std::invalid_argument("frozen lake ranges: need 0 <= slip_min <= slip_max <= 1");
  if (space.starts.size() == 1 && space.goals.size() == 1 && space.starts[0] == space.goals[0])
    throw std::invalid_argument("frozen lake ranges: start and goal cannot coincide");
  space.slip_min = ranges.slip_min;
  space.slip_max = ranges.slip_max;
  return space;
}

TaskParams draw_lake_params(const LakeDrawSpace& space, SplitRng& rng) {
  TaskParams params;
  params.kind = FamilyKind::frozen_lake;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int start = space.starts[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(space.starts.size()) - 1))];
    const int goal = space.goals[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(space.goals.size()) - 1))];
    if (start == goal) continue;
    params.lake.start = start;
    params.lake.goal = goal;
    params.lake.slip = rng.uniform(space.slip_min, space.slip_max);
    return params;
  }
  throw std::invalid_argument("frozen lake ranges: could not draw start != goal");
}

TaskParams draw_pendulum_params(const PendulumRanges& ranges, SplitRng& rng) {
  if (!(ranges.torque_min > 0.0 && ranges.torque_min <= ranges.torque_max))
    throw std::invalid_argument("pendulum ranges: need 0 < torque_min <= torque_max");
  TaskParams params;
  params.kind = FamilyKind::pendulum;
  params.pendulum.max_torque = rng.uniform(ranges.torque_min, ranges.torque_max);
  return params;
}

FiniteMdp build_task(const TaskParams& params, const FamilyRanges& ranges) {
  switch (params.kind) {
    case FamilyKind::frozen_lake:
      return make_frozen_lake(params.lake.start, params.lake.goal, params.lake.slip,
                              ranges.lake.gamma);
    case FamilyKind::pendulum:
      return make_discrete_pendulum(params.pendulum.max_torque, ranges.pendulum.angle_bins,
                                    ranges.pendulum.velocity_bins, ranges.pendulum.gamma);
    case FamilyKind::planted:
      break;
  }
  throw std::logic_error("build_task: unsupported kind");
}

}  // namespace

TaskFamily sample_task_family(FamilyKind kind, int t, const FamilyRanges& ranges,
                              std::uint64_t seed) {
  if (t < 1) throw std::invalid_argument("sample_task_family: t must be >= 1");
  if (kind == FamilyKind::planted) {
    const auto& p = ranges.planted;
    return make_planted_family(p.num_states, p.num_actions, p.repr_dim, t, seed, p);
  }

  SplitRng rng = SplitRng(seed).sub("env-gen");
  bool point_range = false;
  const auto draw = [&](SplitRng& r) {
    if (kind == FamilyKind::frozen_lake) {
      const LakeDrawSpace space = lake_draw_space(ranges.lake);
      point_range = space.point_range();
      return draw_lake_params(space, r);
    }
    point_range = ranges.pendulum.torque_min == ranges.pendulum.torque_max;
    return draw_pendulum_params(ranges.pendulum, r);
  };

  TaskFamily family;
  family.kind = kind;
  family.seed = seed;
  family.target_params = draw(rng);
  family.target_task = build_task(family.target_params, ranges);
  for (int i = 0; i < t; ++i) {
    TaskParams params = draw(rng);
    int attempts = 0;
    while (params == family.target_params && !point_range) {
      if (++attempts > 1000)
        throw std::invalid_argument("sample_task_family: range degenerate after target exclusion");
      params = draw(rng);
    }
    family.params_per_task.push_back(params);
    family.source_tasks.push_back(build_task(params, ranges));
  }
  family.validate();
  return family;
}

TabularPolicy argmax_expert(const ReprParams& repr, const HeadParams& head,
                            const Eigen::MatrixXd& observations) {
  const Eigen::MatrixXd logits = repr_forward(repr, observations) * head.weight.transpose();
  std::vector<int> actions(static_cast<std::size_t>(logits.rows()));
  for (int s = 0; s < logits.rows(); ++s) {
    int best = 0;
    for (int a = 1; a < logits.cols(); ++a)
      if (logits(s, a) > logits(s, best)) best = a;
    actions[static_cast<std::size_t>(s)] = best;
  }
  return TabularPolicy::deterministic(actions, static_cast<int>(logits.cols()));
}

TaskFamily make_planted_family(int num_states, int num_actions, int repr_dim, int t,
                               std::uint64_t seed, const PlantedOptions& opts) {
  if (repr_dim < 2) throw std::invalid_argument("make_planted_family: repr_dim must be >= 2");
  if (num_states < 2 || num_actions < 2)
    throw std::invalid_argument("make_planted_family: need at least 2 states and 2 actions");
  if (t < 1) throw std::invalid_argument("make_planted_family: t must be >= 1");

  SplitRng root = SplitRng(seed).sub("planted");

  // Shared observation table.
  SplitRng obs_rng = root.sub("obs");
  Eigen::MatrixXd observations(num_states, opts.obs_dim);
  for (int s = 0; s < num_states; ++s)
    for (int d = 0; d < opts.obs_dim; ++d) observations(s, d) = obs_rng.normal();

  // Planted representation: an initialized MLP with weights scaled up so the
  // pre-projection outputs are O(1) and logits carry usable margins.
  SplitRng repr_rng = root.sub("repr");
  ReprParams repr = make_repr(opts.obs_dim, opts.hidden, repr_dim, opts.c_phi, repr_rng);
  for (auto& w : repr.weights) w *= 3.0;
  for (auto& b : repr.biases) b *= 3.0;

  PlantedGroundTruth truth;
  truth.repr = repr;
  truth.repr_bound = opts.c_phi;
  truth.head_bound = opts.c_f;

  const Eigen::MatrixXd phi_table = repr_forward(repr, observations);

  // Labels come from a random bounded head; the stored reference head is then
  // the population risk minimizer for those labels, found by projected
  // descent on the exact discounted weights of the task. The minimizer keeps
  // d-bar measurements against (phi*, f*) non-negative up to optimizer
  // tolerance, and the margin checks keep zeta < 1/2 measurable.
  const auto draw_task_head = [&](const FiniteMdp& mdp, SplitRng& rng)
      -> std::pair<HeadParams, TabularPolicy> {
    for (int attempt = 0; attempt < opts.max_retries; ++attempt) {
      Eigen::MatrixXd labeler(num_actions, repr_dim);
      for (int r = 0; r < num_actions; ++r)
        for (int c = 0; c < repr_dim; ++c) labeler(r, c) = rng.normal();
      labeler *= opts.c_f / labeler.norm();

      const Eigen::MatrixXd label_logits = phi_table * labeler.transpose();
      std::vector<int> labels(static_cast<std::size_t>(num_states));
      for (int s = 0; s < num_states; ++s) {
        int best = 0;
        for (int a = 1; a < num_actions; ++a)
          if (label_logits(s, a) > label_logits(s, best)) best = a;
        labels[static_cast<std::size_t>(s)] = best;
      }
      const TabularPolicy expert = TabularPolicy::deterministic(labels, num_actions);

      PgdOptions fit_opts;
      fit_opts.seed = rng.next_u64();
      const PopulationTask pop = make_population_task(mdp, expert);
      HeadParams head =
          fit_min_risk_head(pop, phi_table, num_actions, opts.c_f, fit_opts).head;

      const Eigen::MatrixXd logits = phi_table * head.weight.transpose();
      bool ok = true;
      for (int s = 0; s < num_states && ok; ++s) {
        Eigen::VectorXd row = logits.row(s);
        int best = 0;
        for (int a = 1; a < num_actions; ++a)
          if (row[a] > row[best]) best = a;
        if (best != labels[static_cast<std::size_t>(s)]) ok = false;
        double second = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < num_actions; ++a)
          if (a != best) second = std::max(second, row[a]);
        if (row[best] - second < opts.margin) ok = false;
        if (softmax(row)[best] <= 0.5) ok = false;
      }
      if (ok) return {std::move(head), expert};
    }
    std::ostringstream msg;
    msg << "make_planted_family: no head reached margin " << opts.margin
        << " with softmax mass > 1/2 after " << opts.max_retries << " retries";
    throw std::runtime_error(msg.str());
  };

  const auto build_planted_mdp = [&](SplitRng& rng) {
    FiniteMdp mdp;
    mdp.num_states = num_states;
    mdp.num_actions = num_actions;
    mdp.gamma = opts.gamma;
    mdp.observation = observations;
    mdp.initial_dist = Eigen::VectorXd::Constant(num_states, 1.0 / num_states);
    mdp.reward.resize(num_states, num_actions);
    for (int s = 0; s < num_states; ++s)
      for (int a = 0; a < num_actions; ++a) mdp.reward(s, a) = rng.next_unit();

    const int fanout = std::min(opts.transition_fanout, num_states);
    mdp.transition.reserve(num_actions);
    for (int a = 0; a < num_actions; ++a) {
      std::vector<Triplet> triplets;
      triplets.reserve(static_cast<std::size_t>(num_states) * fanout);
      for (int s = 0; s < num_states; ++s) {
        std::vector<int> pool(num_states);
        for (int i = 0; i < num_states; ++i) pool[i] = i;
        rng.shuffle(pool);
        std::vector<double> weights(fanout);
        double total = 0.0;
        for (int k = 0; k < fanout; ++k) {
          weights[k] = rng.uniform(0.1, 1.0);
          total += weights[k];
        }
        for (int k = 0; k < fanout; ++k)
          triplets.emplace_back(s, pool[k], weights[k] / total);
      }
      mdp.transition.push_back(sparse_from_triplets(num_states, num_states, triplets));
    }
    mdp.validate();
    return mdp;
  };

  TaskFamily family;
  family.kind = FamilyKind::planted;
  family.seed = seed;
  for (int i = 0; i <= t; ++i) {
    const bool is_target = (i == t);
    SplitRng task_rng = root.sub("task", static_cast<std::uint64_t>(i));
    TaskParams params;
    params.kind = FamilyKind::planted;
    params.planted_task_seed = task_rng.next_u64();

    SplitRng mdp_rng = task_rng.sub("mdp");
    SplitRng head_rng = task_rng.sub("head");
    FiniteMdp mdp = build_planted_mdp(mdp_rng);
    auto [head, expert] = draw_task_head(mdp, head_rng);

    if (is_target) {
      family.target_task = std::move(mdp);
      family.target_params = params;
      truth.target_head = std::move(head);
      truth.target_expert = std::move(expert);
    } else {
      family.source_tasks.push_back(std::move(mdp));
      family.params_per_task.push_back(params);
      truth.source_heads.push_back(std::move(head));
      truth.source_experts.push_back(std::move(expert));
    }
  }
  family.planted = std::move(truth);
  family.validate();
  return family;
}

}  // namespace mtil
