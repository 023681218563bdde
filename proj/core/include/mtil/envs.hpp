#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtil/mdp.hpp"
#include "mtil/policy.hpp"

namespace mtil {

enum class FamilyKind { frozen_lake, pendulum, planted };
std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

inline constexpr int kLakeSide = 8;
inline constexpr int kLakeCells = kLakeSide * kLakeSide;
inline constexpr int kLakeStates = kLakeCells + 1;  // cells + absorbing terminal
inline constexpr int kLakeActions = 5;              // LEFT, DOWN, RIGHT, UP, STAY
inline constexpr int kLakeTerminal = kLakeCells;

/// 8x8 grid, 5 actions. Moves land in the intended cell with probability
/// 1-slip and in each perpendicular cell with probability slip/2; walls
/// reflect; STAY is exact. Reward 1 is collected on the transition into the
/// goal cell; the goal leads to the absorbing terminal. Observations are
/// one-hot state indicators.
FiniteMdp make_frozen_lake(int start_cell, int goal_cell, double slip, double gamma);

/// Torque-limited pendulum on an (angle x angular-velocity) grid with
/// theta in [-pi, pi), theta_dot in [-8, 8]. 11 torques {0, +-2^-3 .. +-2}
/// scaled so the extreme magnitude equals max_torque. Dynamics step from the
/// cell center and snap to the nearest cell. Reward is the standard quadratic
/// upright cost rescaled into [0, 1]; observations are (cos, sin, thdot/8).
FiniteMdp make_discrete_pendulum(double max_torque, int angle_bins, int velocity_bins,
                                 double gamma);

/// The 11 torque values in ascending order.
std::vector<double> pendulum_torques(double max_torque);

struct FrozenLakeParams {
  int start = 0;
  int goal = kLakeCells - 1;
  double slip = 0.2;
};

struct PendulumParams {
  double max_torque = 2.0;
};

/// Generator parameter record for one task.
struct TaskParams {
  FamilyKind kind = FamilyKind::frozen_lake;
  FrozenLakeParams lake;
  PendulumParams pendulum;
  std::uint64_t planted_task_seed = 0;
};
bool operator==(const TaskParams& a, const TaskParams& b);

struct PlantedGroundTruth {
  ReprParams repr;                       // phi*
  std::vector<HeadParams> source_heads;  // f*_t per source task
  HeadParams target_head;                // f*_tau
  double repr_bound = 10.0;              // C_Phi
  double head_bound = 10.0;              // C_F
  std::vector<TabularPolicy> source_experts;
  TabularPolicy target_expert;
};

struct TaskFamily {
  FamilyKind kind = FamilyKind::frozen_lake;
  std::vector<FiniteMdp> source_tasks;
  FiniteMdp target_task;
  std::vector<TaskParams> params_per_task;  // one record per source task
  TaskParams target_params;
  std::uint64_t seed = 0;
  std::optional<PlantedGroundTruth> planted;  // engaged when kind == planted

  /// All tasks pass FiniteMdp invariants and share (S, A, obs_dim).
  void validate() const;
};

struct FrozenLakeRanges {
  std::vector<int> start_cells;  // empty means all 64 cells
  std::vector<int> goal_cells;   // empty means all 64 cells
  double slip_min = 0.05;
  double slip_max = 0.35;
  double gamma = 0.99;
};

struct PendulumRanges {
  double torque_min = 1.6;
  double torque_max = 2.4;
  int angle_bins = 64;
  int velocity_bins = 64;
  double gamma = 0.99;
};

struct PlantedOptions {
  int num_states = 40;
  int num_actions = 5;
  int repr_dim = 8;
  int obs_dim = 8;
  std::vector<int> hidden = {16};
  double c_phi = 10.0;
  double c_f = 10.0;
  double gamma = 0.99;
  double margin = 1e-3;      // minimum top-logit gap at every state
  int transition_fanout = 4;
  int max_retries = 200;
};

struct FamilyRanges {
  FamilyKind kind = FamilyKind::frozen_lake;
  FrozenLakeRanges lake;
  PendulumRanges pendulum;
  PlantedOptions planted;
};

/// Draws the target parameters first, then T source parameter records i.i.d.
/// uniform over the ranges, re-drawing a source on exact collision with the
/// target. When the range is a single point the exclusion is vacuous and the
/// collision is accepted.
TaskFamily sample_task_family(FamilyKind kind, int t, const FamilyRanges& ranges,
                              std::uint64_t seed);

/// Synthetic family where the shared-representation assumptions hold by
/// construction: a shared observation table, a planted phi* (in the projected
/// MLP class), per-task heads with ||W||_F = C_F whose argmax is unique at
/// every state with the configured margin and softmax mass above 1/2, and
/// experts defined as those argmaxes. Heads are re-drawn up to
/// opts.max_retries before the construction is rejected.
TaskFamily make_planted_family(int num_states, int num_actions, int repr_dim, int t,
                               std::uint64_t seed, const PlantedOptions& opts = {});

/// One-hot policy selecting argmax_a (W phi(s))_a at each state.
TabularPolicy argmax_expert(const ReprParams& repr, const HeadParams& head,
                            const Eigen::MatrixXd& observations);

}  // namespace mtil
