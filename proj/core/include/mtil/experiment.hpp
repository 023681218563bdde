#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtil/envs.hpp"
#include "mtil/metrics.hpp"
#include "mtil/train.hpp"

namespace mtil {

enum class SamplingMode { exact, rollout };

struct BoundsOptions {
  double delta = 0.05;
  int rademacher_draws = 8;
  int ascent_steps = 150;
  int ascent_restarts = 2;
  double ascent_lr = 0.05;
  int pgd_restarts = 5;
  int pgd_steps = 2000;
  double pgd_lr = 1e-2;
  int zeta_restarts = 5;
  int zeta_steps = 2000;
  double zeta_lr = 1e-2;
};

struct ExperimentConfig {
  FamilyKind kind = FamilyKind::frozen_lake;
  FamilyRanges ranges;
  std::vector<int> grid_n;  // defaults derived from demos_per_task
  std::vector<int> grid_t;
  std::vector<int> grid_m;
  int demos_per_task = 0;  // |D|; 0 selects the per-family default
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  SamplingMode sampling = SamplingMode::exact;
  int rollout_timeout = 100;
  TrainConfig mtbc;
  TrainConfig bc;
  BoundsOptions bounds;
  int workers = 0;  // 0 = hardware concurrency
  std::string output_dir = "out";

  void validate() const;
  /// Effective |D| after per-family defaults (frozen lake 500, pendulum 1000,
  /// planted 500).
  int effective_demos_per_task() const;
  /// Grid lists with defaults applied: N in {1,2,4,8}|D|, T in {1,2,4,8},
  /// M = {|D|}.
  std::vector<int> effective_n() const;
  std::vector<int> effective_t() const;
  std::vector<int> effective_m() const;
};

/// Strict parse: unknown keys and malformed values are rejected with the
/// offending key in the message. Omitted optional fields take defaults.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

/// Effective-config dump; parses back to an identical config.
std::string config_to_json(const ExperimentConfig& config);

struct ExperimentRecord {
  std::string family_kind;
  std::uint64_t seed = 0;
  int n = 0, t = 0, m = 0;
  std::string method;  // "MTBC" or "BC"
  double normalized_return = 0.0;
  double raw_return = 0.0;
  double value_gap_inf = 0.0;
  double final_train_loss = 0.0;
  double final_test_loss = 0.0;
  bool has_test_loss = false;  // BC has no transfer phase
  bool ok = false;             // false rows serialize as NA with a diagnostic
  std::string error;
  std::optional<BoundReport> bounds;
};

std::string records_csv_header();
std::string record_csv_row(const ExperimentRecord& record);
std::string records_to_csv(const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_records_csv(const std::string& path);

/// Runs every (seed x N x T x M) cell of the grid: generates the family and
/// experts, samples demonstrations, trains MTBC (training then transfer
/// phase) and the BC baseline, and evaluates everything exactly. BC depends
/// only on (seed, M) and its rows repeat across N and T. Cell failures are
/// isolated into NA rows. Records come back sorted by
/// (seed, n, t, m, method).
std::vector<ExperimentRecord> run_grid(const ExperimentConfig& config);

/// Bound-report sweep on the planted family: per (seed, N, T, M) trains and
/// transfers MTBC, then measures every bound quantity against the planted
/// ground truth.
struct BoundsRow {
  std::uint64_t seed = 0;
  int n = 0, t = 0, m = 0;
  BoundReport report;
};
std::vector<BoundsRow> run_bounds_sweep(const ExperimentConfig& config);
std::string bounds_rows_to_csv(const std::vector<BoundsRow>& rows);

}  // namespace mtil
