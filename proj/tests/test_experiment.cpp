#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtil/experiment.hpp"
#include "mtil/plot.hpp"

using namespace mtil;

namespace {

ExperimentConfig tiny_lake_config() {
  return parse_config_text(R"({
    "family": {"kind": "frozen_lake", "slip_min": 0.1, "slip_max": 0.3},
    "grid": {"n": [60], "t": [1], "m": [60]},
    "seeds": [0],
    "mtbc": {"epochs": 8, "hidden": [16], "repr_dim": 8},
    "bc": {"epochs": 8, "hidden": [16], "repr_dim": 8},
    "workers": 1
  })");
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("config: minimal file gets defaults") {
  const ExperimentConfig cfg = parse_config_text(
      R"({"family": {"kind": "frozen_lake"}, "grid": {"n": [500]}})");
  CHECK(cfg.kind == FamilyKind::frozen_lake);
  CHECK(cfg.effective_demos_per_task() == 500);
  CHECK(cfg.effective_t() == std::vector<int>{1, 2, 4, 8});
  CHECK(cfg.effective_m() == std::vector<int>{500});
  CHECK(cfg.seeds.size() == 5);
  CHECK(cfg.mtbc.epochs == 200);
  CHECK(cfg.mtbc.batch_size == 128);
  CHECK(cfg.mtbc.optimizer == Optimizer::adam);

  const ExperimentConfig pend =
      parse_config_text(R"({"family": {"kind": "pendulum"}})");
  CHECK(pend.effective_demos_per_task() == 1000);
  CHECK(pend.effective_n() == std::vector<int>{1000, 2000, 4000, 8000});
}

TEST_CASE("config: unknown keys are rejected by name") {
  try {
    parse_config_text(
        R"({"family": {"kind": "frozen_lake"}, "mtbc": {"leraning_rate": 0.1}})");
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("leraning_rate") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text(R"({"grid": {"n": [10]}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text(R"({"family": {"kind": "swamp"}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text(R"({"family": {"kind": "frozen_lake"}, "grid": {"n": [0]}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("{not json"), std::invalid_argument);
}

TEST_CASE("config: effective dump round-trips") {
  const ExperimentConfig cfg = parse_config_text(R"({
    "family": {"kind": "planted", "num_states": 24, "num_actions": 4, "repr_dim": 6},
    "grid": {"n": [100, 200], "t": [1, 2], "m": [50]},
    "seeds": [3, 4],
    "sampling": "rollout",
    "mtbc": {"epochs": 11, "optimizer": "sgd"}
  })");
  const std::string dump = config_to_json(cfg);
  const ExperimentConfig reparsed = parse_config_text(dump);
  CHECK(config_to_json(reparsed) == dump);
  CHECK(reparsed.sampling == SamplingMode::rollout);
  CHECK(reparsed.mtbc.optimizer == Optimizer::sgd);
  CHECK(reparsed.ranges.planted.num_states == 24);
}

TEST_CASE("run_grid: one cell produces one MTBC and one BC record") {
  const ExperimentConfig cfg = tiny_lake_config();
  const auto records = run_grid(cfg);
  REQUIRE(records.size() == 2);
  CHECK(records[0].method == "BC");
  CHECK(records[1].method == "MTBC");
  for (const auto& r : records) {
    CHECK(r.ok);
    CHECK(r.family_kind == "frozen_lake");
    CHECK(r.n == 60);
    CHECK(std::isfinite(r.normalized_return));
    CHECK(std::isfinite(r.final_train_loss));
  }
  CHECK(records[1].has_test_loss);
  CHECK_FALSE(records[0].has_test_loss);

  const std::string csv = records_to_csv(records);
  CHECK(csv.rfind("family_kind,seed,n,t,m,method,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
}

TEST_CASE("run_grid: record count covers the full grid and reruns are byte-identical") {
  ExperimentConfig cfg = parse_config_text(R"({
    "family": {"kind": "frozen_lake"},
    "grid": {"n": [40, 80], "t": [1, 2], "m": [40]},
    "seeds": [0, 1],
    "mtbc": {"epochs": 5, "hidden": [12], "repr_dim": 6},
    "bc": {"epochs": 5, "hidden": [12], "repr_dim": 6},
    "workers": 2
  })");
  const auto records = run_grid(cfg);
  CHECK(records.size() == 2u * 2u * 2u * 1u * 2u);  // seeds x n x t x m x methods

  const std::string csv_a = records_to_csv(records);
  cfg.workers = 1;  // worker count must not affect the bytes
  const std::string csv_b = records_to_csv(run_grid(cfg));
  CHECK(csv_a == csv_b);

  // BC rows are constant across the (n, t) grid at fixed (seed, m).
  double bc_return = 0.0;
  bool first = true;
  for (const auto& r : records) {
    if (r.method != "BC" || r.seed != 0) continue;
    if (first) {
      bc_return = r.normalized_return;
      first = false;
    } else {
      CHECK(r.normalized_return == bc_return);
    }
  }
}

TEST_CASE("records CSV round-trips through the reader") {
  const auto records = run_grid(tiny_lake_config());
  TempDir dir("mtil_records_test");
  const std::string path = (dir.path / "records.csv").string();
  {
    std::ofstream out(path);
    out << records_to_csv(records);
  }
  const auto loaded = read_records_csv(path);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].method == records[i].method);
    CHECK(loaded[i].seed == records[i].seed);
    CHECK(loaded[i].normalized_return == records[i].normalized_return);
  }
}

TEST_CASE("summarize: hand-computed stderr and independent recompute") {
  std::vector<ExperimentRecord> records;
  const double returns[] = {0.5, 0.7, 0.9};
  for (int seed = 0; seed < 3; ++seed) {
    ExperimentRecord r;
    r.family_kind = "frozen_lake";
    r.seed = static_cast<std::uint64_t>(seed);
    r.n = 100;
    r.t = 2;
    r.m = 100;
    r.method = "MTBC";
    r.normalized_return = returns[seed];
    r.ok = true;
    records.push_back(r);
  }
  PlotSpec spec;
  const auto summaries = summarize_records(records, spec);
  REQUIRE(summaries.size() == 1);
  REQUIRE(summaries[0].series.size() == 1);
  REQUIRE(summaries[0].series[0].points.size() == 1);
  const PlotPoint& point = summaries[0].series[0].points[0];
  CHECK(point.mean == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(point.std_error == doctest::Approx(0.11547).epsilon(1e-4));

  // Independent pass over the records reproduces the emitted statistics.
  double mean = 0.0;
  for (double v : returns) mean += v;
  mean /= 3.0;
  double sq = 0.0;
  for (double v : returns) sq += (v - mean) * (v - mean);
  const double stderr_indep = std::sqrt(sq / 2.0) / std::sqrt(3.0);
  CHECK(std::abs(point.mean - mean) <= 1e-12);
  CHECK(std::abs(point.std_error - stderr_indep) <= 1e-12);

  CHECK_THROWS_AS(summarize_records({}, spec), std::invalid_argument);
}

TEST_CASE("summarize: single-seed cells warn about zero-width bands") {
  std::vector<ExperimentRecord> records(1);
  records[0].family_kind = "frozen_lake";
  records[0].seed = 0;
  records[0].n = 100;
  records[0].t = 1;
  records[0].m = 100;
  records[0].method = "MTBC";
  records[0].normalized_return = 0.5;
  records[0].ok = true;
  PlotSpec spec;
  const auto summaries = summarize_records(records, spec);
  REQUIRE(summaries.size() == 1);
  CHECK(summaries[0].series[0].points[0].std_error == 0.0);
  CHECK_FALSE(summaries[0].warnings.empty());
}

TEST_CASE("SVG output is structurally sound with one polyline per series") {
  const ExperimentConfig cfg = parse_config_text(R"({
    "family": {"kind": "frozen_lake"},
    "grid": {"n": [40, 80], "t": [1, 2], "m": [40]},
    "seeds": [0, 1, 2],
    "mtbc": {"epochs": 4, "hidden": [12], "repr_dim": 6},
    "bc": {"epochs": 4, "hidden": [12], "repr_dim": 6}
  })");
  const auto records = run_grid(cfg);
  PlotSpec spec;
  spec.title = "trend";
  const auto summaries = summarize_records(records, spec);
  REQUIRE(summaries.size() == 1);
  const std::string svg = render_svg(summaries[0], spec);

  CHECK(svg.rfind("<svg xmlns=", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("NaN") == std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos;
       pos = svg.find("<polyline", pos + 1))
    ++polylines;
  CHECK(polylines == summaries[0].series.size());
  CHECK(svg.find("stroke-dasharray") != std::string::npos);  // BC reference line

  TempDir dir("mtil_plot_test");
  const auto paths = emit_plots(records, spec, dir.path.string());
  REQUIRE(paths.size() == 1);
  CHECK(std::filesystem::exists(paths[0]));
}

TEST_CASE("plot spec parsing is strict") {
  const PlotSpec spec = parse_plot_spec_text(
      R"({"name": "fig1", "x_field": "t", "series_field": "n"})");
  CHECK(spec.name == "fig1");
  CHECK_THROWS_AS(parse_plot_spec_text(R"({"x_axis": "t"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_plot_spec_text(R"({"x_field": "q"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_plot_spec_text(R"({"x_field": "t", "series_field": "t"})"),
                  std::invalid_argument);
}

TEST_CASE("bounds sweep on a small planted family") {
  // Data-limited regime: diversity is measured before training converges.
  const ExperimentConfig cfg = parse_config_text(R"({
    "family": {"kind": "planted", "num_states": 20, "num_actions": 4, "repr_dim": 6,
                "obs_dim": 6, "planted_hidden": [12]},
    "grid": {"n": [150], "t": [1, 2], "m": [150]},
    "seeds": [0],
    "mtbc": {"epochs": 30, "hidden": [16, 16], "repr_dim": 6},
    "bounds": {"rademacher_draws": 4, "ascent_steps": 40, "pgd_steps": 500,
                "zeta_steps": 500},
    "workers": 1
  })");
  const auto rows = run_bounds_sweep(cfg);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    const BoundReport& report = row.report;
    CHECK(report.bounds_available);
    CHECK(std::isfinite(report.transfer_risk));
    CHECK(std::isfinite(report.d_bar));
    CHECK(std::isfinite(report.d_worst));
    CHECK(std::isfinite(report.zeta_hat));
    CHECK(report.zeta_hat < 0.5);
    CHECK(std::isfinite(report.rademacher_repr));
    CHECK(std::isfinite(report.policy_error_lhs));
    CHECK(report.theorem1_holds);
    CHECK(report.policy_error_rhs > 0.0);
  }
  const std::string csv = bounds_rows_to_csv(rows);
  CHECK(csv.rfind("seed,n,t,m,transfer_risk,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  ExperimentConfig wrong = tiny_lake_config();
  CHECK_THROWS_AS(run_bounds_sweep(wrong), std::invalid_argument);
}
