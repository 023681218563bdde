#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mtil/demos.hpp"
#include "mtil/envs.hpp"
#include "mtil/experiment.hpp"
#include "mtil/metrics.hpp"
#include "mtil/plot.hpp"
#include "mtil/solvers.hpp"
#include "mtil/train.hpp"

namespace {

namespace fs = std::filesystem;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

int cmd_run(const std::string& config_path, const std::string& output_override) {
  mtil::ExperimentConfig config = mtil::parse_config(config_path);
  if (!output_override.empty()) config.output_dir = output_override;
  fs::create_directories(config.output_dir);
  write_file(config.output_dir + "/effective_config.json", mtil::config_to_json(config));

  const std::vector<mtil::ExperimentRecord> records = mtil::run_grid(config);
  const std::string csv_path = config.output_dir + "/records.csv";
  write_file(csv_path, mtil::records_to_csv(records));

  int failures = 0;
  for (const auto& r : records)
    if (!r.ok) ++failures;
  std::cout << "wrote " << records.size() << " records to " << csv_path;
  if (failures > 0) std::cout << " (" << failures << " NA rows)";
  std::cout << '\n';
  return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& spec_path,
             const std::string& out_dir) {
  const auto records = mtil::read_records_csv(csv_path);
  const mtil::PlotSpec spec = mtil::parse_plot_spec(spec_path);
  const auto summaries = mtil::summarize_records(records, spec);
  for (const auto& data : summaries)
    for (const auto& warning : data.warnings) std::cerr << "warning: " << warning << '\n';
  const auto paths = mtil::emit_plots(records, spec, out_dir);
  for (const auto& path : paths) std::cout << "wrote " << path << '\n';
  return 0;
}

int cmd_bounds(const std::string& config_path, const std::string& output_override) {
  mtil::ExperimentConfig config = mtil::parse_config(config_path);
  if (!output_override.empty()) config.output_dir = output_override;
  fs::create_directories(config.output_dir);
  write_file(config.output_dir + "/effective_config.json", mtil::config_to_json(config));

  const auto rows = mtil::run_bounds_sweep(config);
  const std::string csv_path = config.output_dir + "/bounds.csv";
  write_file(csv_path, mtil::bounds_rows_to_csv(rows));
  for (const auto& row : rows) {
    std::ostringstream name;
    name << config.output_dir << "/bounds_seed" << row.seed << "_n" << row.n << "_t" << row.t
         << "_m" << row.m << ".txt";
    write_file(name.str(), row.report.key_value_text());
  }
  std::cout << "wrote " << rows.size() << " bound reports to " << csv_path << '\n';
  return 0;
}

// Compact oracle/property suite; exits nonzero on the first failure.
int cmd_selftest() {
  int checked = 0, failed = 0;
  const auto check = [&](bool ok, const std::string& label) {
    ++checked;
    if (!ok) ++failed;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << label << '\n';
  };

  // Tabular solver identities.
  {
    mtil::FiniteMdp single;
    single.num_states = 1;
    single.num_actions = 1;
    single.reward = Eigen::MatrixXd::Constant(1, 1, 1.0);
    mtil::SparseRowMat t(1, 1);
    t.insert(0, 0) = 1.0;
    single.transition = {t};
    single.initial_dist = Eigen::VectorXd::Ones(1);
    single.gamma = 0.9;
    single.observation = Eigen::MatrixXd::Ones(1, 1);
    single.validate();
    const Eigen::VectorXd v =
        mtil::policy_evaluation(single, mtil::TabularPolicy::uniform(1, 1));
    check(std::abs(v[0] - 10.0) < 1e-9, "geometric-series value on a single state");
  }
  {
    const mtil::FiniteMdp lake = mtil::make_frozen_lake(0, 63, 0.2, 0.99);
    const auto vi = mtil::value_iteration(lake);
    check(vi.policy.is_deterministic(), "value-iteration expert is deterministic");
    const auto dist = mtil::stationary_distribution(lake, vi.policy);
    check(std::abs(dist.state_dist.sum() - 1.0) < 1e-8,
          "stationary distribution normalizes");
    const auto demos = mtil::sample_demos_exact(lake, vi.policy, 1000, 7);
    const auto demos2 = mtil::sample_demos_exact(lake, vi.policy, 1000, 7);
    check(demos.pairs == demos2.pairs, "exact demo sampling is seed-deterministic");
  }

  // Loss properties on random logits.
  {
    mtil::SplitRng rng(123);
    bool lipschitz_ok = true, bound_ok = true;
    for (int trial = 0; trial < 500; ++trial) {
      const int actions = 2 + rng.uniform_int(0, 8);
      Eigen::VectorXd x(actions), y(actions);
      for (int i = 0; i < actions; ++i) {
        x[i] = rng.normal() * 5.0;
        y[i] = rng.normal() * 5.0;
      }
      const int a = rng.uniform_int(0, actions - 1);
      const double lhs = std::abs(mtil::log_softmax_loss(x, a) - mtil::log_softmax_loss(y, a));
      if (lhs > std::sqrt(2.0) * (x - y).norm() + 1e-9) lipschitz_ok = false;
      if (mtil::log_softmax_loss(x, a) < 0.0) bound_ok = false;
    }
    check(lipschitz_ok, "log-softmax loss sqrt(2)-Lipschitz on random logit pairs");
    check(bound_ok, "log-softmax loss non-negative");
  }

  // Rademacher closed form vs explicit optimal head.
  {
    mtil::SplitRng rng(5);
    Eigen::MatrixXd data(6, 3), signs(6, 2);
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 3; ++c) data(r, c) = rng.normal();
      for (int c = 0; c < 2; ++c) signs(r, c) = rng.next_unit() < 0.5 ? -1.0 : 1.0;
    }
    const double closed = mtil::linear_rademacher_draw_sup(data, signs, 2.0);
    const Eigen::MatrixXd e = signs.transpose() * data;
    const Eigen::MatrixXd w_star = 2.0 * e / e.norm();
    const double explicit_value = (signs.array() * (data * w_star.transpose()).array()).sum() / 6.0;
    check(std::abs(closed - explicit_value) < 1e-12,
          "linear Rademacher sup matches explicit maximizer");
  }

  // Theorem-5 style check on a random softmax policy.
  {
    const mtil::FiniteMdp lake = mtil::make_frozen_lake(8, 55, 0.15, 0.99);
    const auto vi = mtil::value_iteration(lake);
    mtil::SplitRng rng(42);
    mtil::SplitRng init = rng.sub("policy");
    mtil::PolicyParams policy;
    policy.repr = mtil::make_repr(lake.obs_dim(), {16}, 8, 10.0, init);
    policy.head = mtil::make_head(lake.num_actions, 8, 10.0, init);
    const auto result = mtil::verify_theorem5(lake, vi.policy, policy);
    check(result.holds, "policy-error bound holds for a random softmax policy");
  }

  std::cout << checked << " checks, " << failed << " failures\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multitask imitation-learning laboratory on finite MDPs"};
  app.require_subcommand(1);

  std::string config_path, csv_path, spec_path, out_dir;

  CLI::App* run = app.add_subcommand("run", "Run an experiment grid from a config file");
  run->add_option("config", config_path, "Path to the JSON experiment config")->required();
  std::string run_out;
  run->add_option("--output-dir", run_out, "Override the config's output directory");

  CLI::App* plot = app.add_subcommand("plot", "Render SVG plots from a records CSV");
  plot->add_option("csv", csv_path, "Path to records.csv")->required();
  plot->add_option("spec", spec_path, "Path to the JSON plot spec")->required();
  std::string plot_out = "plots";
  plot->add_option("--output-dir", plot_out, "Directory for the SVG files");

  CLI::App* bounds =
      app.add_subcommand("bounds", "Bound-report sweep on the planted family");
  bounds->add_option("config", config_path, "Path to the JSON experiment config")->required();
  std::string bounds_out;
  bounds->add_option("--output-dir", bounds_out, "Override the config's output directory");

  app.add_subcommand("selftest", "Run the built-in oracle/property suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("run")) return cmd_run(config_path, run_out);
    if (app.got_subcommand("plot")) return cmd_plot(csv_path, spec_path, plot_out);
    if (app.got_subcommand("bounds")) return cmd_bounds(config_path, bounds_out);
    if (app.got_subcommand("selftest")) return cmd_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
