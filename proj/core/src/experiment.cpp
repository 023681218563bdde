#include "mtil/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "mtil/demos.hpp"
#include "mtil/solvers.hpp"

namespace mtil {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t mix_indices(std::initializer_list<std::uint64_t> values) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (std::uint64_t v : values) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xbf58476d1ce4e5b9ULL;
  }
  return h;
}

void parallel_for(int num_jobs, int workers, const std::function<void(int)>& fn) {
  if (num_jobs <= 0) return;
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, num_jobs));
  if (workers == 1) {
    for (int j = 0; j < num_jobs; ++j) fn(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int j = next.fetch_add(1); j < num_jobs; j = next.fetch_add(1)) fn(j);
    });
  }
  for (auto& th : pool) th.join();
}

// ---- strict JSON helpers ----

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (key == k) known = true;
    if (!known)
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config: invalid value for key '") + key + "'");
  }
}

TrainConfig parse_train_config(const json& obj, const char* where, const TrainConfig& base) {
  require_keys(obj, where,
               {"epochs", "batch_size", "lr_repr", "lr_head", "optimizer", "beta1", "beta2",
                "adam_eps", "hidden", "repr_dim", "c_phi", "c_f", "full_batch"});
  TrainConfig cfg = base;
  cfg.epochs = get_or(obj, "epochs", cfg.epochs);
  cfg.batch_size = get_or(obj, "batch_size", cfg.batch_size);
  cfg.lr_repr = get_or(obj, "lr_repr", cfg.lr_repr);
  cfg.lr_head = get_or(obj, "lr_head", cfg.lr_head);
  if (obj.contains("optimizer")) {
    const std::string name = obj.at("optimizer").get<std::string>();
    if (name == "adam")
      cfg.optimizer = Optimizer::adam;
    else if (name == "sgd")
      cfg.optimizer = Optimizer::sgd;
    else
      throw std::invalid_argument("config: optimizer must be 'adam' or 'sgd', got '" + name + "'");
  }
  cfg.beta1 = get_or(obj, "beta1", cfg.beta1);
  cfg.beta2 = get_or(obj, "beta2", cfg.beta2);
  cfg.adam_eps = get_or(obj, "adam_eps", cfg.adam_eps);
  cfg.hidden = get_or(obj, "hidden", cfg.hidden);
  cfg.repr_dim = get_or(obj, "repr_dim", cfg.repr_dim);
  cfg.c_phi = get_or(obj, "c_phi", cfg.c_phi);
  cfg.c_f = get_or(obj, "c_f", cfg.c_f);
  cfg.full_batch = get_or(obj, "full_batch", cfg.full_batch);
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"lr_repr", cfg.lr_repr},
              {"lr_head", cfg.lr_head},
              {"optimizer", cfg.optimizer == Optimizer::adam ? "adam" : "sgd"},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"adam_eps", cfg.adam_eps},
              {"hidden", cfg.hidden},
              {"repr_dim", cfg.repr_dim},
              {"c_phi", cfg.c_phi},
              {"c_f", cfg.c_f},
              {"full_batch", cfg.full_batch}};
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
  for (int v : effective_n())
    if (v < 1) throw std::invalid_argument("config: grid n values must be positive");
  for (int v : effective_t())
    if (v < 1) throw std::invalid_argument("config: grid t values must be positive");
  for (int v : effective_m())
    if (v < 1) throw std::invalid_argument("config: grid m values must be positive");
  if (effective_n().empty() || effective_t().empty() || effective_m().empty())
    throw std::invalid_argument("config: grid lists must be non-empty");
  if (demos_per_task < 0) throw std::invalid_argument("config: demos_per_task must be positive");
  if (rollout_timeout < 1) throw std::invalid_argument("config: rollout_timeout must be >= 1");
  mtbc.validate();
  bc.validate();
}

int ExperimentConfig::effective_demos_per_task() const {
  if (demos_per_task > 0) return demos_per_task;
  return kind == FamilyKind::pendulum ? 1000 : 500;
}

std::vector<int> ExperimentConfig::effective_n() const {
  if (!grid_n.empty()) return grid_n;
  const int d = effective_demos_per_task();
  return {d, 2 * d, 4 * d, 8 * d};
}

std::vector<int> ExperimentConfig::effective_t() const {
  return grid_t.empty() ? std::vector<int>{1, 2, 4, 8} : grid_t;
}

std::vector<int> ExperimentConfig::effective_m() const {
  if (!grid_m.empty()) return grid_m;
  return {effective_demos_per_task()};
}

ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
  }
  require_keys(root, "top level",
               {"family", "grid", "demos_per_task", "seeds", "sampling", "rollout_timeout",
                "mtbc", "bc", "bounds", "workers", "output_dir"});
  if (!root.contains("family"))
    throw std::invalid_argument("config: missing required key 'family'");

  ExperimentConfig cfg;
  const json& family = root.at("family");
  require_keys(family, "family",
               {"kind", "gamma", "slip_min", "slip_max", "start_cells", "goal_cells",
                "torque_min", "torque_max", "angle_bins", "velocity_bins", "num_states",
                "num_actions", "repr_dim", "obs_dim", "planted_hidden", "margin",
                "transition_fanout"});
  if (!family.contains("kind"))
    throw std::invalid_argument("config: missing required key 'family.kind'");
  cfg.kind = family_kind_from_string(family.at("kind").get<std::string>());
  cfg.ranges.kind = cfg.kind;

  const double gamma = get_or(family, "gamma", 0.99);
  cfg.ranges.lake.gamma = gamma;
  cfg.ranges.pendulum.gamma = gamma;
  cfg.ranges.planted.gamma = gamma;
  cfg.ranges.lake.slip_min = get_or(family, "slip_min", cfg.ranges.lake.slip_min);
  cfg.ranges.lake.slip_max = get_or(family, "slip_max", cfg.ranges.lake.slip_max);
  cfg.ranges.lake.start_cells = get_or(family, "start_cells", cfg.ranges.lake.start_cells);
  cfg.ranges.lake.goal_cells = get_or(family, "goal_cells", cfg.ranges.lake.goal_cells);
  cfg.ranges.pendulum.torque_min = get_or(family, "torque_min", cfg.ranges.pendulum.torque_min);
  cfg.ranges.pendulum.torque_max = get_or(family, "torque_max", cfg.ranges.pendulum.torque_max);
  cfg.ranges.pendulum.angle_bins = get_or(family, "angle_bins", cfg.ranges.pendulum.angle_bins);
  cfg.ranges.pendulum.velocity_bins =
      get_or(family, "velocity_bins", cfg.ranges.pendulum.velocity_bins);
  cfg.ranges.planted.num_states = get_or(family, "num_states", cfg.ranges.planted.num_states);
  cfg.ranges.planted.num_actions = get_or(family, "num_actions", cfg.ranges.planted.num_actions);
  cfg.ranges.planted.repr_dim = get_or(family, "repr_dim", cfg.ranges.planted.repr_dim);
  cfg.ranges.planted.obs_dim = get_or(family, "obs_dim", cfg.ranges.planted.obs_dim);
  cfg.ranges.planted.hidden = get_or(family, "planted_hidden", cfg.ranges.planted.hidden);
  cfg.ranges.planted.margin = get_or(family, "margin", cfg.ranges.planted.margin);
  cfg.ranges.planted.transition_fanout =
      get_or(family, "transition_fanout", cfg.ranges.planted.transition_fanout);

  if (root.contains("grid")) {
    const json& grid = root.at("grid");
    require_keys(grid, "grid", {"n", "t", "m"});
    cfg.grid_n = get_or(grid, "n", cfg.grid_n);
    cfg.grid_t = get_or(grid, "t", cfg.grid_t);
    cfg.grid_m = get_or(grid, "m", cfg.grid_m);
  }
  cfg.demos_per_task = get_or(root, "demos_per_task", cfg.demos_per_task);
  cfg.seeds = get_or(root, "seeds", cfg.seeds);
  if (root.contains("sampling")) {
    const std::string mode = root.at("sampling").get<std::string>();
    if (mode == "exact")
      cfg.sampling = SamplingMode::exact;
    else if (mode == "rollout")
      cfg.sampling = SamplingMode::rollout;
    else
      throw std::invalid_argument("config: sampling must be 'exact' or 'rollout', got '" + mode + "'");
  }
  cfg.rollout_timeout = get_or(root, "rollout_timeout", cfg.rollout_timeout);
  if (root.contains("mtbc")) cfg.mtbc = parse_train_config(root.at("mtbc"), "mtbc", cfg.mtbc);
  if (root.contains("bc")) cfg.bc = parse_train_config(root.at("bc"), "bc", cfg.bc);

  // The planted ground truth and the trained class share constraint radii by
  // default, so bound quantities reference one (C_F, C_Phi) pair.
  cfg.ranges.planted.c_phi = cfg.mtbc.c_phi;
  cfg.ranges.planted.c_f = cfg.mtbc.c_f;

  if (root.contains("bounds")) {
    const json& bounds = root.at("bounds");
    require_keys(bounds, "bounds",
                 {"delta", "rademacher_draws", "ascent_steps", "ascent_restarts", "ascent_lr",
                  "pgd_restarts", "pgd_steps", "pgd_lr", "zeta_restarts", "zeta_steps",
                  "zeta_lr"});
    cfg.bounds.delta = get_or(bounds, "delta", cfg.bounds.delta);
    cfg.bounds.rademacher_draws = get_or(bounds, "rademacher_draws", cfg.bounds.rademacher_draws);
    cfg.bounds.ascent_steps = get_or(bounds, "ascent_steps", cfg.bounds.ascent_steps);
    cfg.bounds.ascent_restarts = get_or(bounds, "ascent_restarts", cfg.bounds.ascent_restarts);
    cfg.bounds.ascent_lr = get_or(bounds, "ascent_lr", cfg.bounds.ascent_lr);
    cfg.bounds.pgd_restarts = get_or(bounds, "pgd_restarts", cfg.bounds.pgd_restarts);
    cfg.bounds.pgd_steps = get_or(bounds, "pgd_steps", cfg.bounds.pgd_steps);
    cfg.bounds.pgd_lr = get_or(bounds, "pgd_lr", cfg.bounds.pgd_lr);
    cfg.bounds.zeta_restarts = get_or(bounds, "zeta_restarts", cfg.bounds.zeta_restarts);
    cfg.bounds.zeta_steps = get_or(bounds, "zeta_steps", cfg.bounds.zeta_steps);
    cfg.bounds.zeta_lr = get_or(bounds, "zeta_lr", cfg.bounds.zeta_lr);
  }
  cfg.workers = get_or(root, "workers", cfg.workers);
  cfg.output_dir = get_or(root, "output_dir", cfg.output_dir);

  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json family{{"kind", to_string(cfg.kind)}};
  switch (cfg.kind) {
    case FamilyKind::frozen_lake:
      family["gamma"] = cfg.ranges.lake.gamma;
      family["slip_min"] = cfg.ranges.lake.slip_min;
      family["slip_max"] = cfg.ranges.lake.slip_max;
      family["start_cells"] = cfg.ranges.lake.start_cells;
      family["goal_cells"] = cfg.ranges.lake.goal_cells;
      break;
    case FamilyKind::pendulum:
      family["gamma"] = cfg.ranges.pendulum.gamma;
      family["torque_min"] = cfg.ranges.pendulum.torque_min;
      family["torque_max"] = cfg.ranges.pendulum.torque_max;
      family["angle_bins"] = cfg.ranges.pendulum.angle_bins;
      family["velocity_bins"] = cfg.ranges.pendulum.velocity_bins;
      break;
    case FamilyKind::planted:
      family["gamma"] = cfg.ranges.planted.gamma;
      family["num_states"] = cfg.ranges.planted.num_states;
      family["num_actions"] = cfg.ranges.planted.num_actions;
      family["repr_dim"] = cfg.ranges.planted.repr_dim;
      family["obs_dim"] = cfg.ranges.planted.obs_dim;
      family["planted_hidden"] = cfg.ranges.planted.hidden;
      family["margin"] = cfg.ranges.planted.margin;
      family["transition_fanout"] = cfg.ranges.planted.transition_fanout;
      break;
  }
  json root{
      {"family", family},
      {"grid", json{{"n", cfg.effective_n()}, {"t", cfg.effective_t()}, {"m", cfg.effective_m()}}},
      {"demos_per_task", cfg.effective_demos_per_task()},
      {"seeds", cfg.seeds},
      {"sampling", cfg.sampling == SamplingMode::exact ? "exact" : "rollout"},
      {"rollout_timeout", cfg.rollout_timeout},
      {"mtbc", train_config_to_json(cfg.mtbc)},
      {"bc", train_config_to_json(cfg.bc)},
      {"bounds", json{{"delta", cfg.bounds.delta},
                      {"rademacher_draws", cfg.bounds.rademacher_draws},
                      {"ascent_steps", cfg.bounds.ascent_steps},
                      {"ascent_restarts", cfg.bounds.ascent_restarts},
                      {"ascent_lr", cfg.bounds.ascent_lr},
                      {"pgd_restarts", cfg.bounds.pgd_restarts},
                      {"pgd_steps", cfg.bounds.pgd_steps},
                      {"pgd_lr", cfg.bounds.pgd_lr},
                      {"zeta_restarts", cfg.bounds.zeta_restarts},
                      {"zeta_steps", cfg.bounds.zeta_steps},
                      {"zeta_lr", cfg.bounds.zeta_lr}}},
      {"workers", cfg.workers},
      {"output_dir", cfg.output_dir}};
  return root.dump(2) + "\n";
}

// ---- records CSV ----

std::string records_csv_header() {
  return "family_kind,seed,n,t,m,method,normalized_return,raw_return,value_gap_inf,"
         "final_train_loss,final_test_loss," +
         BoundReport::csv_header();
}

namespace {

int bound_column_count() {
  const std::string header = BoundReport::csv_header();
  return 1 + static_cast<int>(std::count(header.begin(), header.end(), ','));
}

std::string na_bound_columns() {
  std::string out;
  const int count = bound_column_count();
  for (int i = 0; i < count; ++i) {
    out += "NA";
    if (i + 1 < count) out += ',';
  }
  return out;
}

}  // namespace

std::string record_csv_row(const ExperimentRecord& r) {
  std::ostringstream out;
  out << r.family_kind << ',' << r.seed << ',' << r.n << ',' << r.t << ',' << r.m << ','
      << r.method << ',';
  if (r.ok) {
    out << fmt(r.normalized_return) << ',' << fmt(r.raw_return) << ',' << fmt(r.value_gap_inf)
        << ',' << fmt(r.final_train_loss) << ','
        << (r.has_test_loss ? fmt(r.final_test_loss) : "NA");
  } else {
    out << "NA,NA,NA,NA,NA";
  }
  out << ',' << (r.bounds ? r.bounds->csv_row() : na_bound_columns());
  return out.str();
}

std::string records_to_csv(const std::vector<ExperimentRecord>& records) {
  std::ostringstream out;
  out << records_csv_header() << '\n';
  for (const auto& r : records) out << record_csv_row(r) << '\n';
  return out.str();
}

std::vector<ExperimentRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("records: cannot open file " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("records: empty file " + path);
  if (line.rfind("family_kind,", 0) != 0)
    throw std::invalid_argument("records: unexpected header in " + path);

  std::vector<ExperimentRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() < 11)
      throw std::invalid_argument("records: malformed row '" + line + "'");
    ExperimentRecord r;
    r.family_kind = cells[0];
    r.seed = std::stoull(cells[1]);
    r.n = std::stoi(cells[2]);
    r.t = std::stoi(cells[3]);
    r.m = std::stoi(cells[4]);
    r.method = cells[5];
    r.ok = cells[6] != "NA";
    if (r.ok) {
      r.normalized_return = std::stod(cells[6]);
      r.raw_return = std::stod(cells[7]);
      r.value_gap_inf = std::stod(cells[8]);
      r.final_train_loss = std::stod(cells[9]);
      r.has_test_loss = cells[10] != "NA";
      if (r.has_test_loss) r.final_test_loss = std::stod(cells[10]);
    }
    records.push_back(std::move(r));
  }
  return records;
}

// ---- run_grid ----

namespace {

struct SeedContext {
  bool ok = false;
  std::string error;
  TaskFamily family;
  std::vector<TabularPolicy> source_experts;
  TabularPolicy target_expert;
  std::vector<DemoSet> source_demos;  // length t_max, each holding n_max pairs
  DemoSet target_demos;               // m_max pairs
  Eigen::VectorXd v_expert;
  double expert_return = 0.0;
  double random_return = 0.0;
};

DemoSet slice_demos(const DemoSet& full, int count) {
  DemoSet out;
  out.task_id = full.task_id;
  out.seed = full.seed;
  out.pairs.assign(full.pairs.begin(), full.pairs.begin() + count);
  return out;
}

DemoSet draw_demos(const ExperimentConfig& cfg, const FiniteMdp& mdp,
                   const TabularPolicy& expert, int n, std::uint64_t seed,
                   const std::string& task_id) {
  if (cfg.sampling == SamplingMode::exact)
    return sample_demos_exact(mdp, expert, n, seed, task_id);
  return sample_demos_rollout(mdp, expert, n, cfg.rollout_timeout, seed, task_id);
}

SeedContext build_seed_context(const ExperimentConfig& cfg, std::uint64_t seed, int t_max,
                               int n_max, int m_max) {
  SeedContext ctx;
  try {
    ctx.family = sample_task_family(cfg.kind, t_max, cfg.ranges, seed);
    if (ctx.family.planted) {
      ctx.source_experts = ctx.family.planted->source_experts;
      ctx.target_expert = ctx.family.planted->target_expert;
    } else {
      for (const auto& task : ctx.family.source_tasks)
        ctx.source_experts.push_back(value_iteration(task).policy);
      ctx.target_expert = value_iteration(ctx.family.target_task).policy;
    }

    SplitRng seed_rng(seed);
    for (int t = 0; t < t_max; ++t) {
      const std::uint64_t demo_seed = seed_rng.sub("demo-seed", static_cast<std::uint64_t>(t)).next_u64();
      ctx.source_demos.push_back(draw_demos(cfg, ctx.family.source_tasks[t], ctx.source_experts[t],
                                            n_max, demo_seed, "source" + std::to_string(t)));
    }
    const std::uint64_t target_demo_seed = seed_rng.sub("demo-seed-target").next_u64();
    ctx.target_demos = draw_demos(cfg, ctx.family.target_task, ctx.target_expert, m_max,
                                  target_demo_seed, "target");

    ctx.v_expert = policy_evaluation(ctx.family.target_task, ctx.target_expert);
    ctx.expert_return = ctx.family.target_task.initial_dist.dot(ctx.v_expert);
    const Eigen::VectorXd v_random = policy_evaluation(
        ctx.family.target_task,
        TabularPolicy::uniform(ctx.family.target_task.num_states,
                               ctx.family.target_task.num_actions));
    ctx.random_return = ctx.family.target_task.initial_dist.dot(v_random);
    ctx.ok = true;
  } catch (const std::exception& e) {
    ctx.ok = false;
    ctx.error = e.what();
  }
  return ctx;
}

void fill_eval(const SeedContext& ctx, const TabularPolicy& tab, ExperimentRecord& record) {
  const Eigen::VectorXd v = policy_evaluation(ctx.family.target_task, tab);
  record.raw_return = ctx.family.target_task.initial_dist.dot(v);
  record.value_gap_inf = value_gap(ctx.v_expert, v);
  const double denom = ctx.expert_return - ctx.random_return;
  if (std::abs(denom) > 1e-12)
    record.normalized_return = (record.raw_return - ctx.random_return) / denom;
  else
    record.normalized_return = std::numeric_limits<double>::quiet_NaN();
}

double joint_last_epoch_loss(const std::vector<LossTraceRow>& trace, int epochs) {
  double sum = 0.0;
  int count = 0;
  for (const auto& row : trace) {
    if (row.epoch == epochs - 1) {
      sum += row.loss;
      ++count;
    }
  }
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::vector<ExperimentRecord> run_grid(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<int> ns = cfg.effective_n();
  const std::vector<int> ts = cfg.effective_t();
  const std::vector<int> ms = cfg.effective_m();
  const int t_max = *std::max_element(ts.begin(), ts.end());
  const int n_max = *std::max_element(ns.begin(), ns.end());
  const int m_max = *std::max_element(ms.begin(), ms.end());
  const int s_count = static_cast<int>(cfg.seeds.size());

  std::vector<SeedContext> contexts(cfg.seeds.size());
  parallel_for(s_count, cfg.workers, [&](int i) {
    contexts[static_cast<std::size_t>(i)] =
        build_seed_context(cfg, cfg.seeds[static_cast<std::size_t>(i)], t_max, n_max, m_max);
  });

  const int num_n = static_cast<int>(ns.size());
  const int num_t = static_cast<int>(ts.size());
  const int num_m = static_cast<int>(ms.size());
  std::vector<ExperimentRecord> records(
      static_cast<std::size_t>(s_count) * num_n * num_t * num_m * 2);
  const auto slot = [&](int si, int ni, int ti, int mi, int method) {
    return ((((static_cast<std::size_t>(si) * num_n + ni) * num_t + ti) * num_m + mi) * 2 +
            method);
  };

  // Pre-fill identity columns (and NA diagnostics for failed seeds).
  for (int si = 0; si < s_count; ++si) {
    for (int ni = 0; ni < num_n; ++ni)
      for (int ti = 0; ti < num_t; ++ti)
        for (int mi = 0; mi < num_m; ++mi)
          for (int method = 0; method < 2; ++method) {
            ExperimentRecord& r = records[slot(si, ni, ti, mi, method)];
            r.family_kind = to_string(cfg.kind);
            r.seed = cfg.seeds[static_cast<std::size_t>(si)];
            r.n = ns[static_cast<std::size_t>(ni)];
            r.t = ts[static_cast<std::size_t>(ti)];
            r.m = ms[static_cast<std::size_t>(mi)];
            r.method = method == 0 ? "BC" : "MTBC";
            if (!contexts[static_cast<std::size_t>(si)].ok)
              r.error = contexts[static_cast<std::size_t>(si)].error;
          }
  }

  // MTBC jobs: one training per (seed, N, T), transfers per M.
  struct MtbcJob {
    int si, ni, ti;
  };
  std::vector<MtbcJob> mtbc_jobs;
  for (int si = 0; si < s_count; ++si) {
    if (!contexts[static_cast<std::size_t>(si)].ok) continue;
    for (int ni = 0; ni < num_n; ++ni)
      for (int ti = 0; ti < num_t; ++ti) mtbc_jobs.push_back({si, ni, ti});
  }
  parallel_for(static_cast<int>(mtbc_jobs.size()), cfg.workers, [&](int j) {
    const MtbcJob job = mtbc_jobs[static_cast<std::size_t>(j)];
    const SeedContext& ctx = contexts[static_cast<std::size_t>(job.si)];
    const int n = ns[static_cast<std::size_t>(job.ni)];
    const int t = ts[static_cast<std::size_t>(job.ti)];
    const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(job.si)];
    const Eigen::MatrixXd& observations = ctx.family.target_task.observation;
    const int num_actions = ctx.family.target_task.num_actions;

    std::string train_error;
    MultitaskModel model;
    bool trained = false;
    try {
      std::vector<DemoSet> demos;
      demos.reserve(t);
      for (int k = 0; k < t; ++k) demos.push_back(slice_demos(ctx.source_demos[k], n));
      TrainConfig train_cfg = cfg.mtbc;
      train_cfg.seed = SplitRng(seed)
                           .sub("train-mtbc", mix_indices({static_cast<std::uint64_t>(n),
                                                           static_cast<std::uint64_t>(t)}))
                           .next_u64();
      model = train_multitask(demos, observations, num_actions, train_cfg);
      trained = true;
    } catch (const std::exception& e) {
      train_error = e.what();
    }

    for (int mi = 0; mi < num_m; ++mi) {
      ExperimentRecord& r = records[slot(job.si, job.ni, job.ti, mi, 1)];
      if (!trained) {
        r.error = train_error;
        continue;
      }
      try {
        const int m = ms[static_cast<std::size_t>(mi)];
        TrainConfig transfer_cfg = cfg.mtbc;
        transfer_cfg.seed =
            SplitRng(seed)
                .sub("transfer", mix_indices({static_cast<std::uint64_t>(n),
                                              static_cast<std::uint64_t>(t),
                                              static_cast<std::uint64_t>(m)}))
                .next_u64();
        const TransferResult result = transfer(model.repr, slice_demos(ctx.target_demos, m),
                                               observations, num_actions, transfer_cfg);
        const PolicyParams policy{model.repr, result.head};
        fill_eval(ctx, tabularize(policy, observations), r);
        r.final_train_loss = joint_last_epoch_loss(model.trace, cfg.mtbc.epochs);
        r.final_test_loss = joint_last_epoch_loss(result.trace, cfg.mtbc.epochs);
        r.has_test_loss = true;
        r.ok = true;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  });

  // BC jobs depend only on (seed, M); rows are replicated across the N x T grid.
  struct BcJob {
    int si, mi;
  };
  std::vector<BcJob> bc_jobs;
  for (int si = 0; si < s_count; ++si) {
    if (!contexts[static_cast<std::size_t>(si)].ok) continue;
    for (int mi = 0; mi < num_m; ++mi) bc_jobs.push_back({si, mi});
  }
  parallel_for(static_cast<int>(bc_jobs.size()), cfg.workers, [&](int j) {
    const BcJob job = bc_jobs[static_cast<std::size_t>(j)];
    const SeedContext& ctx = contexts[static_cast<std::size_t>(job.si)];
    const int m = ms[static_cast<std::size_t>(job.mi)];
    const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(job.si)];

    ExperimentRecord result;
    try {
      TrainConfig train_cfg = cfg.bc;
      train_cfg.seed =
          SplitRng(seed).sub("train-bc", static_cast<std::uint64_t>(m)).next_u64();
      const BcModel model = train_bc(slice_demos(ctx.target_demos, m),
                                     ctx.family.target_task.observation,
                                     ctx.family.target_task.num_actions, train_cfg);
      fill_eval(ctx, tabularize(model.policy, ctx.family.target_task.observation), result);
      result.final_train_loss = joint_last_epoch_loss(model.trace, cfg.bc.epochs);
      result.has_test_loss = false;
      result.ok = true;
    } catch (const std::exception& e) {
      result.error = e.what();
    }

    for (int ni = 0; ni < num_n; ++ni)
      for (int ti = 0; ti < num_t; ++ti) {
        ExperimentRecord& r = records[slot(job.si, ni, ti, job.mi, 0)];
        r.ok = result.ok;
        r.error = result.error;
        r.normalized_return = result.normalized_return;
        r.raw_return = result.raw_return;
        r.value_gap_inf = result.value_gap_inf;
        r.final_train_loss = result.final_train_loss;
        r.final_test_loss = result.final_test_loss;
        r.has_test_loss = result.has_test_loss;
      }
  });

  std::sort(records.begin(), records.end(), [](const ExperimentRecord& a, const ExperimentRecord& b) {
    return std::tie(a.seed, a.n, a.t, a.m, a.method) < std::tie(b.seed, b.n, b.t, b.m, b.method);
  });
  return records;
}

// ---- bounds sweep ----

std::vector<BoundsRow> run_bounds_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.kind != FamilyKind::planted)
    throw std::invalid_argument("bounds sweep: family.kind must be 'planted'");

  const std::vector<int> ns = cfg.effective_n();
  const std::vector<int> ts = cfg.effective_t();
  const std::vector<int> ms = cfg.effective_m();
  const int t_max = *std::max_element(ts.begin(), ts.end());
  const int n_max = *std::max_element(ns.begin(), ns.end());
  const int m_max = *std::max_element(ms.begin(), ms.end());

  const int cells_per_seed = static_cast<int>(ns.size() * ts.size() * ms.size());
  std::vector<BoundsRow> rows(cfg.seeds.size() * static_cast<std::size_t>(cells_per_seed));

  parallel_for(static_cast<int>(cfg.seeds.size()), cfg.workers, [&](int si) {
    const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(si)];
    const SeedContext ctx = build_seed_context(cfg, seed, t_max, n_max, m_max);
    if (!ctx.ok) throw std::runtime_error("bounds sweep: seed setup failed: " + ctx.error);
    const PlantedGroundTruth& truth = *ctx.family.planted;
    const Eigen::MatrixXd& observations = ctx.family.target_task.observation;
    const int num_actions = ctx.family.target_task.num_actions;

    std::vector<PopulationTask> source_pops;
    for (int t = 0; t < t_max; ++t)
      source_pops.push_back(
          make_population_task(ctx.family.source_tasks[t], ctx.source_experts[t]));
    const PopulationTask target_pop =
        make_population_task(ctx.family.target_task, ctx.target_expert);

    // Realizability of the true representation over all tasks (target included);
    // independent of the grid cell.
    std::vector<std::vector<int>> expert_actions;
    for (int t = 0; t < t_max; ++t) {
      std::vector<int> acts(observations.rows());
      for (int s = 0; s < observations.rows(); ++s)
        acts[static_cast<std::size_t>(s)] = ctx.source_experts[t].argmax_action(s);
      expert_actions.push_back(std::move(acts));
    }
    {
      std::vector<int> acts(observations.rows());
      for (int s = 0; s < observations.rows(); ++s)
        acts[static_cast<std::size_t>(s)] = ctx.target_expert.argmax_action(s);
      expert_actions.push_back(std::move(acts));
    }
    ZetaOptions zeta_opts;
    zeta_opts.restarts = cfg.bounds.zeta_restarts;
    zeta_opts.steps = cfg.bounds.zeta_steps;
    zeta_opts.lr = cfg.bounds.zeta_lr;
    zeta_opts.seed = SplitRng(seed).sub("zeta").next_u64();
    const ZetaEstimate zeta = realizability_zeta(truth.repr, observations, expert_actions,
                                                 num_actions, cfg.mtbc.c_f, zeta_opts);

    int cell = 0;
    for (int n : ns) {
      for (int t : ts) {
        std::vector<DemoSet> demos;
        for (int k = 0; k < t; ++k) demos.push_back(slice_demos(ctx.source_demos[k], n));
        TrainConfig train_cfg = cfg.mtbc;
        train_cfg.seed = SplitRng(seed)
                             .sub("train-mtbc", mix_indices({static_cast<std::uint64_t>(n),
                                                             static_cast<std::uint64_t>(t)}))
                             .next_u64();
        const MultitaskModel model = train_multitask(demos, observations, num_actions, train_cfg);

        PgdOptions pgd;
        pgd.restarts = cfg.bounds.pgd_restarts;
        pgd.steps = cfg.bounds.pgd_steps;
        pgd.lr = cfg.bounds.pgd_lr;
        pgd.seed = SplitRng(seed)
                       .sub("pgd", mix_indices({static_cast<std::uint64_t>(n),
                                                static_cast<std::uint64_t>(t)}))
                       .next_u64();
        const std::vector<HeadParams> used_heads(truth.source_heads.begin(),
                                                 truth.source_heads.begin() + t);
        const std::vector<PopulationTask> used_pops(source_pops.begin(),
                                                    source_pops.begin() + t);
        const double d_bar = task_avg_rep_difference(model.repr, truth.repr, used_heads,
                                                     used_pops, cfg.mtbc.c_f, pgd);
        const double d_worst = worst_case_rep_difference(model.repr, truth.repr, target_pop,
                                                         num_actions, cfg.mtbc.c_f, pgd);

        // Empirical Rademacher complexity of the representation class over
        // the NT training observations.
        Eigen::MatrixXd train_rows(static_cast<Eigen::Index>(n) * t, observations.cols());
        Eigen::Index row = 0;
        for (const auto& d : demos)
          for (const auto& [s, a] : d.pairs) train_rows.row(row++) = observations.row(s);
        FunctionClassSpec repr_spec;
        repr_spec.kind = FunctionClassSpec::Kind::repr_class;
        repr_spec.hidden = cfg.mtbc.hidden;
        repr_spec.repr_dim = cfg.mtbc.repr_dim;
        repr_spec.c_phi = cfg.mtbc.c_phi;
        repr_spec.ascent_steps = cfg.bounds.ascent_steps;
        repr_spec.ascent_restarts = cfg.bounds.ascent_restarts;
        repr_spec.ascent_lr = cfg.bounds.ascent_lr;
        const RademacherEstimate rad = empirical_rademacher(
            repr_spec, train_rows, cfg.bounds.rademacher_draws,
            SplitRng(seed).sub("rademacher", mix_indices({static_cast<std::uint64_t>(n),
                                                          static_cast<std::uint64_t>(t)}))
                .next_u64());

        for (int m : ms) {
          TrainConfig transfer_cfg = cfg.mtbc;
          transfer_cfg.seed =
              SplitRng(seed)
                  .sub("transfer", mix_indices({static_cast<std::uint64_t>(n),
                                                static_cast<std::uint64_t>(t),
                                                static_cast<std::uint64_t>(m)}))
                  .next_u64();
          const TransferResult result = transfer(model.repr, slice_demos(ctx.target_demos, m),
                                                 observations, num_actions, transfer_cfg);
          const PolicyParams policy{model.repr, result.head};

          BoundInputs inputs;
          inputs.n = n;
          inputs.t = t;
          inputs.m = m;
          inputs.delta = cfg.bounds.delta;
          inputs.gamma = ctx.family.target_task.gamma;
          inputs.c_f = cfg.mtbc.c_f;
          inputs.c_phi = cfg.mtbc.c_phi;
          inputs.num_actions = num_actions;
          inputs.d_bar = d_bar;
          inputs.d_worst = d_worst;
          inputs.sigma = diversity_estimate(d_bar, d_worst);
          inputs.zeta = zeta.zeta;
          inputs.repr_rademacher = rad;
          inputs.transfer_risk = transfer_risk(target_pop, result.head, model.repr,
                                               truth.target_head, truth.repr);
          const Eigen::VectorXd v_policy =
              policy_evaluation(ctx.family.target_task, tabularize(policy, observations));
          inputs.policy_error_lhs = value_gap(ctx.v_expert, v_policy);
          inputs.kl_expected = expected_kl(ctx.family.target_task, ctx.target_expert, policy);

          BoundsRow out;
          out.seed = seed;
          out.n = n;
          out.t = t;
          out.m = m;
          out.report = compose_bound_report(inputs);
          rows[static_cast<std::size_t>(si) * cells_per_seed + cell] = std::move(out);
          ++cell;
        }
      }
    }
  });

  std::sort(rows.begin(), rows.end(), [](const BoundsRow& a, const BoundsRow& b) {
    return std::tie(a.seed, a.n, a.t, a.m) < std::tie(b.seed, b.n, b.t, b.m);
  });
  return rows;
}

std::string bounds_rows_to_csv(const std::vector<BoundsRow>& rows) {
  std::ostringstream out;
  out << "seed,n,t,m," << BoundReport::csv_header() << '\n';
  for (const auto& row : rows)
    out << row.seed << ',' << row.n << ',' << row.t << ',' << row.m << ','
        << row.report.csv_row() << '\n';
  return out.str();
}

}  // namespace mtil
