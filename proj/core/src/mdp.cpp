#include "mtil/mdp.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mtil {

namespace {
constexpr double kRowSumTol = 1e-9;

void fail(const std::string& msg) { throw std::invalid_argument(msg); }
}  // namespace

void FiniteMdp::validate() const {
  if (num_states <= 0) fail("FiniteMdp: num_states must be positive");
  if (num_actions <= 0) fail("FiniteMdp: num_actions must be positive");
  if (reward.rows() != num_states || reward.cols() != num_actions)
    fail("FiniteMdp: reward must be S x A");
  if ((reward.array() < 0.0).any() || (reward.array() > 1.0).any())
    fail("FiniteMdp: rewards must lie in [0, 1]");
  if (static_cast<int>(transition.size()) != num_actions)
    fail("FiniteMdp: need one transition matrix per action");
  for (int a = 0; a < num_actions; ++a) {
    const auto& t = transition[a];
    if (t.rows() != num_states || t.cols() != num_states)
      fail("FiniteMdp: transition matrices must be S x S");
    Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(num_states);
    for (int s = 0; s < t.outerSize(); ++s) {
      for (SparseRowMat::InnerIterator it(t, s); it; ++it) {
        if (it.value() < 0.0) fail("FiniteMdp: negative transition probability");
        row_sums[s] += it.value();
      }
    }
    if (((row_sums.array() - 1.0).abs() > kRowSumTol).any())
      fail("FiniteMdp: transition rows must sum to 1");
  }
  if (initial_dist.size() != num_states) fail("FiniteMdp: initial_dist must have length S");
  if ((initial_dist.array() < 0.0).any()) fail("FiniteMdp: initial_dist must be non-negative");
  if (std::abs(initial_dist.sum() - 1.0) > kRowSumTol)
    fail("FiniteMdp: initial_dist must sum to 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("FiniteMdp: gamma must lie in [0, 1)");
  if (observation.rows() != num_states) fail("FiniteMdp: one observation row per state");
  if (!observation.allFinite()) fail("FiniteMdp: observations must be finite");
}

TabularPolicy TabularPolicy::uniform(int num_states, int num_actions) {
  TabularPolicy p;
  p.probs = Eigen::MatrixXd::Constant(num_states, num_actions, 1.0 / num_actions);
  return p;
}

TabularPolicy TabularPolicy::deterministic(const std::vector<int>& actions, int num_actions) {
  TabularPolicy p;
  p.probs = Eigen::MatrixXd::Zero(static_cast<int>(actions.size()), num_actions);
  for (int s = 0; s < static_cast<int>(actions.size()); ++s) {
    if (actions[s] < 0 || actions[s] >= num_actions)
      fail("TabularPolicy: action index out of range");
    p.probs(s, actions[s]) = 1.0;
  }
  return p;
}

bool TabularPolicy::is_deterministic() const {
  for (int s = 0; s < probs.rows(); ++s) {
    if (probs.row(s).maxCoeff() < 1.0 - 1e-12) return false;
  }
  return true;
}

int TabularPolicy::argmax_action(int state) const {
  int best = 0;
  for (int a = 1; a < probs.cols(); ++a) {
    if (probs(state, a) > probs(state, best)) best = a;
  }
  return best;
}

void TabularPolicy::validate() const {
  if (probs.rows() <= 0 || probs.cols() <= 0) fail("TabularPolicy: empty matrix");
  if ((probs.array() < 0.0).any()) fail("TabularPolicy: negative probability");
  Eigen::VectorXd sums = probs.rowwise().sum();
  if (((sums.array() - 1.0).abs() > kRowSumTol).any())
    fail("TabularPolicy: rows must sum to 1");
}

void write_demo_set(std::ostream& out, const DemoSet& demos) {
  out << demos.task_id << ',' << demos.seed << ',' << demos.pairs.size() << '\n';
  for (const auto& [s, a] : demos.pairs) out << s << ',' << a << '\n';
}

DemoSet read_demo_set(std::istream& in) {
  DemoSet demos;
  std::string line;
  if (!std::getline(in, line)) fail("DemoSet: missing header");
  {
    std::istringstream header(line);
    std::string seed_str, n_str;
    if (!std::getline(header, demos.task_id, ',') || !std::getline(header, seed_str, ',') ||
        !std::getline(header, n_str))
      fail("DemoSet: malformed header, expected task_id,seed,n");
    demos.seed = std::stoull(seed_str);
    const std::size_t n = std::stoull(n_str);
    demos.pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::getline(in, line)) fail("DemoSet: fewer pairs than header count");
      std::istringstream row(line);
      std::string s_str, a_str;
      if (!std::getline(row, s_str, ',') || !std::getline(row, a_str))
        fail("DemoSet: malformed pair line");
      demos.pairs.emplace_back(std::stoi(s_str), std::stoi(a_str));
    }
  }
  return demos;
}

}  // namespace mtil
