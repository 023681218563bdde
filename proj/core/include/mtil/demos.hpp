#pragma once

#include <cstdint>
#include <string>

#include "mtil/mdp.hpp"

namespace mtil {

/// n i.i.d. pairs from the exact discounted stationary distribution
/// mu_{expert}, computed by stationary_distribution. One uniform variate per
/// pair, so a smaller n with the same seed yields a prefix of a larger one.
DemoSet sample_demos_exact(const FiniteMdp& mdp, const TabularPolicy& expert, int n,
                           std::uint64_t seed, const std::string& task_id = "");

/// Episode protocol: ceil(n / timeout_h) episodes of length timeout_h under
/// the expert acting deterministically (highest-probability action), then the
/// concatenated pairs are trimmed to exactly n.
DemoSet sample_demos_rollout(const FiniteMdp& mdp, const TabularPolicy& expert, int n,
                             int timeout_h, std::uint64_t seed,
                             const std::string& task_id = "");

}  // namespace mtil
