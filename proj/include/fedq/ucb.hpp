#pragma once

#include <cstdint>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/metrics.hpp"
#include "fedq/rates.hpp"
#include "fedq/solver.hpp"

namespace fedq {

/// Single-agent optimistic Q-learning with per-step updates.
struct UcbState {
  std::vector<double> q;  // TabularMdp::sa_index layout
  StateTable v;
  std::vector<std::int64_t> visit_count;
  std::int64_t episode = 0;
};

UcbState initial_ucb_state(const TabularMdp& mdp);

struct UcbOptions {
  std::vector<std::int64_t> checkpoints;  // episodes, ascending
};

/// Greedy (lowest-index ties) w.r.t. the current Q; after each step
/// Q <- (1 - eta_t) Q + eta_t (r + V_{h+1}(s') + b_t) with t the updated count.
/// Regret is the exact value gap of the greedy policy used in each episode.
RunMetrics run_ucb_hoeffding(const TabularMdp& mdp, std::int64_t num_episodes,
                             const RateParams& rates, std::uint64_t seed,
                             const UcbOptions& options = {}, UcbState* final_state = nullptr);

}  // namespace fedq
