#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/protocol.hpp"
#include "fedq/solver.hpp"

namespace fedq {

/// Cumulative quantities after a given number of episodes per agent.
struct Checkpoint {
  std::int64_t episodes = 0;  // per agent (T / H)
  double regret = 0.0;
  std::int64_t rounds = 0;    // includes the round in progress
  std::int64_t comm_scalars = 0;
  std::int64_t abort_scalars = 0;
  std::int64_t switching_cost = 0;
  std::int64_t suboptimal_visits = 0;
};

/// Per-(h, s) deviation |sum_{a in A*} N_h(s, a) - R * P*_{s,h}| at a round end.
struct ConcentrationSnapshot {
  std::int64_t episodes_total = 0;  // R_{k'}: episodes over all agents
  StateTable deviation;
  StateTable max_deviation;         // running max over all earlier round ends
};

struct InvariantReport {
  std::int64_t checks = 0;
  std::int64_t violations = 0;
  std::vector<std::string> messages;  // first few violations

  void check(bool ok, const std::string& what);
  bool clean() const { return violations == 0; }
};

struct RunMetrics {
  int num_agents = 1;
  int horizon = 1;
  std::vector<Checkpoint> curve;
  double regret = 0.0;
  std::int64_t rounds = 0;
  std::int64_t comm_scalars = 0;
  std::int64_t abort_scalars = 0;
  std::int64_t switching_cost = 0;
  std::int64_t suboptimal_visits = 0;
  std::int64_t episodes_total = 0;  // over all agents
  std::int64_t steps_total = 0;
  std::vector<std::int64_t> visit_ledger;  // sa_index layout
  std::int64_t optimism_checks = 0;
  std::int64_t optimism_holds = 0;
  std::vector<ConcentrationSnapshot> concentration;
  InvariantReport invariants;

  double optimism_fraction() const {
    return optimism_checks == 0 ? 1.0
                                : static_cast<double>(optimism_holds) / optimism_checks;
  }
};

/// Sum over the round's initial states of V*_1(s) - V^pi_1(s).
double round_regret(const StateTable& v_star, const TabularMdp& mdp,
                    const DeterministicPolicy& policy, std::span<const int> initial_states);
double round_regret(const MdpSolution& solution, const TabularMdp& mdp,
                    const DeterministicPolicy& policy, std::span<const int> initial_states);

struct RoundScalars {
  std::int64_t downlink = 0;
  std::int64_t uplink = 0;
  std::int64_t abort = 0;  // 1 uplink signal + M downlink
  std::int64_t payload() const { return downlink + uplink; }
};

/// Downlink: pi, N at pi and V for every agent (3MHS). Uplink: r, n, v
/// (3MHS), plus mu for Bernstein (4MHS).
RoundScalars count_round_scalars(int num_agents, int horizon, int num_states, Variant variant);

int switching_increment(const DeterministicPolicy& prev, const DeterministicPolicy& next);

/// Step-visits with a non-optimal action, recounted from recorded trajectories.
std::int64_t suboptimal_visit_count(std::span<const RoundTranscript> transcripts,
                                    const MdpSolution& solution);

struct ConcentrationReport {
  std::vector<ConcentrationSnapshot> snapshots;  // one per requested checkpoint
};

/// Replays transcripts round by round and records deviations at the first
/// round end reaching each entry of episode_checkpoints (total episodes).
ConcentrationReport visit_concentration_report(std::span<const RoundTranscript> transcripts,
                                               const MdpSolution& solution,
                                               std::span<const std::int64_t> episode_checkpoints);

/// Per-(h, s) deviations from a visit ledger; optimal_mask uses sa_index layout.
StateTable concentration_deviation_from_mask(const StateTable& visit_prob_star,
                                             const std::vector<char>& optimal_mask,
                                             std::span<const std::int64_t> visit_ledger,
                                             int num_actions, std::int64_t episodes_total);
StateTable concentration_deviation(const MdpSolution& solution,
                                   std::span<const std::int64_t> visit_ledger,
                                   int num_actions, std::int64_t episodes_total);

/// Order-level reference values with all absolute constants set to 1. They
/// are not binding and are reported for orientation only.
struct TheoreticalBounds {
  double regret_log_term = 0.0;
  double regret_sqrt_term = 0.0;
  double regret_constant_term = 0.0;
  double regret_bound = 0.0;
  double round_bound = 0.0;
  double switching_bound = 0.0;
};

struct BoundInputs {
  int num_agents = 1;
  int num_states = 1;
  int num_actions = 1;
  int horizon = 1;
  double total_steps = 1.0;   // T, average steps per agent
  double failure_prob = 0.1;  // p
};

TheoreticalBounds regret_bound(const MdpSolution& solution, const BoundInputs& in);
/// Throws NotGmdp for non-G-MDP solutions.
TheoreticalBounds theoretical_bounds(const MdpSolution& solution, const BoundInputs& in);

// CSV writers. Column order is fixed:
//   regret:        episode,regret,regret_over_log
//   communication: episode,rounds,scalars
//   diagnostics:   s,h,deviation,R_k
void write_regret_csv(std::ostream& out, const RunMetrics& metrics);
void write_communication_csv(std::ostream& out, const RunMetrics& metrics);
void write_diagnostics_csv(std::ostream& out, const RunMetrics& metrics);

/// Round-trip formatting for doubles in text outputs.
std::string format_double(double x);

}  // namespace fedq
