#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/metrics.hpp"
#include "fedq/protocol.hpp"
#include "fedq/rates.hpp"
#include "fedq/rng.hpp"

namespace fedq {

/// Per-agent visit cap for a round: max{1, floor(N / (M H (H + 1)))}.
std::int64_t trigger_threshold(std::int64_t prior_visits, int num_agents, int horizon);

/// N below this uses the sequential per-visit update: 2 M H (H + 1).
std::int64_t case_one_limit(int num_agents, int horizon);

/// Independent agent streams derived from the run seed.
std::vector<RandomStream> make_agent_streams(std::uint64_t seed, int num_agents);

struct WaveSummary {
  std::int64_t wave = 0;                // 1-based episode index within the round
  std::span<const int> initial_states;  // one per agent
  std::int64_t suboptimal_steps = 0;    // only when an optimality mask is supplied
};

struct RoundOptions {
  bool record_steps = false;
  const std::vector<char>* optimal_mask = nullptr;  // sa_index layout
  std::function<void(const WaveSummary&)> on_wave;
};

struct RoundResult {
  RoundTranscript transcript;
  std::vector<AgentRoundReport> reports;
};

/// All agents execute pi^k in lockstep episode waves. After each wave every
/// agent checks its local counts against the trigger threshold; the round ends
/// after the first wave in which any agent triggers.
RoundResult run_round(const ServerState& server, const TabularMdp& mdp,
                      const MdpSampler& sampler, std::span<RandomStream> streams,
                      const RoundOptions& options = {});

/// Throws InconsistentReports if agents disagree on episodes_run or on the
/// reward observed for the same (h, s).
void check_report_consistency(const ServerState& server,
                              std::span<const AgentRoundReport> reports);

/// Throws InconsistentReports if a reported reward differs from the MDP.
void check_reports_against_mdp(const ServerState& server, const TabularMdp& mdp,
                               std::span<const AgentRoundReport> reports);

ServerState aggregate_hoeffding(const ServerState& server,
                                std::span<const AgentRoundReport> reports,
                                const RateParams& rates);

/// Throws NegativeVariance if a recomputed variance falls below -1e-9.
ServerState aggregate_bernstein(const ServerState& server,
                                std::span<const AgentRoundReport> reports,
                                const BernsteinParams& params);

/// Variance estimate W implied by the accumulators of one triple; 0 before any visit.
double server_variance(const ServerState& server, std::size_t triple);

struct FedqConfig {
  Variant variant = Variant::Hoeffding;
  int num_agents = 1;
  std::int64_t total_steps = 0;  // T0, summed over agents
  double bonus_scale = 2.0;      // c
  double bernstein_scale = 2.0;  // c'
  double log_factor = 1.0;       // iota
  std::uint64_t seed = 0;

  RateParams rate_params(int horizon) const { return {horizon, bonus_scale, log_factor}; }
  BernsteinParams bernstein_params(const TabularMdp& mdp) const {
    return {mdp.horizon(), bernstein_scale, log_factor, num_agents, mdp.num_states(),
            mdp.num_actions()};
  }
};

struct RunOptions {
  std::vector<std::int64_t> checkpoints;  // episodes per agent, ascending
  bool record_transcripts = false;
  bool check_invariants = true;
  bool track_optimism = true;
  /// Called after every aggregation with the pre- and post-round states.
  std::function<void(const ServerState&, const RoundResult&, const ServerState&)> on_round;
};

struct FedqRun {
  RunMetrics metrics;
  ServerState final_state;
  std::vector<RoundTranscript> transcripts;
};

/// Runs rounds until the server has recorded at least T0 steps.
FedqRun run_fedq(const TabularMdp& mdp, const FedqConfig& config,
                 const RunOptions& options = {});

/// Checkpoint grid: 1, then ceil(previous * 1.25) rounded to distinct
/// integers, capped at and always including `last`.
std::vector<std::int64_t> geometric_checkpoints(std::int64_t last, double ratio = 1.25);

// Line-oriented transcript dump: one "k m j h s a r s'" record per step.
void write_transcript(std::ostream& out, std::span<const RoundTranscript> transcripts);

std::string server_state_to_json(const ServerState& state);
ServerState server_state_from_json(const std::string& text);

}  // namespace fedq
