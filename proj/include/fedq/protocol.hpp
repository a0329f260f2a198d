#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/solver.hpp"

namespace fedq {

enum class Variant { Hoeffding, Bernstein };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

/// Global estimates held by the central server at the start of round k.
struct ServerState {
  Variant variant = Variant::Hoeffding;
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::int64_t round = 1;
  std::vector<double> q;              // Q_h^k(s, a), TabularMdp::sa_index layout
  StateTable v;                       // V_h^k(s); V_{H+1} is implicitly zero
  DeterministicPolicy policy;         // pi^k
  std::vector<std::int64_t> visits;   // N_h^k(s, a)
  std::vector<double> w1;             // Bernstein only: sum of squared next values
  std::vector<double> w2;             // Bernstein only: sum of next values

  std::size_t index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * num_states + s) * num_actions + a;
  }
  double next_value(int h, int s) const { return h + 1 < horizon ? v(h + 1, s) : 0.0; }
  std::int64_t total_visits() const;

  friend bool operator==(const ServerState&, const ServerState&) = default;
};

/// Q = V = H everywhere, N = 0, pi^1 = action 0.
ServerState initial_server_state(const TabularMdp& mdp, Variant variant);

/// Per-agent summary uploaded at the end of a round. Entries are indexed by
/// (h, s) and refer to the broadcast action a = pi_h^k(s).
struct AgentRoundReport {
  int num_states = 0;
  int horizon = 0;
  std::vector<std::int64_t> visits;           // n_h^{m,k}
  std::vector<double> value_sums;             // v_{h+1}^{m,k} (un-normalized)
  std::vector<double> rewards;                // observed r_h(s, pi_h^k(s)), 0 if unvisited
  std::vector<double> second_moment_means;    // mu_h^{m,k}, Bernstein only
  std::int64_t episodes_run = 0;

  AgentRoundReport() = default;
  AgentRoundReport(int states, int steps, bool with_second_moments);

  std::size_t index(int h, int s) const { return static_cast<std::size_t>(h) * num_states + s; }
};

/// One step of one agent's trajectory. next_state is -1 after the last step.
struct StepRecord {
  std::int32_t agent;
  std::int64_t episode;  // 1-based within the round
  std::int32_t h;
  std::int32_t s;
  std::int32_t a;
  double reward;
  std::int32_t next_state;
};

struct RoundTranscript {
  std::int64_t round = 0;
  std::int64_t episodes_run = 0;
  int trigger_agent = -1;
  int trigger_h = -1;
  int trigger_s = -1;
  int trigger_a = -1;
  DeterministicPolicy policy;    // pi^k
  StateTable broadcast_values;   // V^k
  std::vector<int> initial_states;  // agent-major within each wave
  std::vector<StepRecord> steps;    // empty unless step recording is enabled
  std::int64_t downlink_scalars = 0;
  std::int64_t uplink_scalars = 0;
  std::int64_t abort_scalars = 0;
};

}  // namespace fedq
