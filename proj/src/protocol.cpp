#include "fedq/protocol.hpp"

#include <numeric>

#include "fedq/error.hpp"

namespace fedq {

std::string variant_name(Variant v) {
  return v == Variant::Hoeffding ? "hoeffding" : "bernstein";
}

Variant parse_variant(const std::string& name) {
  if (name == "hoeffding") return Variant::Hoeffding;
  if (name == "bernstein") return Variant::Bernstein;
  fail(ErrorKind::InvalidConfig, "unknown algorithm variant '" + name + "'");
}

std::int64_t ServerState::total_visits() const {
  return std::accumulate(visits.begin(), visits.end(), std::int64_t{0});
}

ServerState initial_server_state(const TabularMdp& mdp, Variant variant) {
  ServerState state;
  state.variant = variant;
  state.num_states = mdp.num_states();
  state.num_actions = mdp.num_actions();
  state.horizon = mdp.horizon();
  state.round = 1;
  const double H = mdp.horizon();
  state.q.assign(mdp.num_triples(), H);
  state.v = StateTable(mdp.num_states(), mdp.horizon(), H);
  state.policy = DeterministicPolicy(mdp.num_states(), mdp.horizon(), 0);
  state.visits.assign(mdp.num_triples(), 0);
  if (variant == Variant::Bernstein) {
    state.w1.assign(mdp.num_triples(), 0.0);
    state.w2.assign(mdp.num_triples(), 0.0);
  }
  return state;
}

AgentRoundReport::AgentRoundReport(int states, int steps, bool with_second_moments)
    : num_states(states), horizon(steps) {
  const std::size_t n = static_cast<std::size_t>(states) * steps;
  visits.assign(n, 0);
  value_sums.assign(n, 0.0);
  rewards.assign(n, 0.0);
  if (with_second_moments) second_moment_means.assign(n, 0.0);
}

}  // namespace fedq
