#include "fedq/ucb.hpp"

#include <algorithm>

#include "fedq/error.hpp"
#include "fedq/rng.hpp"

namespace fedq {

UcbState initial_ucb_state(const TabularMdp& mdp) {
  const double H = mdp.horizon();
  UcbState st;
  st.q.assign(mdp.num_triples(), H);
  st.v = StateTable(mdp.num_states(), mdp.horizon(), H);
  st.visit_count.assign(mdp.num_triples(), 0);
  return st;
}

RunMetrics run_ucb_hoeffding(const TabularMdp& mdp, std::int64_t num_episodes,
                             const RateParams& rates, std::uint64_t seed,
                             const UcbOptions& options, UcbState* final_state) {
  require(num_episodes >= 1, "need at least one episode");
  validate(rates);
  require(rates.horizon == mdp.horizon(), "rate horizon does not match the MDP");
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  const int H = mdp.horizon();

  const OptimalValues optimal = backward_induction(mdp);
  const MdpSampler sampler(mdp);
  RandomStream rng(mix_seed(seed, 0x756362, 0));

  UcbState st = initial_ucb_state(mdp);
  DeterministicPolicy greedy(S, H, 0);
  auto refresh = [&](int h, int s) {
    int best_action = 0;
    double best = st.q[mdp.sa_index(h, s, 0)];
    for (int a = 1; a < A; ++a) {
      const double q = st.q[mdp.sa_index(h, s, a)];
      if (q > best) {
        best = q;
        best_action = a;
      }
    }
    st.v(h, s) = std::min(static_cast<double>(H), best);
    const bool changed = greedy(h, s) != best_action;
    greedy.set(h, s, best_action);
    return changed;
  };

  RunMetrics metrics;
  metrics.num_agents = 1;
  metrics.horizon = H;
  std::vector<double> regret_by_state(S, 0.0);
  bool policy_dirty = true;
  DeterministicPolicy last_used = greedy;
  std::size_t next_checkpoint = 0;

  for (std::int64_t ep = 1; ep <= num_episodes; ++ep) {
    if (policy_dirty) {
      if (ep > 1 && greedy != last_used) ++metrics.switching_cost;
      last_used = greedy;
      const StateTable v_pi = evaluate_policy(mdp, greedy);
      for (int s = 0; s < S; ++s) regret_by_state[s] = optimal.v_star(0, s) - v_pi(0, s);
      policy_dirty = false;
    }
    int s = sampler.sample_initial(rng.uniform());
    metrics.regret += regret_by_state[s];
    for (int h = 0; h < H; ++h) {
      const int a = greedy(h, s);
      const std::size_t i = mdp.sa_index(h, s, a);
      if (!optimal.is_optimal[i]) ++metrics.suboptimal_visits;
      int next = -1;
      double next_value = 0.0;
      if (h + 1 < H) {
        next = sampler.sample_next(h, s, a, rng.uniform());
        next_value = st.v(h + 1, next);
      }
      const std::int64_t t = ++st.visit_count[i];
      const double rate = eta(t, H);
      st.q[i] = (1.0 - rate) * st.q[i] +
                rate * (mdp.reward(h, s, a) + next_value + hoeffding_bonus(t, rates));
      if (refresh(h, s)) policy_dirty = true;
      s = next;
    }
    st.episode = ep;
    while (next_checkpoint < options.checkpoints.size() &&
           options.checkpoints[next_checkpoint] <= ep) {
      if (options.checkpoints[next_checkpoint] == ep) {
        metrics.curve.push_back(
            {ep, metrics.regret, 0, 0, 0, metrics.switching_cost, metrics.suboptimal_visits});
      }
      ++next_checkpoint;
    }
  }

  metrics.episodes_total = num_episodes;
  metrics.steps_total = num_episodes * H;
  metrics.visit_ledger = st.visit_count;
  if (final_state) *final_state = std::move(st);
  return metrics;
}

}  // namespace fedq
