#include "fedq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "fedq/error.hpp"

namespace fedq {
namespace {

constexpr std::size_t kMaxInvariantMessages = 16;

}  // namespace

void InvariantReport::check(bool ok, const std::string& what) {
  ++checks;
  if (ok) return;
  ++violations;
  if (messages.size() < kMaxInvariantMessages) messages.push_back(what);
}

double round_regret(const StateTable& v_star, const TabularMdp& mdp,
                    const DeterministicPolicy& policy, std::span<const int> initial_states) {
  const StateTable v_pi = evaluate_policy(mdp, policy);
  double total = 0.0;
  for (int s : initial_states) {
    require(s >= 0 && s < mdp.num_states(), "initial state out of range");
    total += v_star(0, s) - v_pi(0, s);
  }
  return total;
}

double round_regret(const MdpSolution& solution, const TabularMdp& mdp,
                    const DeterministicPolicy& policy, std::span<const int> initial_states) {
  return round_regret(solution.v_star, mdp, policy, initial_states);
}

RoundScalars count_round_scalars(int num_agents, int horizon, int num_states, Variant variant) {
  const std::int64_t per_agent_table = static_cast<std::int64_t>(horizon) * num_states;
  RoundScalars out;
  out.downlink = 3 * num_agents * per_agent_table;
  out.uplink = (variant == Variant::Hoeffding ? 3 : 4) * num_agents * per_agent_table;
  out.abort = 1 + num_agents;
  return out;
}

int switching_increment(const DeterministicPolicy& prev, const DeterministicPolicy& next) {
  return prev == next ? 0 : 1;
}

std::int64_t suboptimal_visit_count(std::span<const RoundTranscript> transcripts,
                                    const MdpSolution& solution) {
  std::int64_t count = 0;
  for (const auto& tr : transcripts) {
    for (const auto& st : tr.steps) {
      const auto& best = solution.optimal_at(st.h, st.s);
      bool optimal = false;
      for (int a : best) optimal = optimal || a == st.a;
      if (!optimal) ++count;
    }
  }
  return count;
}

StateTable concentration_deviation_from_mask(const StateTable& visit_prob_star,
                                             const std::vector<char>& optimal_mask,
                                             std::span<const std::int64_t> visit_ledger,
                                             int num_actions, std::int64_t episodes_total) {
  const int S = visit_prob_star.num_states;
  const int H = visit_prob_star.horizon;
  StateTable dev(S, H);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      std::int64_t optimal_visits = 0;
      for (int a = 0; a < num_actions; ++a) {
        const std::size_t i = (static_cast<std::size_t>(h) * S + s) * num_actions + a;
        if (optimal_mask[i]) optimal_visits += visit_ledger[i];
      }
      dev(h, s) = std::abs(static_cast<double>(optimal_visits) -
                           static_cast<double>(episodes_total) * visit_prob_star(h, s));
    }
  }
  return dev;
}

StateTable concentration_deviation(const MdpSolution& solution,
                                   std::span<const std::int64_t> visit_ledger,
                                   int num_actions, std::int64_t episodes_total) {
  const int S = solution.v_star.num_states;
  const int H = solution.v_star.horizon;
  std::vector<char> mask(static_cast<std::size_t>(S) * H * num_actions, 0);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a : solution.optimal_at(h, s)) {
        mask[(static_cast<std::size_t>(h) * S + s) * num_actions + a] = 1;
      }
    }
  }
  return concentration_deviation_from_mask(solution.visit_prob_star, mask, visit_ledger,
                                           num_actions, episodes_total);
}

ConcentrationReport visit_concentration_report(std::span<const RoundTranscript> transcripts,
                                               const MdpSolution& solution,
                                               std::span<const std::int64_t> episode_checkpoints) {
  const int S = solution.v_star.num_states;
  const int H = solution.v_star.horizon;
  const int A = static_cast<int>(solution.q_star.size() / (static_cast<std::size_t>(S) * H));

  std::vector<std::int64_t> ledger(static_cast<std::size_t>(S) * H * A, 0);
  ConcentrationReport report;
  StateTable running_max(S, H);
  std::int64_t episodes_total = 0;
  std::size_t next = 0;
  for (const auto& tr : transcripts) {
    for (const auto& st : tr.steps) {
      ++ledger[(static_cast<std::size_t>(st.h) * S + st.s) * A + st.a];
      if (st.h == 0) ++episodes_total;
    }
    const StateTable dev = concentration_deviation(solution, ledger, A, episodes_total);
    for (std::size_t i = 0; i < dev.values.size(); ++i) {
      running_max.values[i] = std::max(running_max.values[i], dev.values[i]);
    }
    if (next < episode_checkpoints.size() && episode_checkpoints[next] <= episodes_total) {
      report.snapshots.push_back({episodes_total, dev, running_max});
      while (next < episode_checkpoints.size() && episode_checkpoints[next] <= episodes_total) {
        ++next;
      }
    }
  }
  return report;
}

TheoreticalBounds regret_bound(const MdpSolution& solution, const BoundInputs& in) {
  require(solution.min_gap > 0.0, "regret bound needs a positive minimum gap");
  require(in.total_steps >= 1.0 && in.num_agents >= 1, "bound inputs must be positive");
  const double H = in.horizon;
  const double SA = static_cast<double>(in.num_states) * in.num_actions;
  const double M = in.num_agents;
  const double iota1 = std::log(M * SA * in.total_steps);
  TheoreticalBounds b;
  b.regret_log_term = std::pow(H, 6) * SA * iota1 / solution.min_gap;
  b.regret_sqrt_term = M * std::sqrt(std::pow(H, 7)) * SA * std::sqrt(iota1);
  b.regret_constant_term = M * std::pow(H, 5) * SA;
  b.regret_bound = b.regret_log_term + b.regret_sqrt_term + b.regret_constant_term;
  return b;
}

TheoreticalBounds theoretical_bounds(const MdpSolution& solution, const BoundInputs& in) {
  if (!solution.is_gmdp) {
    fail(ErrorKind::NotGmdp, "round and switching bounds require a G-MDP instance");
  }
  require(in.failure_prob > 0.0 && in.failure_prob < 1.0, "failure probability must be in (0,1)");
  TheoreticalBounds b = regret_bound(solution, in);
  const double H = in.horizon;
  const double S = in.num_states;
  const double SA = S * in.num_actions;
  const double M = in.num_agents;
  const double T = in.total_steps;
  const double gap2 = solution.min_gap * solution.min_gap;
  const double iota0 = std::log(M * SA * T / in.failure_prob);
  const double iota2 = std::log(SA * T / in.failure_prob);
  const double exploit = H * H * std::log(T / (H * SA));
  b.round_bound = M * std::pow(H, 3) * SA * std::log(M * H * H * iota0) +
                  std::pow(H, 3) * SA * std::log(std::pow(H, 5) * SA / gap2) +
                  std::pow(H, 3) * S * std::log(M * std::pow(H, 9) * SA * iota0 /
                                                (gap2 * solution.c_st)) +
                  exploit;
  b.switching_bound = std::pow(H, 3) * SA * std::log(std::pow(H, 5) * SA * iota2 / gap2) +
                      std::pow(H, 3) * S * std::log(1.0 / solution.c_st) + exploit;
  return b;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_regret_csv(std::ostream& out, const RunMetrics& metrics) {
  out << "episode,regret,regret_over_log\n";
  for (const auto& c : metrics.curve) {
    out << c.episodes << ',' << format_double(c.regret) << ','
        << format_double(c.regret / std::log(static_cast<double>(c.episodes) + 1.0)) << '\n';
  }
}

void write_communication_csv(std::ostream& out, const RunMetrics& metrics) {
  out << "episode,rounds,scalars\n";
  for (const auto& c : metrics.curve) {
    out << c.episodes << ',' << c.rounds << ',' << c.comm_scalars << '\n';
  }
}

void write_diagnostics_csv(std::ostream& out, const RunMetrics& metrics) {
  out << "s,h,deviation,R_k\n";
  for (const auto& snap : metrics.concentration) {
    for (int h = 0; h < snap.deviation.horizon; ++h) {
      for (int s = 0; s < snap.deviation.num_states; ++s) {
        out << s << ',' << h << ',' << format_double(snap.deviation(h, s)) << ','
            << snap.episodes_total << '\n';
      }
    }
  }
}

}  // namespace fedq
