#include "fedq/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "fedq/error.hpp"
#include "fedq/solver.hpp"

namespace fedq {
namespace {

constexpr double kValueSlack = 1e-9;
constexpr double kNegativeVarianceLimit = -1e-9;

std::string triple_name(int h, int s, int a) {
  return "(h=" + std::to_string(h) + ", s=" + std::to_string(s) + ", a=" + std::to_string(a) +
         ")";
}

int num_agents_of(std::span<const AgentRoundReport> reports) {
  return static_cast<int>(reports.size());
}

/// V = min{H, max_a Q} and pi = lowest-index argmax, for every (h, s).
void refresh_values_and_policy(ServerState& state) {
  const double H = state.horizon;
  for (int h = 0; h < state.horizon; ++h) {
    for (int s = 0; s < state.num_states; ++s) {
      int best_action = 0;
      double best = state.q[state.index(h, s, 0)];
      for (int a = 1; a < state.num_actions; ++a) {
        const double q = state.q[state.index(h, s, a)];
        if (q > best) {
          best = q;
          best_action = a;
        }
      }
      state.v(h, s) = std::min(H, best);
      state.policy.set(h, s, best_action);
    }
  }
}

struct VisitedEntry {
  int h;
  int s;
  int a;
  std::size_t triple;
  std::size_t cell;
  std::int64_t prior;  // N_h^k(s, a)
  std::int64_t added;  // n_h^k(s, a)
  double reward;
  double value_sum;
};

/// Visited (h, s, pi(h, s)) entries with their pooled statistics.
std::vector<VisitedEntry> visited_entries(const ServerState& server,
                                          std::span<const AgentRoundReport> reports) {
  std::vector<VisitedEntry> out;
  for (int h = 0; h < server.horizon; ++h) {
    for (int s = 0; s < server.num_states; ++s) {
      VisitedEntry e{};
      e.h = h;
      e.s = s;
      e.a = server.policy(h, s);
      e.triple = server.index(h, s, e.a);
      e.cell = static_cast<std::size_t>(h) * server.num_states + s;
      e.prior = server.visits[e.triple];
      bool have_reward = false;
      for (const auto& r : reports) {
        if (r.visits[e.cell] == 0) continue;
        e.added += r.visits[e.cell];
        e.value_sum += r.value_sums[e.cell];
        if (!have_reward) {
          e.reward = r.rewards[e.cell];
          have_reward = true;
        }
      }
      if (e.added > 0) out.push_back(e);
    }
  }
  return out;
}

void check_report_shapes(const ServerState& server, std::span<const AgentRoundReport> reports,
                         bool need_second_moments) {
  const std::size_t cells = static_cast<std::size_t>(server.num_states) * server.horizon;
  if (reports.empty()) fail(ErrorKind::InconsistentReports, "no agent reports");
  for (const auto& r : reports) {
    if (r.visits.size() != cells || r.value_sums.size() != cells || r.rewards.size() != cells) {
      fail(ErrorKind::InconsistentReports, "agent report has the wrong shape");
    }
    if (need_second_moments && r.second_moment_means.size() != cells) {
      fail(ErrorKind::InconsistentReports, "agent report is missing second moments");
    }
  }
}

/// Sequential per-visit update over agents with a visit, ascending agent index.
template <typename Bonus>
double sequential_update(double q, const VisitedEntry& e,
                         std::span<const AgentRoundReport> reports, int horizon,
                         Bonus&& bonus) {
  std::int64_t t = e.prior;
  for (const auto& r : reports) {
    const std::int64_t n = r.visits[e.cell];
    if (n == 0) continue;
    if (n > 1) {
      fail(ErrorKind::InconsistentReports,
           "agent reported more than one visit below the batching limit at " +
               triple_name(e.h, e.s, e.a));
    }
    ++t;
    const double rate = eta(t, horizon);
    q = (1.0 - rate) * q + rate * (e.reward + r.value_sums[e.cell] + bonus(t));
  }
  return q;
}

}  // namespace

std::int64_t trigger_threshold(std::int64_t prior_visits, int num_agents, int horizon) {
  const std::int64_t denom =
      static_cast<std::int64_t>(num_agents) * horizon * (horizon + 1);
  return std::max<std::int64_t>(1, prior_visits / denom);
}

std::int64_t case_one_limit(int num_agents, int horizon) {
  return 2LL * num_agents * horizon * (horizon + 1);
}

std::vector<RandomStream> make_agent_streams(std::uint64_t seed, int num_agents) {
  std::vector<RandomStream> streams;
  streams.reserve(num_agents);
  for (int m = 0; m < num_agents; ++m) {
    streams.emplace_back(mix_seed(seed, 0x6167656e74, static_cast<std::uint64_t>(m)));
  }
  return streams;
}

RoundResult run_round(const ServerState& server, const TabularMdp& mdp,
                      const MdpSampler& sampler, std::span<RandomStream> streams,
                      const RoundOptions& options) {
  const int M = static_cast<int>(streams.size());
  const int S = mdp.num_states();
  const int H = mdp.horizon();
  require(M >= 1, "run_round needs at least one agent");
  require(server.num_states == S && server.horizon == H &&
              server.num_actions == mdp.num_actions(),
          "server state does not match the MDP");
  const bool bernstein = server.variant == Variant::Bernstein;
  const std::size_t cells = static_cast<std::size_t>(S) * H;

  std::vector<std::int64_t> threshold(cells);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      threshold[static_cast<std::size_t>(h) * S + s] =
          trigger_threshold(server.visits[server.index(h, s, server.policy(h, s))], M, H);
    }
  }

  RoundResult result;
  result.reports.reserve(M);
  for (int m = 0; m < M; ++m) result.reports.emplace_back(S, H, bernstein);
  std::vector<std::vector<double>> square_sums(bernstein ? M : 0, std::vector<double>(cells));

  RoundTranscript& tr = result.transcript;
  tr.round = server.round;
  tr.policy = server.policy;
  tr.broadcast_values = server.v;

  std::vector<int> initial(M);
  std::int64_t wave = 0;
  bool triggered = false;
  while (!triggered) {
    ++wave;
    std::int64_t suboptimal = 0;
    for (int m = 0; m < M; ++m) {
      RandomStream& rng = streams[m];
      AgentRoundReport& rep = result.reports[m];
      int s = sampler.sample_initial(rng.uniform());
      initial[m] = s;
      for (int h = 0; h < H; ++h) {
        const int a = server.policy(h, s);
        const double r = mdp.reward(h, s, a);
        int next = -1;
        double next_value = 0.0;
        if (h + 1 < H) {
          next = sampler.sample_next(h, s, a, rng.uniform());
          next_value = server.v(h + 1, next);
        }
        const std::size_t cell = static_cast<std::size_t>(h) * S + s;
        ++rep.visits[cell];
        rep.value_sums[cell] += next_value;
        rep.rewards[cell] = r;
        if (bernstein) square_sums[m][cell] += next_value * next_value;
        if (options.optimal_mask && !(*options.optimal_mask)[mdp.sa_index(h, s, a)]) {
          ++suboptimal;
        }
        if (options.record_steps) {
          tr.steps.push_back({m, wave, h, s, a, r, next});
        }
        if (rep.visits[cell] >= threshold[cell] && !triggered) {
          triggered = true;
          tr.trigger_agent = m;
          tr.trigger_h = h;
          tr.trigger_s = s;
          tr.trigger_a = a;
        }
        s = next;
      }
    }
    if (options.record_steps) tr.initial_states.insert(tr.initial_states.end(), initial.begin(), initial.end());
    if (options.on_wave) options.on_wave({wave, initial, suboptimal});
  }

  for (int m = 0; m < M; ++m) {
    AgentRoundReport& rep = result.reports[m];
    rep.episodes_run = wave;
    if (bernstein) {
      for (std::size_t c = 0; c < cells; ++c) {
        if (rep.visits[c] > 0) {
          rep.second_moment_means[c] = square_sums[m][c] / static_cast<double>(rep.visits[c]);
        }
      }
    }
  }
  tr.episodes_run = wave;
  const RoundScalars scalars = count_round_scalars(M, H, S, server.variant);
  tr.downlink_scalars = scalars.downlink;
  tr.uplink_scalars = scalars.uplink;
  tr.abort_scalars = scalars.abort;
  return result;
}

void check_report_consistency(const ServerState& server,
                              std::span<const AgentRoundReport> reports) {
  check_report_shapes(server, reports, false);
  const std::int64_t episodes = reports.front().episodes_run;
  for (const auto& r : reports) {
    if (r.episodes_run != episodes) {
      fail(ErrorKind::InconsistentReports, "agents disagree on episodes_run");
    }
  }
  const std::size_t cells = reports.front().visits.size();
  for (std::size_t c = 0; c < cells; ++c) {
    bool seen = false;
    double reward = 0.0;
    for (const auto& r : reports) {
      if (r.visits[c] == 0) continue;
      if (!seen) {
        reward = r.rewards[c];
        seen = true;
      } else if (r.rewards[c] != reward) {
        fail(ErrorKind::InconsistentReports, "agents disagree on an observed reward");
      }
    }
  }
}

void check_reports_against_mdp(const ServerState& server, const TabularMdp& mdp,
                               std::span<const AgentRoundReport> reports) {
  for (const auto& r : reports) {
    for (int h = 0; h < server.horizon; ++h) {
      for (int s = 0; s < server.num_states; ++s) {
        const std::size_t cell = r.index(h, s);
        if (r.visits[cell] > 0 && r.rewards[cell] != mdp.reward(h, s, server.policy(h, s))) {
          fail(ErrorKind::InconsistentReports, "reported reward differs from the MDP");
        }
      }
    }
  }
}

ServerState aggregate_hoeffding(const ServerState& server,
                                std::span<const AgentRoundReport> reports,
                                const RateParams& rates) {
  validate(rates);
  require(rates.horizon == server.horizon, "rate horizon does not match the server");
  check_report_consistency(server, reports);
  const int M = num_agents_of(reports);
  const std::int64_t i0 = case_one_limit(M, server.horizon);

  ServerState next = server;
  next.round = server.round + 1;
  for (const VisitedEntry& e : visited_entries(server, reports)) {
    double q = server.q[e.triple];
    if (e.prior < i0) {
      q = sequential_update(q, e, reports, server.horizon,
                            [&](std::int64_t t) { return hoeffding_bonus(t, rates); });
    } else {
      const std::int64_t after = e.prior + e.added;
      const double batch_rate = 1.0 - eta_c(e.prior + 1, after, server.horizon);
      const double mean_next = e.value_sum / static_cast<double>(e.added);
      q = (1.0 - batch_rate) * q + batch_rate * (e.reward + mean_next) +
          hoeffding_round_bonus(e.prior, after, rates);
    }
    next.q[e.triple] = q;
    next.visits[e.triple] = e.prior + e.added;
  }
  refresh_values_and_policy(next);
  return next;
}

double server_variance(const ServerState& server, std::size_t triple) {
  const std::int64_t n = server.visits[triple];
  if (n == 0 || server.w1.empty()) return 0.0;
  const double mean = server.w2[triple] / static_cast<double>(n);
  return std::max(0.0, server.w1[triple] / static_cast<double>(n) - mean * mean);
}

ServerState aggregate_bernstein(const ServerState& server,
                                std::span<const AgentRoundReport> reports,
                                const BernsteinParams& params) {
  validate(params);
  require(server.variant == Variant::Bernstein, "server is not running the Bernstein variant");
  require(params.horizon == server.horizon, "Bernstein horizon does not match the server");
  check_report_shapes(server, reports, true);
  check_report_consistency(server, reports);
  const int M = num_agents_of(reports);
  const std::int64_t i0 = case_one_limit(M, server.horizon);
  const int H = server.horizon;

  ServerState next = server;
  next.round = server.round + 1;
  for (const VisitedEntry& e : visited_entries(server, reports)) {
    const std::int64_t after = e.prior + e.added;
    double square_sum = 0.0;
    for (const auto& r : reports) {
      if (r.visits[e.cell] > 0) {
        square_sum += r.second_moment_means[e.cell] * static_cast<double>(r.visits[e.cell]);
      }
    }
    const double variance_before = server_variance(server, e.triple);
    next.w1[e.triple] = server.w1[e.triple] + square_sum;
    next.w2[e.triple] = server.w2[e.triple] + e.value_sum;
    const double mean = next.w2[e.triple] / static_cast<double>(after);
    const double raw_variance = next.w1[e.triple] / static_cast<double>(after) - mean * mean;
    if (raw_variance < kNegativeVarianceLimit) {
      fail(ErrorKind::NegativeVariance,
           "variance accumulator went negative at " + triple_name(e.h, e.s, e.a));
    }
    const double variance_after = std::max(0.0, raw_variance);

    // beta_t uses the variance at the end of the round containing visit t.
    auto beta = [&](std::int64_t t) {
      return bernstein_beta(t, t <= e.prior ? variance_before : variance_after, params);
    };

    double q = server.q[e.triple];
    if (e.prior < i0) {
      q = sequential_update(q, e, reports, H, [&](std::int64_t t) {
        const double prev = t == 1 ? 0.0 : beta(t - 1);
        return bernstein_per_visit_bonus(t, beta(t), prev, H);
      });
    } else {
      const double decay = eta_c(e.prior + 1, after, H);
      const double batch_rate = 1.0 - decay;
      const double mean_next = e.value_sum / static_cast<double>(e.added);
      const double round_bonus = beta(after) - decay * beta(e.prior);
      q = (1.0 - batch_rate) * q + batch_rate * (e.reward + mean_next) + round_bonus / 2.0;
    }
    next.q[e.triple] = q;
    next.visits[e.triple] = after;
  }
  refresh_values_and_policy(next);
  return next;
}

std::vector<std::int64_t> geometric_checkpoints(std::int64_t last, double ratio) {
  require(last >= 1, "checkpoint grid needs a positive endpoint");
  require(ratio > 1.0, "checkpoint ratio must exceed 1");
  std::vector<std::int64_t> grid;
  std::int64_t c = 1;
  while (c < last) {
    grid.push_back(c);
    c = std::max(c + 1, static_cast<std::int64_t>(std::ceil(static_cast<double>(c) * ratio)));
  }
  grid.push_back(last);
  return grid;
}

namespace {

/// Per-round relationships between local and global visit counts plus
/// value-range sanity checks.
void check_round_invariants(const ServerState& before, const RoundResult& round,
                            const ServerState& after, double bonus_scale, double log_factor,
                            InvariantReport& inv) {
  const int M = static_cast<int>(round.reports.size());
  const int H = before.horizon;
  const int S = before.num_states;
  const std::int64_t i0 = case_one_limit(M, H);
  const std::int64_t per_agent_denom = static_cast<std::int64_t>(M) * H * (H + 1);
  const std::int64_t pooled_denom = static_cast<std::int64_t>(H) * (H + 1);
  const std::string tag = "round " + std::to_string(before.round) + ": ";

  bool any_trigger = false;
  for (const auto& r : round.reports) {
    inv.check(r.episodes_run == round.reports.front().episodes_run,
              tag + "agents disagree on episodes_run");
  }
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      const int a = before.policy(h, s);
      const std::int64_t prior = before.visits[before.index(h, s, a)];
      const std::int64_t cap = trigger_threshold(prior, M, H);
      const std::size_t cell = static_cast<std::size_t>(h) * S + s;
      std::int64_t pooled = 0;
      for (const auto& r : round.reports) {
        const std::int64_t n = r.visits[cell];
        pooled += n;
        if (n >= cap) any_trigger = true;
        inv.check(n <= cap, tag + "local visits exceed the trigger threshold");
        if (prior < i0) {
          inv.check(n <= 1, tag + "more than one local visit below the batching limit");
        } else {
          inv.check(n * per_agent_denom <= prior, tag + "local visits exceed N/(MH(H+1))");
        }
        inv.check(r.value_sums[cell] >= -kValueSlack &&
                      r.value_sums[cell] <= H * static_cast<double>(n) + kValueSlack,
                  tag + "value sum outside [0, H n]");
      }
      if (prior < i0) {
        inv.check(pooled <= M, tag + "pooled visits exceed M below the batching limit");
      } else {
        inv.check(pooled * pooled_denom <= prior, tag + "pooled visits exceed N/(H(H+1))");
      }
    }
  }
  inv.check(any_trigger, tag + "round ended without any triple meeting its threshold");

  const double q_cap = 2.0 * H * (1.0 + bonus_scale * std::sqrt(double(H) * H * H * log_factor));
  for (std::size_t i = 0; i < after.q.size(); ++i) {
    inv.check(after.visits[i] >= before.visits[i], tag + "visit counts decreased");
    inv.check(after.q[i] >= -kValueSlack && after.q[i] <= q_cap, tag + "Q outside its envelope");
  }
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      const double v = after.v(h, s);
      inv.check(v >= -kValueSlack && v <= H, tag + "V outside [0, H]");
      double best = after.q[after.index(h, s, 0)];
      for (int a = 1; a < after.num_actions; ++a) best = std::max(best, after.q[after.index(h, s, a)]);
      inv.check(after.q[after.index(h, s, after.policy(h, s))] == best,
                tag + "policy is not greedy in Q");
    }
  }
}

}  // namespace

FedqRun run_fedq(const TabularMdp& mdp, const FedqConfig& config, const RunOptions& options) {
  const int M = config.num_agents;
  const int H = mdp.horizon();
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  require(M >= 1, "number of agents must be >= 1");
  require(config.total_steps >= H, "T0 must be at least H");
  require(std::is_sorted(options.checkpoints.begin(), options.checkpoints.end()),
          "checkpoints must be ascending");

  const RateParams rates = config.rate_params(H);
  const BernsteinParams bparams = config.bernstein_params(mdp);
  if (config.variant == Variant::Hoeffding) {
    validate(rates);
  } else {
    validate(bparams);
  }
  const double active_scale =
      config.variant == Variant::Hoeffding ? config.bonus_scale : config.bernstein_scale;

  const OptimalValues optimal = backward_induction(mdp);
  const StateTable p_star = stationary_visit_probs(mdp, optimal.canonical_policy);
  const MdpSampler sampler(mdp);
  std::vector<RandomStream> streams = make_agent_streams(config.seed, M);
  const RoundScalars scalars = count_round_scalars(M, H, S, config.variant);

  FedqRun run;
  RunMetrics& metrics = run.metrics;
  metrics.num_agents = M;
  metrics.horizon = H;
  InvariantReport& inv = metrics.invariants;

  ServerState server = initial_server_state(mdp, config.variant);
  std::vector<double> regret_by_state(S, 0.0);
  std::int64_t episodes = 0;  // per agent
  std::size_t next_checkpoint = 0;
  std::size_t next_snapshot = 0;
  DeterministicPolicy previous_policy;
  std::vector<std::int64_t> visits_before_last_round;
  StateTable running_max(S, H);

  RoundOptions round_options;
  round_options.record_steps = options.record_transcripts;
  round_options.optimal_mask = &optimal.is_optimal;
  round_options.on_wave = [&](const WaveSummary& w) {
    ++episodes;
    for (int s : w.initial_states) metrics.regret += regret_by_state[s];
    metrics.suboptimal_visits += w.suboptimal_steps;
    while (next_checkpoint < options.checkpoints.size() &&
           options.checkpoints[next_checkpoint] <= episodes) {
      if (options.checkpoints[next_checkpoint] == episodes) {
        const std::int64_t k = server.round;
        metrics.curve.push_back({episodes, metrics.regret, k, k * scalars.payload(),
                                 k * scalars.abort, metrics.switching_cost,
                                 metrics.suboptimal_visits});
      }
      ++next_checkpoint;
    }
  };

  while (server.total_visits() < config.total_steps) {
    if (server.round > 1) {
      metrics.switching_cost += switching_increment(previous_policy, server.policy);
    }
    previous_policy = server.policy;

    const StateTable v_pi = evaluate_policy(mdp, server.policy);
    for (int s = 0; s < S; ++s) regret_by_state[s] = optimal.v_star(0, s) - v_pi(0, s);

    if (options.track_optimism) {
      for (std::size_t i = 0; i < server.q.size(); ++i) {
        ++metrics.optimism_checks;
        if (server.q[i] >= optimal.q_star[i]) ++metrics.optimism_holds;
      }
    }

    RoundResult round = run_round(server, mdp, sampler, streams, round_options);
    check_reports_against_mdp(server, mdp, round.reports);
    ServerState next = config.variant == Variant::Hoeffding
                           ? aggregate_hoeffding(server, round.reports, rates)
                           : aggregate_bernstein(server, round.reports, bparams);

    if (options.check_invariants) {
      check_round_invariants(server, round, next, active_scale, config.log_factor, inv);
    }

    // Visit concentration at round ends, sampled at the checkpoint grid.
    const std::int64_t total_episodes = episodes * M;
    const StateTable deviation =
        concentration_deviation_from_mask(p_star, optimal.is_optimal, next.visits, A,
                                          total_episodes);
    for (std::size_t i = 0; i < running_max.values.size(); ++i) {
      running_max.values[i] = std::max(running_max.values[i], deviation.values[i]);
    }
    if (next_snapshot < options.checkpoints.size() &&
        options.checkpoints[next_snapshot] <= episodes) {
      metrics.concentration.push_back({total_episodes, deviation, running_max});
      while (next_snapshot < options.checkpoints.size() &&
             options.checkpoints[next_snapshot] <= episodes) {
        ++next_snapshot;
      }
    }

    if (options.on_round) options.on_round(server, round, next);
    if (options.record_transcripts) run.transcripts.push_back(std::move(round.transcript));
    visits_before_last_round = server.visits;
    server = std::move(next);
  }

  const std::int64_t K = server.round - 1;
  metrics.rounds = K;
  metrics.comm_scalars = K * scalars.payload();
  metrics.abort_scalars = K * scalars.abort;
  metrics.episodes_total = episodes * M;
  metrics.steps_total = metrics.episodes_total * H;
  metrics.visit_ledger = server.visits;

  if (options.check_invariants) {
    const double T0 = static_cast<double>(config.total_steps);
    const double growth = 1.0 + 1.0 / (static_cast<double>(H) * (H + 1));
    const double T1 = growth * T0 + static_cast<double>(M) * H * S * A;
    for (int h = 0; h < H; ++h) {
      std::int64_t before_last = 0;
      std::int64_t final_total = 0;
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          before_last += visits_before_last_round[mdp.sa_index(h, s, a)];
          final_total += server.visits[mdp.sa_index(h, s, a)];
        }
      }
      inv.check(static_cast<double>(before_last) <= T0 / H,
                "sum_{s,a} N_h^K exceeds T0/H at h=" + std::to_string(h));
      inv.check(static_cast<double>(final_total) <= growth * T0 / H + double(M) * S * A,
                "sum_{s,a} N_h^{K+1} exceeds its bound at h=" + std::to_string(h));
    }
    inv.check(T0 <= static_cast<double>(metrics.steps_total), "total steps below T0");
    inv.check(static_cast<double>(K) <= T1 / H, "number of rounds exceeds T1/H");
    inv.check(metrics.switching_cost <= K - 1, "switching cost exceeds K - 1");
    inv.check(server.total_visits() == metrics.steps_total, "visit ledger differs from steps");
  }

  run.final_state = std::move(server);
  return run;
}

void write_transcript(std::ostream& out, std::span<const RoundTranscript> transcripts) {
  char buf[64];
  for (const auto& tr : transcripts) {
    for (const auto& st : tr.steps) {
      std::snprintf(buf, sizeof(buf), "%.17g", st.reward);
      out << tr.round << ' ' << st.agent << ' ' << st.episode << ' ' << st.h << ' ' << st.s
          << ' ' << st.a << ' ' << buf << ' ' << st.next_state << '\n';
    }
  }
}

std::string server_state_to_json(const ServerState& state) {
  nlohmann::ordered_json j;
  j["format"] = "fedq-server-state";
  j["version"] = 1;
  j["variant"] = variant_name(state.variant);
  j["S"] = state.num_states;
  j["A"] = state.num_actions;
  j["H"] = state.horizon;
  j["round"] = state.round;
  j["q"] = state.q;
  j["v"] = state.v.values;
  j["policy"] = state.policy.actions();
  j["visits"] = state.visits;
  j["w1"] = state.w1;
  j["w2"] = state.w2;
  return j.dump(1) + "\n";
}

ServerState server_state_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "fedq-server-state") {
      fail(ErrorKind::Parse, "not a server state file");
    }
    ServerState st;
    st.variant = parse_variant(j.at("variant").get<std::string>());
    st.num_states = j.at("S").get<int>();
    st.num_actions = j.at("A").get<int>();
    st.horizon = j.at("H").get<int>();
    require(st.num_states >= 1 && st.num_actions >= 1 && st.horizon >= 1,
            "server state dimensions must be positive");
    st.round = j.at("round").get<std::int64_t>();
    st.q = j.at("q").get<std::vector<double>>();
    st.v = StateTable(st.num_states, st.horizon);
    st.v.values = j.at("v").get<std::vector<double>>();
    st.policy = DeterministicPolicy(st.num_states, st.horizon);
    const auto actions = j.at("policy").get<std::vector<int>>();
    st.visits = j.at("visits").get<std::vector<std::int64_t>>();
    st.w1 = j.at("w1").get<std::vector<double>>();
    st.w2 = j.at("w2").get<std::vector<double>>();
    const std::size_t triples =
        static_cast<std::size_t>(st.num_states) * st.num_actions * st.horizon;
    const std::size_t cells = static_cast<std::size_t>(st.num_states) * st.horizon;
    if (st.q.size() != triples || st.visits.size() != triples || st.v.values.size() != cells ||
        actions.size() != cells) {
      fail(ErrorKind::Parse, "server state tables have the wrong size");
    }
    const std::size_t acc = st.variant == Variant::Bernstein ? triples : 0;
    if (st.w1.size() != acc || st.w2.size() != acc) {
      fail(ErrorKind::Parse, "server state accumulators have the wrong size");
    }
    for (int h = 0; h < st.horizon; ++h) {
      for (int s = 0; s < st.num_states; ++s) {
        st.policy.set(h, s, actions[static_cast<std::size_t>(h) * st.num_states + s]);
      }
    }
    return st;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed server state: ") + e.what());
  }
}

}  // namespace fedq
