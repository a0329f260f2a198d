#include <cmath>
#include <sstream>

#include <doctest.h>

#include "fedq/runtime.hpp"
#include "fedq/solver.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace fedq;

namespace {

// One report per agent for a single visited (h, s) cell.
std::vector<AgentRoundReport> single_cell_reports(int S, int H, int h, int s,
                                                  std::vector<std::int64_t> visits,
                                                  std::vector<double> value_sums, double reward,
                                                  std::int64_t episodes) {
  std::vector<AgentRoundReport> out;
  for (std::size_t m = 0; m < visits.size(); ++m) {
    AgentRoundReport r(S, H, false);
    r.episodes_run = episodes;
    const std::size_t c = r.index(h, s);
    r.visits[c] = visits[m];
    r.value_sums[c] = value_sums[m];
    r.rewards[c] = visits[m] > 0 ? reward : 0.0;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("trigger threshold and batching limit") {
  CHECK(trigger_threshold(0, 3, 4) == 1);
  CHECK(trigger_threshold(24, 2, 2) == 2);
  CHECK(trigger_threshold(11, 1, 2) == 1);
  CHECK(trigger_threshold(1199, 10, 3) == 9);
  CHECK(case_one_limit(2, 2) == 24);
  CHECK(case_one_limit(10, 2) == 120);
}

TEST_CASE("first round ends after one episode") {
  const TabularMdp mdp = generate_random_mdp(3, 2, 3, 1);
  const ServerState server = initial_server_state(mdp, Variant::Hoeffding);
  const MdpSampler sampler(mdp);
  auto streams = make_agent_streams(9, 4);
  RoundOptions opts;
  opts.record_steps = true;
  const RoundResult r = run_round(server, mdp, sampler, streams, opts);
  CHECK(r.transcript.episodes_run == 1);
  CHECK(r.transcript.steps.size() == 4 * 3);
  CHECK(r.transcript.initial_states.size() == 4);
  CHECK(r.transcript.trigger_agent == 0);
  for (const auto& rep : r.reports) CHECK(rep.episodes_run == 1);
}

TEST_CASE("deterministic revisits run exactly the threshold") {
  // One state, one action: every episode visits each (h, 0, 0) once.
  const TabularMdp mdp = oracle::deterministic_mdp(
      1, 1, 2, [](int, int, int) { return 0; }, [](int, int, int) { return 0.25; }, {1.0});
  ServerState server = initial_server_state(mdp, Variant::Hoeffding);
  server.visits = {60, 90};  // thresholds 10 and 15 with M = 1, H = 2
  const MdpSampler sampler(mdp);
  auto streams = make_agent_streams(0, 1);
  const RoundResult r = run_round(server, mdp, sampler, streams);
  CHECK(r.transcript.episodes_run == 10);
  CHECK(r.transcript.trigger_h == 0);
  CHECK(r.reports[0].visits == std::vector<std::int64_t>{10, 10});
  // value_sums hold V_{h+1} at the next state: V_1 = H = 2 for h = 0, zero at the end.
  CHECK(r.reports[0].value_sums == std::vector<double>{20.0, 0.0});
}

TEST_CASE("round transcripts are reproducible") {
  const TabularMdp mdp = generate_random_mdp(3, 2, 2, 4);
  ServerState server = initial_server_state(mdp, Variant::Bernstein);
  for (auto& n : server.visits) n = 200;
  const MdpSampler sampler(mdp);
  RoundOptions opts;
  opts.record_steps = true;
  auto s1 = make_agent_streams(17, 2);
  auto s2 = make_agent_streams(17, 2);
  const RoundResult a = run_round(server, mdp, sampler, s1, opts);
  const RoundResult b = run_round(server, mdp, sampler, s2, opts);
  std::ostringstream ta;
  std::ostringstream tb;
  write_transcript(ta, std::span(&a.transcript, 1));
  write_transcript(tb, std::span(&b.transcript, 1));
  CHECK(ta.str() == tb.str());
  CHECK(a.transcript.episodes_run > 1);
  for (std::size_t m = 0; m < 2; ++m) {
    CHECK(a.reports[m].visits == b.reports[m].visits);
    CHECK(a.reports[m].second_moment_means == b.reports[m].second_moment_means);
  }
}

TEST_CASE("transcript dump format") {
  RoundTranscript tr;
  tr.round = 3;
  tr.steps.push_back({1, 2, 0, 4, 1, 0.5, 2});
  tr.steps.push_back({1, 2, 1, 2, 0, 0.25, -1});
  std::ostringstream out;
  write_transcript(out, std::span(&tr, 1));
  CHECK(out.str() == "3 1 2 0 4 1 0.5 2\n3 1 2 1 2 0 0.25 -1\n");
}

TEST_CASE("Hoeffding aggregation") {
  const TabularMdp mdp = generate_random_mdp(2, 2, 2, 3);
  const RateParams rates{2, 2.0, 1.0};

  SUBCASE("first visit erases the initialization") {
    const ServerState server = initial_server_state(mdp, Variant::Hoeffding);
    const auto reports = single_cell_reports(2, 2, 0, 1, {1}, {1.7}, 0.3, 1);
    const ServerState next = aggregate_hoeffding(server, reports, rates);
    CHECK(next.q[server.index(0, 1, 0)] == doctest::Approx(0.3 + 1.7 + 2.0 * std::sqrt(8.0)));
    CHECK(next.visits[server.index(0, 1, 0)] == 1);
    CHECK(next.round == 2);
  }

  SUBCASE("untouched entries are copied and values refreshed") {
    ServerState server = initial_server_state(mdp, Variant::Hoeffding);
    server.q[server.index(1, 0, 1)] = 1.25;
    const auto reports = single_cell_reports(2, 2, 0, 1, {1}, {0.5}, 0.3, 1);
    const ServerState next = aggregate_hoeffding(server, reports, rates);
    for (std::size_t i = 0; i < next.q.size(); ++i) {
      if (i != server.index(0, 1, 0)) CHECK(next.q[i] == server.q[i]);
    }
    // (h=0, s=1): Q = 0.3 + 0.5 + b_1 > H, so V = H and the argmax is action 0.
    CHECK(next.v(0, 1) == 2.0);
    CHECK(next.policy(0, 1) == 0);
  }

  SUBCASE("sequential update below the batching limit") {
    ServerState server = initial_server_state(mdp, Variant::Hoeffding);
    const std::size_t i = server.index(1, 0, 0);
    server.visits[i] = 5;
    server.q[i] = 1.5;
    // Agents 0 and 2 visited; agent 1 did not.
    const auto reports = single_cell_reports(2, 2, 1, 0, {1, 0, 1}, {0.0, 0.0, 0.0}, 0.4, 1);
    const ServerState next = aggregate_hoeffding(server, reports, rates);
    double q = 1.5;
    for (std::int64_t t : {6, 7}) {
      const double e = oracle::eta(t, 2);
      q = (1 - e) * q + e * (0.4 + 0.0 + oracle::hoeffding_b(t, 2, 2.0, 1.0));
    }
    CHECK(next.q[i] == doctest::Approx(q).epsilon(1e-14));
    CHECK(next.visits[i] == 7);
  }

  SUBCASE("sequential values are taken in ascending agent order") {
    ServerState server = initial_server_state(mdp, Variant::Hoeffding);
    const std::size_t i = server.index(0, 0, 0);
    server.visits[i] = 2;
    const auto reports = single_cell_reports(2, 2, 0, 0, {1, 1}, {0.2, 1.9}, 0.1, 1);
    const ServerState next = aggregate_hoeffding(server, reports, rates);
    double q = 2.0;
    q = (1 - oracle::eta(3, 2)) * q + oracle::eta(3, 2) * (0.1 + 0.2 + oracle::hoeffding_b(3, 2, 2, 1));
    q = (1 - oracle::eta(4, 2)) * q + oracle::eta(4, 2) * (0.1 + 1.9 + oracle::hoeffding_b(4, 2, 2, 1));
    CHECK(next.q[i] == doctest::Approx(q).epsilon(1e-14));
  }

  SUBCASE("batched update matches the closed form") {
    ServerState server = initial_server_state(mdp, Variant::Hoeffding);
    const std::size_t i = server.index(0, 1, 0);
    const std::int64_t N = 40;  // >= i0 = 2 * 2 * 2 * 3 = 24 for M = 2
    server.visits[i] = N;
    server.q[i] = 1.1;
    const auto reports = single_cell_reports(2, 2, 0, 1, {2, 1}, {1.0, 0.7}, 0.6, 2);
    const ServerState next = aggregate_hoeffding(server, reports, rates);
    double decay = 1.0;
    for (std::int64_t t = N + 1; t <= N + 3; ++t) decay *= 1.0 - oracle::eta(t, 2);
    const double rate = 1.0 - decay;
    const double expected =
        (1 - rate) * 1.1 + rate * (0.6 + 1.7 / 3.0) + oracle::round_bonus(N, N + 3, 2, 2.0, 1.0);
    CHECK(std::abs(next.q[i] - expected) <= 1e-13);
    CHECK(next.visits[i] == N + 3);
  }

  SUBCASE("batch of two equal samples equals two per-visit updates") {
    ServerState server = initial_server_state(mdp, Variant::Hoeffding);
    const std::size_t i = server.index(1, 1, 0);
    const std::int64_t N = 100;
    server.visits[i] = N;
    server.q[i] = 0.9;
    const double v = 0.0;  // last step: no next value
    const auto reports = single_cell_reports(2, 2, 1, 1, {1, 1}, {v, v}, 0.35, 1);
    const ServerState next = aggregate_hoeffding(server, reports, rates);
    double q = 0.9;
    for (std::int64_t t = N + 1; t <= N + 2; ++t) {
      const double e = oracle::eta(t, 2);
      q = (1 - e) * q + e * (0.35 + v + oracle::hoeffding_b(t, 2, 2.0, 1.0));
    }
    CHECK(std::abs(next.q[i] - q) <= 1e-13);
  }

  SUBCASE("inconsistent reports") {
    ServerState server = initial_server_state(mdp, Variant::Hoeffding);
    auto reports = single_cell_reports(2, 2, 0, 0, {1, 1}, {0.0, 0.0}, 0.5, 1);
    reports[1].rewards[0] = 0.6;
    CHECK_FEDQ_ERROR(aggregate_hoeffding(server, reports, rates), ErrorKind::InconsistentReports);
    reports = single_cell_reports(2, 2, 0, 0, {1, 1}, {0.0, 0.0}, 0.5, 1);
    reports[1].episodes_run = 2;
    CHECK_FEDQ_ERROR(aggregate_hoeffding(server, reports, rates), ErrorKind::InconsistentReports);
    reports = single_cell_reports(2, 2, 0, 0, {2, 0}, {0.0, 0.0}, 0.5, 2);
    CHECK_FEDQ_ERROR(aggregate_hoeffding(server, reports, rates), ErrorKind::InconsistentReports);
    CHECK_FEDQ_ERROR(aggregate_hoeffding(server, {}, rates), ErrorKind::InconsistentReports);
  }
}

TEST_CASE("reports are cross-checked against the model rewards") {
  const TabularMdp mdp = generate_random_mdp(2, 2, 2, 3);
  const ServerState server = initial_server_state(mdp, Variant::Hoeffding);
  auto reports = single_cell_reports(2, 2, 0, 0, {1}, {0.0}, mdp.reward(0, 0, 0), 1);
  CHECK_NOTHROW(check_reports_against_mdp(server, mdp, reports));
  reports[0].rewards[0] += 0.01;
  CHECK_FEDQ_ERROR(check_reports_against_mdp(server, mdp, reports),
                   ErrorKind::InconsistentReports);
}

TEST_CASE("run_fedq basics") {
  const TabularMdp mdp = generate_random_mdp(2, 2, 2, 0);
  FedqConfig cfg;
  cfg.num_agents = 3;
  cfg.seed = 5;

  SUBCASE("T0 = H gives exactly one round") {
    cfg.total_steps = 2;
    const FedqRun run = run_fedq(mdp, cfg);
    CHECK(run.metrics.rounds == 1);
    CHECK(run.metrics.episodes_total == 3);
    CHECK(run.metrics.steps_total == 6);
    CHECK(run.metrics.comm_scalars == 2 * 3 * 3 * 2 * 2);
    CHECK(run.metrics.abort_scalars == 4);
  }

  SUBCASE("rerun is bit-identical") {
    cfg.total_steps = 2 * 3 * 3000;
    RunOptions opts;
    opts.checkpoints = geometric_checkpoints(3000);
    const FedqRun a = run_fedq(mdp, cfg, opts);
    const FedqRun b = run_fedq(mdp, cfg, opts);
    CHECK(a.final_state == b.final_state);
    CHECK(a.metrics.regret == b.metrics.regret);
    CHECK(a.metrics.curve.size() == b.metrics.curve.size());
    std::ostringstream ra;
    std::ostringstream rb;
    write_regret_csv(ra, a.metrics);
    write_regret_csv(rb, b.metrics);
    CHECK(ra.str() == rb.str());
    CHECK(a.metrics.invariants.clean());
    CHECK(a.metrics.invariants.checks > 0);
  }

  SUBCASE("different seeds diverge") {
    cfg.total_steps = 2 * 3 * 500;
    const FedqRun a = run_fedq(mdp, cfg);
    cfg.seed = 6;
    const FedqRun b = run_fedq(mdp, cfg);
    CHECK_FALSE(a.final_state == b.final_state);
  }

  SUBCASE("single-action instance has zero regret") {
    const TabularMdp one = generate_random_mdp(3, 1, 3, 2);
    cfg.total_steps = 3 * 3 * 200;
    const FedqRun run = run_fedq(one, cfg);
    CHECK(run.metrics.regret == 0.0);
    CHECK(run.metrics.suboptimal_visits == 0);
    CHECK(run.metrics.switching_cost == 0);
  }

  SUBCASE("argument checks") {
    cfg.total_steps = 1;
    CHECK_FEDQ_ERROR(run_fedq(mdp, cfg), ErrorKind::InvalidArgument);
    cfg.total_steps = 10;
    cfg.num_agents = 0;
    CHECK_FEDQ_ERROR(run_fedq(mdp, cfg), ErrorKind::InvalidArgument);
  }
}

TEST_CASE("runtime invariants hold for both variants") {
  for (Variant variant : {Variant::Hoeffding, Variant::Bernstein}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const TabularMdp mdp = generate_random_mdp(2 + seed % 3, 2 + seed % 2, 2 + seed % 2, seed);
      FedqConfig cfg;
      cfg.variant = variant;
      cfg.num_agents = 1 + static_cast<int>(seed);
      cfg.total_steps = static_cast<std::int64_t>(mdp.horizon()) * cfg.num_agents * 4000;
      cfg.seed = seed;
      std::int64_t rounds_seen = 0;
      RunOptions opts;
      opts.on_round = [&](const ServerState& before, const RoundResult& r, const ServerState& after) {
        ++rounds_seen;
        CHECK(after.round == before.round + 1);
        CHECK(r.transcript.trigger_agent >= 0);
        CHECK(r.transcript.round == before.round);
      };
      const FedqRun run = run_fedq(mdp, cfg, opts);
      INFO("variant " << variant_name(variant) << " seed " << seed);
      CHECK(run.metrics.invariants.clean());
      if (!run.metrics.invariants.clean()) {
        for (const auto& m : run.metrics.invariants.messages) MESSAGE(m);
      }
      CHECK(rounds_seen == run.metrics.rounds);
      CHECK(run.metrics.switching_cost <= run.metrics.rounds - 1);
      CHECK(run.final_state.total_visits() == run.metrics.steps_total);
      CHECK(run.metrics.steps_total >= cfg.total_steps);
    }
  }
}

TEST_CASE("checkpoint grid") {
  CHECK(geometric_checkpoints(1) == std::vector<std::int64_t>{1});
  CHECK(geometric_checkpoints(10) == std::vector<std::int64_t>{1, 2, 3, 4, 5, 7, 9, 10});
  const auto g = geometric_checkpoints(100000);
  CHECK(g.back() == 100000);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
  CHECK_FEDQ_ERROR(geometric_checkpoints(0), ErrorKind::InvalidArgument);
  CHECK_FEDQ_ERROR(geometric_checkpoints(10, 1.0), ErrorKind::InvalidArgument);
}

TEST_CASE("checkpoints record the round in progress") {
  const TabularMdp mdp = generate_random_mdp(2, 2, 2, 0);
  FedqConfig cfg;
  cfg.num_agents = 2;
  cfg.total_steps = 2 * 2 * 50;
  RunOptions opts;
  opts.checkpoints = {1, 2, 50};
  const FedqRun run = run_fedq(mdp, cfg, opts);
  REQUIRE(run.metrics.curve.size() == 3);
  CHECK(run.metrics.curve[0].episodes == 1);
  CHECK(run.metrics.curve[0].rounds == 1);
  CHECK(run.metrics.curve[1].rounds == 2);
  CHECK(run.metrics.curve[2].rounds == run.metrics.rounds);
  CHECK(run.metrics.curve[2].regret <= run.metrics.regret);
  CHECK(run.metrics.curve[1].regret >= run.metrics.curve[0].regret);
}

TEST_CASE("server state JSON round-trips") {
  const TabularMdp mdp = generate_random_mdp(3, 2, 2, 8);
  FedqConfig cfg;
  cfg.variant = Variant::Bernstein;
  cfg.num_agents = 2;
  cfg.total_steps = 2 * 2 * 300;
  const FedqRun run = run_fedq(mdp, cfg);
  const std::string text = server_state_to_json(run.final_state);
  CHECK(server_state_from_json(text) == run.final_state);
  CHECK_FEDQ_ERROR(server_state_from_json("{}"), ErrorKind::Parse);
  CHECK_FEDQ_ERROR(server_state_from_json("[1,2"), ErrorKind::Parse);
  ServerState hoeffding = initial_server_state(mdp, Variant::Hoeffding);
  CHECK(server_state_from_json(server_state_to_json(hoeffding)) == hoeffding);
}
