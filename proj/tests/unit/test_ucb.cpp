#include <cmath>

#include <doctest.h>

#include "fedq/ucb.hpp"
#include "test_helpers.hpp"

using namespace fedq;

TEST_CASE("first episode pays the gap of the initial greedy policy") {
  const TabularMdp mdp = generate_random_mdp(3, 2, 3, 11);
  const OptimalValues opt = backward_induction(mdp);
  const StateTable v0 = evaluate_policy(mdp, DeterministicPolicy(3, 3, 0));
  const RunMetrics m = run_ucb_hoeffding(mdp, 1, RateParams{3, 2.0, 1.0}, 5);
  bool matched = false;
  for (int s = 0; s < 3; ++s) {
    matched = matched || std::abs(m.regret - (opt.v_star(0, s) - v0(0, s))) <= 1e-12;
  }
  CHECK(matched);
  CHECK(m.switching_cost == 0);
}

TEST_CASE("single-action instance has no regret") {
  const TabularMdp mdp = generate_random_mdp(3, 1, 3, 2);
  const RunMetrics m = run_ucb_hoeffding(mdp, 500, RateParams{3, 2.0, 1.0}, 1);
  CHECK(m.regret == 0.0);
  CHECK(m.suboptimal_visits == 0);
}

TEST_CASE("UCB bookkeeping") {
  const TabularMdp mdp = generate_random_mdp(2, 3, 3, 8);
  const RateParams rates{3, 2.0, 1.0};
  UcbState st;
  UcbOptions opts;
  opts.checkpoints = {1, 10, 100, 2000};
  const RunMetrics m = run_ucb_hoeffding(mdp, 2000, rates, 4, opts, &st);
  std::int64_t total = 0;
  for (auto n : st.visit_count) total += n;
  CHECK(total == 3 * 2000);
  CHECK(m.steps_total == 3 * 2000);
  CHECK(st.episode == 2000);
  for (double v : st.v.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 3.0);
  }
  for (double q : st.q) CHECK(q >= 0.0);
  REQUIRE(m.curve.size() == 4);
  for (std::size_t k = 1; k < m.curve.size(); ++k) {
    CHECK(m.curve[k].regret >= m.curve[k - 1].regret);
  }
  CHECK(m.curve.back().regret == m.regret);
  CHECK(m.regret >= 0.0);

  const RunMetrics again = run_ucb_hoeffding(mdp, 2000, rates, 4, opts);
  CHECK(again.regret == m.regret);
  CHECK(again.visit_ledger == m.visit_ledger);
  CHECK(run_ucb_hoeffding(mdp, 2000, rates, 5).visit_ledger != m.visit_ledger);

  CHECK_FEDQ_ERROR(run_ucb_hoeffding(mdp, 0, rates, 1), ErrorKind::InvalidArgument);
  CHECK_FEDQ_ERROR(run_ucb_hoeffding(mdp, 10, RateParams{2, 2.0, 1.0}, 1),
                   ErrorKind::InvalidArgument);
}
