#include "fedq/solver.hpp"

#include <algorithm>
#include <limits>

#include "fedq/error.hpp"

namespace fedq {

OptimalValues backward_induction(const TabularMdp& mdp) {
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  const int H = mdp.horizon();

  OptimalValues out;
  out.v_star = StateTable(S, H);
  out.q_star.assign(mdp.num_triples(), 0.0);
  out.gap.assign(mdp.num_triples(), 0.0);
  out.is_optimal.assign(mdp.num_triples(), 0);
  out.canonical_policy = DeterministicPolicy(S, H);

  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        double q = mdp.reward(h, s, a);
        if (h + 1 < H) {
          const auto p = mdp.next_state_probs(h, s, a);
          for (int next = 0; next < S; ++next) q += p[next] * out.v_star(h + 1, next);
        }
        out.q_star[mdp.sa_index(h, s, a)] = q;
        best = std::max(best, q);
      }
      out.v_star(h, s) = best;
      bool canonical_set = false;
      for (int a = 0; a < A; ++a) {
        const std::size_t i = mdp.sa_index(h, s, a);
        out.gap[i] = std::max(0.0, best - out.q_star[i]);
        if (out.gap[i] <= kGapTolerance) {
          out.is_optimal[i] = 1;
          if (!canonical_set) {
            out.canonical_policy.set(h, s, a);
            canonical_set = true;
          }
        }
      }
    }
  }
  return out;
}

StateTable evaluate_policy(const TabularMdp& mdp, const DeterministicPolicy& policy) {
  validate_policy(mdp, policy);
  const int S = mdp.num_states();
  const int H = mdp.horizon();
  StateTable v(S, H);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      const int a = policy(h, s);
      double value = mdp.reward(h, s, a);
      if (h + 1 < H) {
        const auto p = mdp.next_state_probs(h, s, a);
        for (int next = 0; next < S; ++next) value += p[next] * v(h + 1, next);
      }
      v(h, s) = value;
    }
  }
  return v;
}

StateTable stationary_visit_probs(const TabularMdp& mdp, const DeterministicPolicy& policy) {
  validate_policy(mdp, policy);
  const int S = mdp.num_states();
  const int H = mdp.horizon();
  StateTable p(S, H);
  for (int s = 0; s < S; ++s) p(0, s) = mdp.initial_dist()[s];
  for (int h = 0; h + 1 < H; ++h) {
    for (int s = 0; s < S; ++s) {
      const double mass = p(h, s);
      if (mass == 0.0) continue;
      const auto row = mdp.next_state_probs(h, s, policy(h, s));
      for (int next = 0; next < S; ++next) p(h + 1, next) += mass * row[next];
    }
  }
  return p;
}

GmdpClassification classify_gmdp(const TabularMdp& mdp,
                                 const std::vector<std::vector<int>>& optimal_actions,
                                 const DeterministicPolicy& canonical_policy) {
  const int S = mdp.num_states();
  GmdpClassification out;
  out.visit_prob_star = stationary_visit_probs(mdp, canonical_policy);
  out.is_gmdp = true;
  out.c_st = std::numeric_limits<double>::infinity();
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (int s = 0; s < S; ++s) {
      const double p = out.visit_prob_star(h, s);
      if (p <= kSupportTolerance) continue;
      out.c_st = std::min(out.c_st, p);
      if (optimal_actions[static_cast<std::size_t>(h) * S + s].size() != 1) out.is_gmdp = false;
    }
  }
  return out;
}

MdpSolution solve_optimal(const TabularMdp& mdp) {
  OptimalValues values = backward_induction(mdp);
  const int S = mdp.num_states();
  const int H = mdp.horizon();

  MdpSolution sol;
  sol.v_star = std::move(values.v_star);
  sol.q_star = std::move(values.q_star);
  sol.gap = std::move(values.gap);
  sol.canonical_policy = std::move(values.canonical_policy);

  sol.min_gap = std::numeric_limits<double>::infinity();
  for (double g : sol.gap) {
    if (g > kGapTolerance) sol.min_gap = std::min(sol.min_gap, g);
  }
  if (sol.min_gap == std::numeric_limits<double>::infinity()) {
    fail(ErrorKind::DegenerateMdp, "every suboptimality gap is zero");
  }

  sol.optimal_actions.resize(static_cast<std::size_t>(S) * H);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      auto& set = sol.optimal_actions[static_cast<std::size_t>(h) * S + s];
      for (int a = 0; a < mdp.num_actions(); ++a) {
        if (values.is_optimal[mdp.sa_index(h, s, a)]) set.push_back(a);
      }
    }
  }

  GmdpClassification g = classify_gmdp(mdp, sol.optimal_actions, sol.canonical_policy);
  sol.visit_prob_star = std::move(g.visit_prob_star);
  sol.c_st = g.c_st;
  sol.is_gmdp = g.is_gmdp;
  return sol;
}

}  // namespace fedq
