#pragma once

#include <vector>

#include "fedq/mdp.hpp"

namespace fedq {

/// Actions whose gap is at most this are treated as optimal (ties).
inline constexpr double kGapTolerance = 1e-9;
/// States whose optimal-policy visiting probability is at most this are off-support.
inline constexpr double kSupportTolerance = 1e-12;

/// Table indexed by (h, s), h = 0 .. H-1.
struct StateTable {
  int num_states = 0;
  int horizon = 0;
  std::vector<double> values;

  StateTable() = default;
  StateTable(int states, int steps, double fill = 0.0)
      : num_states(states), horizon(steps),
        values(static_cast<std::size_t>(states) * steps, fill) {}

  double& operator()(int h, int s) { return values[static_cast<std::size_t>(h) * num_states + s]; }
  double operator()(int h, int s) const {
    return values[static_cast<std::size_t>(h) * num_states + s];
  }
  friend bool operator==(const StateTable&, const StateTable&) = default;
};

/// Q*, V*, gaps and optimal action sets from backward induction. Never throws on
/// degenerate instances; solve_optimal() adds the Delta_min > 0 requirement.
struct OptimalValues {
  StateTable v_star;
  std::vector<double> q_star;  // indexed by TabularMdp::sa_index
  std::vector<double> gap;     // V* - Q*, clamped at 0
  std::vector<char> is_optimal;
  DeterministicPolicy canonical_policy;  // lowest-index optimal action

  bool optimal(const TabularMdp& mdp, int h, int s, int a) const {
    return is_optimal[mdp.sa_index(h, s, a)] != 0;
  }
};

OptimalValues backward_induction(const TabularMdp& mdp);

struct MdpSolution {
  StateTable v_star;
  std::vector<double> q_star;
  std::vector<double> gap;
  double min_gap = 0.0;
  std::vector<std::vector<int>> optimal_actions;  // indexed by h * S + s
  DeterministicPolicy canonical_policy;
  StateTable visit_prob_star;
  double c_st = 0.0;
  bool is_gmdp = false;

  const std::vector<int>& optimal_at(int h, int s) const {
    return optimal_actions[static_cast<std::size_t>(h) * v_star.num_states + s];
  }
};

/// Exact optimal solution with gaps and G-MDP classification.
/// Throws DegenerateMdp when no gap exceeds kGapTolerance.
MdpSolution solve_optimal(const TabularMdp& mdp);

/// V^pi by backward induction with V_{H+1} = 0.
StateTable evaluate_policy(const TabularMdp& mdp, const DeterministicPolicy& policy);

/// P(s_h = s | pi) by forward recursion from the initial distribution.
StateTable stationary_visit_probs(const TabularMdp& mdp, const DeterministicPolicy& policy);

struct GmdpClassification {
  bool is_gmdp = false;
  StateTable visit_prob_star;
  double c_st = 0.0;
};

/// Visiting probabilities under the canonical optimal policy; the instance is a
/// G-MDP iff every supported (h, s) has exactly one optimal action. Agreement
/// of all optimal policies on the support makes the visit distribution unique.
GmdpClassification classify_gmdp(const TabularMdp& mdp,
                                 const std::vector<std::vector<int>>& optimal_actions,
                                 const DeterministicPolicy& canonical_policy);

}  // namespace fedq
