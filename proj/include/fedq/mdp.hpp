#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fedq {

/// Finite-horizon tabular MDP with step-dependent kernels and deterministic
/// rewards in [0, 1]. Steps are 0-based internally (h = 0 .. H-1).
///
/// Storage is dense and row-major:
///   reward[(h * S + s) * A + a]
///   transition[((h * S + s) * A + a) * S + s']
class TabularMdp {
 public:
  TabularMdp(int num_states, int num_actions, int horizon,
             std::vector<double> reward, std::vector<double> transition,
             std::vector<double> initial_dist);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int horizon() const { return horizon_; }

  double reward(int h, int s, int a) const { return reward_[sa_index(h, s, a)]; }

  std::span<const double> next_state_probs(int h, int s, int a) const {
    return {transition_.data() + sa_index(h, s, a) * num_states_,
            static_cast<std::size_t>(num_states_)};
  }

  std::span<const double> initial_dist() const { return initial_dist_; }

  const std::vector<double>& reward_table() const { return reward_; }
  const std::vector<double>& transition_table() const { return transition_; }

  std::size_t sa_index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * num_states_ + s) * num_actions_ + a;
  }
  std::size_t num_triples() const {
    return static_cast<std::size_t>(horizon_) * num_states_ * num_actions_;
  }

  friend bool operator==(const TabularMdp&, const TabularMdp&) = default;

 private:
  int num_states_;
  int num_actions_;
  int horizon_;
  std::vector<double> reward_;
  std::vector<double> transition_;
  std::vector<double> initial_dist_;
};

/// Deterministic, step-dependent policy: action(h, s).
class DeterministicPolicy {
 public:
  DeterministicPolicy() = default;
  DeterministicPolicy(int num_states, int horizon, int fill_action = 0)
      : num_states_(num_states),
        horizon_(horizon),
        action_(static_cast<std::size_t>(num_states) * horizon, fill_action) {}

  int num_states() const { return num_states_; }
  int horizon() const { return horizon_; }

  int operator()(int h, int s) const { return action_[index(h, s)]; }
  void set(int h, int s, int a) { action_[index(h, s)] = a; }

  const std::vector<int>& actions() const { return action_; }

  friend bool operator==(const DeterministicPolicy&, const DeterministicPolicy&) = default;

 private:
  std::size_t index(int h, int s) const {
    return static_cast<std::size_t>(h) * num_states_ + s;
  }

  int num_states_ = 0;
  int horizon_ = 0;
  std::vector<int> action_;
};

/// Throws InvalidArgument unless every action lies in [0, A) and the shape matches.
void validate_policy(const TabularMdp& mdp, const DeterministicPolicy& policy);

/// Random instance: rewards i.i.d. U[0,1), each transition row drawn from the
/// uniform distribution on the simplex (normalized unit exponentials), uniform
/// initial distribution. A pure function of its arguments.
TabularMdp generate_random_mdp(int num_states, int num_actions, int horizon,
                               std::uint64_t seed);

/// Cumulative tables for inverse-CDF sampling of next states and initial states.
class MdpSampler {
 public:
  explicit MdpSampler(const TabularMdp& mdp);

  /// u must lie in [0, 1).
  int sample_initial(double u) const { return pick(initial_cdf_.data(), u); }
  int sample_next(int h, int s, int a, double u) const {
    return pick(cdf_.data() + row_index(h, s, a) * num_states_, u);
  }

 private:
  std::size_t row_index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * num_states_ + s) * num_actions_ + a;
  }
  int pick(const double* cdf, double u) const;

  int num_states_;
  int num_actions_;
  std::vector<double> cdf_;
  std::vector<double> initial_cdf_;
};

// JSON text serialization. Doubles are written with round-trip precision.
std::string mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const std::string& text);
void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path);
TabularMdp load_mdp(const std::filesystem::path& path);

}  // namespace fedq
