#include "fedq/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedq/error.hpp"
#include "fedq/rng.hpp"

namespace fedq {
namespace {

constexpr double kSimplexTolerance = 1e-12;

void check_distribution(std::span<const double> p, const std::string& what) {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      fail(ErrorKind::InvalidArgument, what + " has a negative or non-finite entry");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    fail(ErrorKind::InvalidArgument, what + " does not sum to 1");
  }
}

// Running sums with the tail pinned to 1.0 from the last positive entry on,
// so that upper_bound(u) for u in [0,1) always lands on a positive-mass index.
void append_cdf(std::span<const double> p, std::vector<double>& out) {
  const std::size_t start = out.size();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    out.push_back(acc);
    if (p[i] > 0.0) last_positive = i;
  }
  for (std::size_t i = last_positive; i < p.size(); ++i) out[start + i] = 1.0;
}

}  // namespace

TabularMdp::TabularMdp(int num_states, int num_actions, int horizon,
                       std::vector<double> reward, std::vector<double> transition,
                       std::vector<double> initial_dist)
    : num_states_(num_states),
      num_actions_(num_actions),
      horizon_(horizon),
      reward_(std::move(reward)),
      transition_(std::move(transition)),
      initial_dist_(std::move(initial_dist)) {
  require(num_states_ >= 1 && num_actions_ >= 1 && horizon_ >= 1,
          "MDP dimensions must be positive");
  require(reward_.size() == num_triples(), "reward table has the wrong size");
  require(transition_.size() == num_triples() * num_states_,
          "transition table has the wrong size");
  require(initial_dist_.size() == static_cast<std::size_t>(num_states_),
          "initial distribution has the wrong size");
  for (double r : reward_) {
    require(r >= 0.0 && r <= 1.0, "rewards must lie in [0, 1]");
  }
  for (int h = 0; h < horizon_; ++h) {
    for (int s = 0; s < num_states_; ++s) {
      for (int a = 0; a < num_actions_; ++a) {
        check_distribution(next_state_probs(h, s, a), "transition row");
      }
    }
  }
  check_distribution(initial_dist_, "initial distribution");
}

void validate_policy(const TabularMdp& mdp, const DeterministicPolicy& policy) {
  require(policy.num_states() == mdp.num_states() && policy.horizon() == mdp.horizon(),
          "policy shape does not match the MDP");
  for (int a : policy.actions()) {
    require(a >= 0 && a < mdp.num_actions(), "policy action out of range");
  }
}

TabularMdp generate_random_mdp(int num_states, int num_actions, int horizon,
                               std::uint64_t seed) {
  require(num_states >= 1 && num_actions >= 1 && horizon >= 1,
          "MDP dimensions must be positive");
  RandomStream rng(mix_seed(seed, 0x6d6470));
  const std::size_t triples =
      static_cast<std::size_t>(horizon) * num_states * num_actions;

  std::vector<double> reward(triples);
  for (double& r : reward) r = rng.uniform();

  std::vector<double> transition(triples * num_states);
  for (std::size_t row = 0; row < triples; ++row) {
    double* p = transition.data() + row * num_states;
    double total = 0.0;
    for (int i = 0; i < num_states; ++i) {
      p[i] = -std::log1p(-rng.uniform());
      total += p[i];
    }
    if (total > 0.0) {
      for (int i = 0; i < num_states; ++i) p[i] /= total;
    } else {
      std::fill(p, p + num_states, 1.0 / num_states);
    }
  }

  std::vector<double> initial(num_states, 1.0 / num_states);
  return TabularMdp(num_states, num_actions, horizon, std::move(reward),
                    std::move(transition), std::move(initial));
}

MdpSampler::MdpSampler(const TabularMdp& mdp)
    : num_states_(mdp.num_states()), num_actions_(mdp.num_actions()) {
  cdf_.reserve(mdp.transition_table().size());
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (int s = 0; s < num_states_; ++s) {
      for (int a = 0; a < num_actions_; ++a) append_cdf(mdp.next_state_probs(h, s, a), cdf_);
    }
  }
  append_cdf(mdp.initial_dist(), initial_cdf_);
}

int MdpSampler::pick(const double* cdf, double u) const {
  if (num_states_ <= 16) {
    int i = 0;
    while (cdf[i] <= u) ++i;
    return i;
  }
  return static_cast<int>(std::upper_bound(cdf, cdf + num_states_, u) - cdf);
}

std::string mdp_to_json(const TabularMdp& mdp) {
  nlohmann::ordered_json j;
  j["format"] = "fedq-mdp";
  j["version"] = 1;
  j["S"] = mdp.num_states();
  j["A"] = mdp.num_actions();
  j["H"] = mdp.horizon();
  j["reward"] = mdp.reward_table();
  j["transition"] = mdp.transition_table();
  j["initial_dist"] = std::vector<double>(mdp.initial_dist().begin(), mdp.initial_dist().end());
  return j.dump(1) + "\n";
}

TabularMdp mdp_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "fedq-mdp") {
      fail(ErrorKind::Parse, "not an MDP file");
    }
    return TabularMdp(j.at("S").get<int>(), j.at("A").get<int>(), j.at("H").get<int>(),
                      j.at("reward").get<std::vector<double>>(),
                      j.at("transition").get<std::vector<double>>(),
                      j.at("initial_dist").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed MDP file: ") + e.what());
  }
}

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << mdp_to_json(mdp);
}

TabularMdp load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return mdp_from_json(buffer.str());
}

}  // namespace fedq
