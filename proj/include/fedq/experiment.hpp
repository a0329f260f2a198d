#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedq/metrics.hpp"
#include "fedq/protocol.hpp"

namespace fedq {

inline constexpr const char* kArtifactVersion = "fedq-sim 1.0.0";

enum class ExperimentKind { RegretCurve, Speedup, CommVsM, CommVsS, CommVsA, SingleRun };

std::string experiment_kind_name(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::SingleRun;
  // MDP: generated from (S, A, H, mdp_seed) unless mdp_file is set.
  int num_states = 2;
  int num_actions = 2;
  int horizon = 2;
  std::uint64_t mdp_seed = 0;
  std::string mdp_file;
  // When positive, each generated instance uses the first seed >= mdp_seed
  // whose MDP is a G-MDP with minimum gap at least this value.
  double min_gap_filter = 0.0;
  Variant variant = Variant::Hoeffding;
  int num_agents = 10;
  std::vector<int> sweep;  // M, S or A values for the communication studies
  std::int64_t episodes_per_agent = 100000;
  int replications = 10;
  std::uint64_t master_seed = 0;
  double bonus_scale = 2.0;
  double bernstein_scale = 2.0;
  double log_factor = 1.0;
  std::int64_t burn_in = 50000;
  double checkpoint_ratio = 1.25;
  std::string output_dir;  // empty: compute only
  int threads = 0;         // 0: hardware concurrency
};

/// Throws InvalidConfig naming the offending field.
void validate(const ExperimentConfig& config);

std::string config_to_json(const ExperimentConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// First seed >= start whose generated (S, A, H) instance is a G-MDP with
/// minimum gap >= min_gap. Gives up with InvalidConfig after max_tries seeds.
std::uint64_t select_mdp_seed(int num_states, int num_actions, int horizon, std::uint64_t start,
                              double min_gap, int max_tries = 100000);

/// Seed of replication `rep` for sweep value `value`; independent of the order
/// in which runs execute.
std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t value, std::uint64_t rep);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::int64_t points = 0;
};

/// Ordinary least squares of rounds on ln(episodes) over points with
/// episodes >= burn_in. Throws InsufficientPoints with fewer than two points.
SlopeFit fit_comm_slope(std::span<const std::pair<std::int64_t, double>> rounds_vs_episodes,
                        std::int64_t burn_in);

/// Relative drift max |y - y_end| / y_end of y = regret / ln(episodes + 1)
/// over the final tail_fraction of checkpoints. Needs at least 10 checkpoints.
double regret_log_plateau(std::span<const std::pair<std::int64_t, double>> regret_curve,
                          double tail_fraction);

/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

struct Band {
  std::int64_t episodes = 0;
  double p10 = 0.0;
  double median = 0.0;
  double p90 = 0.0;
};

struct SweepResult {
  int value = 0;
  std::vector<std::pair<std::int64_t, double>> median_rounds;
  SlopeFit fit;
  std::vector<RunMetrics> runs;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunMetrics> fedq_runs;
  std::vector<RunMetrics> ucb_runs;
  std::vector<Band> fedq_regret;
  std::vector<Band> ucb_regret;
  double regret_drift = 0.0;  // on the median FedQ curve, final half
  std::vector<SweepResult> sweeps;
  double slope_ratio = 0.0;   // max / min fitted slope
  std::string summary_json;
};

/// Runs every (sweep value x replication) and, if output_dir is set, writes
/// per-run CSVs, quantile summaries, slope fits and summary.json.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Quantile bands across runs at their shared checkpoints.
std::vector<Band> regret_bands(std::span<const RunMetrics> runs);

}  // namespace fedq
