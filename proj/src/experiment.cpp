#include "fedq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fedq/error.hpp"
#include "fedq/rng.hpp"
#include "fedq/runtime.hpp"
#include "fedq/solver.hpp"
#include "fedq/ucb.hpp"

namespace fedq {
namespace {

using ordered_json = nlohmann::ordered_json;

const std::pair<ExperimentKind, const char*> kKindNames[] = {
    {ExperimentKind::RegretCurve, "regret_curve"}, {ExperimentKind::Speedup, "speedup"},
    {ExperimentKind::CommVsM, "comm_vs_M"},        {ExperimentKind::CommVsS, "comm_vs_S"},
    {ExperimentKind::CommVsA, "comm_vs_A"},        {ExperimentKind::SingleRun, "single_run"},
};

bool is_comm_study(ExperimentKind k) {
  return k == ExperimentKind::CommVsM || k == ExperimentKind::CommVsS ||
         k == ExperimentKind::CommVsA;
}

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  fail(ErrorKind::InvalidConfig, "config field '" + field + "': " + what);
}

// Config as recorded in artifacts. Output location and thread count do not
// affect results and are left out so outputs compare byte-for-byte.
ordered_json artifact_config(ExperimentConfig config) {
  config.output_dir.clear();
  config.threads = 0;
  return ordered_json::parse(config_to_json(config));
}

std::string file_header(const ExperimentConfig& config) {
  return std::string("# ") + kArtifactVersion + "\n# config " + artifact_config(config).dump() +
         "\n";
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << body;
}

/// Runs jobs [0, n) on a fixed worker pool; results are stored by job index so
/// the outcome never depends on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::min<std::size_t>(
      n, threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<std::pair<std::int64_t, double>> median_rounds(std::span<const RunMetrics> runs) {
  std::vector<std::pair<std::int64_t, double>> out;
  if (runs.empty()) return out;
  for (std::size_t i = 0; i < runs.front().curve.size(); ++i) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(static_cast<double>(r.curve[i].rounds));
    out.emplace_back(runs.front().curve[i].episodes, quantile(v, 0.5));
  }
  return out;
}

ordered_json run_summary(const RunMetrics& m) {
  ordered_json j;
  j["regret"] = m.regret;
  j["rounds"] = m.rounds;
  j["comm_scalars"] = m.comm_scalars;
  j["abort_scalars"] = m.abort_scalars;
  j["switching_cost"] = m.switching_cost;
  j["suboptimal_visits"] = m.suboptimal_visits;
  j["episodes_total"] = m.episodes_total;
  j["steps_total"] = m.steps_total;
  j["optimism_fraction"] = m.optimism_fraction();
  j["invariant_checks"] = m.invariants.checks;
  j["invariant_violations"] = m.invariants.violations;
  return j;
}

ordered_json bands_json(const std::vector<Band>& bands) {
  ordered_json arr = ordered_json::array();
  for (const auto& b : bands) {
    arr.push_back({{"episode", b.episodes}, {"p10", b.p10}, {"median", b.median},
                   {"p90", b.p90}});
  }
  return arr;
}

std::string bands_csv(const ExperimentConfig& config, const std::vector<Band>& bands) {
  std::ostringstream out;
  out << file_header(config) << "episode,p10,median,p90\n";
  for (const auto& b : bands) {
    out << b.episodes << ',' << format_double(b.p10) << ',' << format_double(b.median) << ','
        << format_double(b.p90) << '\n';
  }
  return out.str();
}

TabularMdp experiment_mdp(const ExperimentConfig& c, int states, int actions) {
  if (!c.mdp_file.empty()) return load_mdp(c.mdp_file);
  std::uint64_t seed = c.mdp_seed;
  if (c.min_gap_filter > 0.0) {
    seed = select_mdp_seed(states, actions, c.horizon, c.mdp_seed, c.min_gap_filter);
  }
  return generate_random_mdp(states, actions, c.horizon, seed);
}

}  // namespace

std::string experiment_kind_name(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (const auto& [k, n] : kKindNames) {
    if (name == n) return k;
  }
  config_error("kind", "unknown experiment kind '" + name + "'");
}

void validate(const ExperimentConfig& c) {
  if (c.num_states < 1) config_error("num_states", "must be >= 1");
  if (c.num_actions < 1) config_error("num_actions", "must be >= 1");
  if (c.horizon < 1) config_error("horizon", "must be >= 1");
  if (c.num_agents < 1) config_error("num_agents", "must be >= 1");
  if (c.episodes_per_agent < 1) config_error("episodes_per_agent", "must be >= 1");
  if (c.replications < 1) config_error("replications", "must be >= 1");
  if (!(c.bonus_scale > 0.0)) config_error("bonus_scale", "must be positive");
  if (!(c.bernstein_scale > 0.0)) config_error("bernstein_scale", "must be positive");
  if (!(c.log_factor > 0.0)) config_error("log_factor", "must be positive");
  if (c.burn_in < 0) config_error("burn_in", "must be >= 0");
  if (!(c.checkpoint_ratio > 1.0)) config_error("checkpoint_ratio", "must exceed 1");
  if (!(c.min_gap_filter >= 0.0)) config_error("min_gap_filter", "must be >= 0");
  if (c.threads < 0) config_error("threads", "must be >= 0");
  if (is_comm_study(c.kind)) {
    if (c.sweep.empty()) config_error("sweep", "must be nonempty for communication studies");
    for (int v : c.sweep) {
      if (v < 1) config_error("sweep", "values must be >= 1");
    }
    if (c.kind != ExperimentKind::CommVsM && !c.mdp_file.empty()) {
      config_error("mdp_file", "S and A sweeps generate their own MDPs");
    }
  }
  if (!c.mdp_file.empty() && c.min_gap_filter > 0.0) {
    config_error("min_gap_filter", "applies only to generated MDPs");
  }
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["kind"] = experiment_kind_name(c.kind);
  j["num_states"] = c.num_states;
  j["num_actions"] = c.num_actions;
  j["horizon"] = c.horizon;
  j["mdp_seed"] = c.mdp_seed;
  j["mdp_file"] = c.mdp_file;
  j["min_gap_filter"] = c.min_gap_filter;
  j["variant"] = variant_name(c.variant);
  j["num_agents"] = c.num_agents;
  j["sweep"] = c.sweep;
  j["episodes_per_agent"] = c.episodes_per_agent;
  j["replications"] = c.replications;
  j["master_seed"] = c.master_seed;
  j["bonus_scale"] = c.bonus_scale;
  j["bernstein_scale"] = c.bernstein_scale;
  j["log_factor"] = c.log_factor;
  j["burn_in"] = c.burn_in;
  j["checkpoint_ratio"] = c.checkpoint_ratio;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::InvalidConfig, "config must be a JSON object");
  ExperimentConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    try {
      if (key == "kind") c.kind = parse_experiment_kind(v.get<std::string>());
      else if (key == "num_states") c.num_states = v.get<int>();
      else if (key == "num_actions") c.num_actions = v.get<int>();
      else if (key == "horizon") c.horizon = v.get<int>();
      else if (key == "mdp_seed") c.mdp_seed = v.get<std::uint64_t>();
      else if (key == "mdp_file") c.mdp_file = v.get<std::string>();
      else if (key == "min_gap_filter") c.min_gap_filter = v.get<double>();
      else if (key == "variant") c.variant = parse_variant(v.get<std::string>());
      else if (key == "num_agents") c.num_agents = v.get<int>();
      else if (key == "sweep") c.sweep = v.get<std::vector<int>>();
      else if (key == "episodes_per_agent") c.episodes_per_agent = v.get<std::int64_t>();
      else if (key == "replications") c.replications = v.get<int>();
      else if (key == "master_seed") c.master_seed = v.get<std::uint64_t>();
      else if (key == "bonus_scale") c.bonus_scale = v.get<double>();
      else if (key == "bernstein_scale") c.bernstein_scale = v.get<double>();
      else if (key == "log_factor") c.log_factor = v.get<double>();
      else if (key == "burn_in") c.burn_in = v.get<std::int64_t>();
      else if (key == "checkpoint_ratio") c.checkpoint_ratio = v.get<double>();
      else if (key == "output_dir") c.output_dir = v.get<std::string>();
      else if (key == "threads") c.threads = v.get<int>();
      else config_error(key, "unknown field");
    } catch (const nlohmann::json::exception&) {
      config_error(key, "has the wrong type");
    }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

std::uint64_t select_mdp_seed(int num_states, int num_actions, int horizon, std::uint64_t start,
                              double min_gap, int max_tries) {
  for (int i = 0; i < max_tries; ++i) {
    const std::uint64_t seed = start + static_cast<std::uint64_t>(i);
    const TabularMdp mdp = generate_random_mdp(num_states, num_actions, horizon, seed);
    try {
      const MdpSolution sol = solve_optimal(mdp);
      if (sol.is_gmdp && sol.min_gap >= min_gap) return seed;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateMdp) throw;
    }
  }
  fail(ErrorKind::InvalidConfig, "no generated MDP meets the minimum gap filter");
}

std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t value, std::uint64_t rep) {
  return mix_seed(master_seed, value, rep);
}

SlopeFit fit_comm_slope(std::span<const std::pair<std::int64_t, double>> rounds_vs_episodes,
                        std::int64_t burn_in) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [episodes, rounds] : rounds_vs_episodes) {
    if (episodes >= burn_in && episodes >= 1) {
      xs.push_back(std::log(static_cast<double>(episodes)));
      ys.push_back(rounds);
    }
  }
  if (xs.size() < 2) {
    fail(ErrorKind::InsufficientPoints, "slope fit needs at least two points after burn-in");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) fail(ErrorKind::InsufficientPoints, "slope fit needs distinct episode counts");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points = static_cast<std::int64_t>(xs.size());
  // A flat response is explained perfectly by a zero slope.
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return fit;
}

double regret_log_plateau(std::span<const std::pair<std::int64_t, double>> regret_curve,
                          double tail_fraction) {
  require(regret_curve.size() >= 10, "plateau statistic needs at least 10 checkpoints");
  require(tail_fraction > 0.0 && tail_fraction <= 1.0, "tail fraction must be in (0, 1]");
  const std::size_t n = regret_curve.size();
  const auto tail = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
  auto y = [&](std::size_t i) {
    return regret_curve[i].second / std::log(static_cast<double>(regret_curve[i].first) + 1.0);
  };
  const double end = y(n - 1);
  double drift = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) {
    const double diff = std::abs(y(i) - end);
    if (end == 0.0) {
      if (diff > 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    drift = std::max(drift, diff / std::abs(end));
  }
  return drift;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of an empty sample");
  require(q >= 0.0 && q <= 1.0, "quantile level must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<Band> regret_bands(std::span<const RunMetrics> runs) {
  std::vector<Band> out;
  if (runs.empty()) return out;
  const std::size_t n = runs.front().curve.size();
  for (const auto& r : runs) {
    require(r.curve.size() == n, "runs have different checkpoint grids");
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.curve[i].regret);
    out.push_back({runs.front().curve[i].episodes, quantile(v, 0.1), quantile(v, 0.5),
                   quantile(v, 0.9)});
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  ExperimentResult result;
  result.config = config;
  const std::vector<std::int64_t> checkpoints =
      geometric_checkpoints(config.episodes_per_agent, config.checkpoint_ratio);

  auto fedq_config = [&](const TabularMdp& mdp, int agents, std::uint64_t seed) {
    FedqConfig fc;
    fc.variant = config.variant;
    fc.num_agents = agents;
    fc.total_steps = config.episodes_per_agent * agents * mdp.horizon();
    fc.bonus_scale = config.bonus_scale;
    fc.bernstein_scale = config.bernstein_scale;
    fc.log_factor = config.log_factor;
    fc.seed = seed;
    return fc;
  };
  RunOptions run_options;
  run_options.checkpoints = checkpoints;

  // Job list: one entry per (sweep value, replication, algorithm).
  struct Job {
    int value;
    int rep;
    bool ucb;
    std::size_t sweep_index;
  };
  std::vector<Job> jobs;
  std::vector<int> values;
  if (is_comm_study(config.kind)) {
    values = config.sweep;
  } else {
    values = {config.num_agents};
  }
  const int reps = config.kind == ExperimentKind::SingleRun ? 1 : config.replications;
  for (std::size_t v = 0; v < values.size(); ++v) {
    for (int r = 0; r < reps; ++r) jobs.push_back({values[v], r, false, v});
  }
  if (config.kind == ExperimentKind::Speedup) {
    for (int r = 0; r < reps; ++r) jobs.push_back({1, r, true, 0});
  }

  // MDPs are built up front so every replication of a value shares one instance.
  std::vector<TabularMdp> mdps;
  for (int v : values) {
    const int states = config.kind == ExperimentKind::CommVsS ? v : config.num_states;
    const int actions = config.kind == ExperimentKind::CommVsA ? v : config.num_actions;
    mdps.push_back(experiment_mdp(config, states, actions));
  }

  std::vector<RunMetrics> outputs(jobs.size());
  parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    const TabularMdp& mdp = mdps[job.sweep_index];
    const std::uint64_t seed =
        run_seed(config.master_seed, static_cast<std::uint64_t>(job.value), job.rep);
    if (job.ucb) {
      UcbOptions uo;
      uo.checkpoints = checkpoints;
      outputs[i] = run_ucb_hoeffding(
          mdp, config.episodes_per_agent,
          {mdp.horizon(), config.bonus_scale, config.log_factor}, seed, uo);
    } else {
      const int agents = config.kind == ExperimentKind::CommVsM ? job.value : config.num_agents;
      outputs[i] = run_fedq(mdp, fedq_config(mdp, agents, seed), run_options).metrics;
    }
  });

  std::vector<std::vector<RunMetrics>> by_value(values.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (jobs[i].ucb) {
      result.ucb_runs.push_back(std::move(outputs[i]));
    } else {
      by_value[jobs[i].sweep_index].push_back(std::move(outputs[i]));
    }
  }

  ordered_json summary;
  summary["version"] = kArtifactVersion;
  summary["config"] = artifact_config(config);
  summary["checkpoints"] = checkpoints;

  if (is_comm_study(config.kind)) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    ordered_json fits = ordered_json::array();
    for (std::size_t v = 0; v < values.size(); ++v) {
      SweepResult sweep;
      sweep.value = values[v];
      sweep.median_rounds = median_rounds(by_value[v]);
      sweep.fit = fit_comm_slope(sweep.median_rounds, config.burn_in);
      sweep.runs = std::move(by_value[v]);
      lo = std::min(lo, sweep.fit.slope);
      hi = std::max(hi, sweep.fit.slope);
      ordered_json runs = ordered_json::array();
      for (const auto& r : sweep.runs) runs.push_back(run_summary(r));
      fits.push_back({{"value", sweep.value},
                      {"slope", sweep.fit.slope},
                      {"intercept", sweep.fit.intercept},
                      {"r_squared", sweep.fit.r_squared},
                      {"points", sweep.fit.points},
                      {"runs", runs}});
      result.sweeps.push_back(std::move(sweep));
    }
    result.slope_ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    summary["slope_fits"] = fits;
    summary["slope_ratio"] = result.slope_ratio;
  } else {
    result.fedq_runs = std::move(by_value[0]);
    result.fedq_regret = regret_bands(result.fedq_runs);
    std::vector<std::pair<std::int64_t, double>> median_curve;
    for (const auto& b : result.fedq_regret) median_curve.emplace_back(b.episodes, b.median);
    result.regret_drift = median_curve.size() >= 10 ? regret_log_plateau(median_curve, 0.5)
                                                    : std::numeric_limits<double>::quiet_NaN();
    summary["fedq_regret"] = bands_json(result.fedq_regret);
    if (std::isfinite(result.regret_drift)) {
      summary["regret_log_drift"] = result.regret_drift;
    } else {
      summary["regret_log_drift"] = nullptr;
    }
    ordered_json runs = ordered_json::array();
    for (const auto& r : result.fedq_runs) runs.push_back(run_summary(r));
    summary["fedq_runs"] = runs;
    if (config.kind == ExperimentKind::Speedup) {
      result.ucb_regret = regret_bands(result.ucb_runs);
      summary["ucb_regret"] = bands_json(result.ucb_regret);
      ordered_json ucb = ordered_json::array();
      for (const auto& r : result.ucb_runs) ucb.push_back(run_summary(r));
      summary["ucb_runs"] = ucb;
      const double fedq_final = result.fedq_regret.back().median;
      const double ucb_final = result.ucb_regret.back().median;
      summary["final_fedq_median"] = fedq_final;
      summary["final_fedq_scaled_median"] = fedq_final / std::sqrt(double(config.num_agents));
      summary["final_ucb_median"] = ucb_final;
    }
    try {
      const MdpSolution sol = solve_optimal(mdps[0]);
      summary["min_gap"] = sol.min_gap;
      summary["is_gmdp"] = sol.is_gmdp;
      summary["c_st"] = sol.c_st;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateMdp) throw;
      summary["min_gap"] = 0.0;
    }
  }
  result.summary_json = summary.dump(2) + "\n";

  if (config.output_dir.empty()) return result;

  namespace fs = std::filesystem;
  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir / "runs");
  const std::string header = file_header(config);
  auto write_run = [&](const std::string& tag, const RunMetrics& m, bool with_diagnostics) {
    std::ostringstream regret;
    regret << header;
    write_regret_csv(regret, m);
    write_file(out_dir / "runs" / (tag + "_regret.csv"), regret.str());
    std::ostringstream comm;
    comm << header;
    write_communication_csv(comm, m);
    write_file(out_dir / "runs" / (tag + "_communication.csv"), comm.str());
    if (with_diagnostics) {
      std::ostringstream diag;
      diag << header;
      write_diagnostics_csv(diag, m);
      write_file(out_dir / "runs" / (tag + "_diagnostics.csv"), diag.str());
    }
  };

  if (is_comm_study(config.kind)) {
    const std::string axis = config.kind == ExperimentKind::CommVsM   ? "M"
                             : config.kind == ExperimentKind::CommVsS ? "S"
                                                                      : "A";
    std::ostringstream slopes;
    slopes << header << "value,slope,intercept,r_squared,points\n";
    std::ostringstream curves;
    curves << header << "value,episode,median_rounds\n";
    for (const auto& sweep : result.sweeps) {
      slopes << sweep.value << ',' << format_double(sweep.fit.slope) << ','
             << format_double(sweep.fit.intercept) << ',' << format_double(sweep.fit.r_squared)
             << ',' << sweep.fit.points << '\n';
      for (const auto& [ep, rounds] : sweep.median_rounds) {
        curves << sweep.value << ',' << ep << ',' << format_double(rounds) << '\n';
      }
      for (std::size_t r = 0; r < sweep.runs.size(); ++r) {
        write_run(axis + std::to_string(sweep.value) + "_rep" + std::to_string(r),
                  sweep.runs[r], false);
      }
    }
    write_file(out_dir / "slopes.csv", slopes.str());
    write_file(out_dir / "comm_summary.csv", curves.str());
  } else {
    for (std::size_t r = 0; r < result.fedq_runs.size(); ++r) {
      write_run("fedq_rep" + std::to_string(r), result.fedq_runs[r], true);
    }
    for (std::size_t r = 0; r < result.ucb_runs.size(); ++r) {
      write_run("ucb_rep" + std::to_string(r), result.ucb_runs[r], false);
    }
    write_file(out_dir / "regret_summary.csv", bands_csv(config, result.fedq_regret));
    if (config.kind == ExperimentKind::Speedup) {
      write_file(out_dir / "ucb_regret_summary.csv", bands_csv(config, result.ucb_regret));
    }
  }
  write_file(out_dir / "summary.json", result.summary_json);
  return result;
}

}  // namespace fedq
