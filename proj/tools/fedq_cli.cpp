// Command-line front end: MDP generation, solving, single runs, experiment
// sweeps and slope fitting.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedq/error.hpp"
#include "fedq/experiment.hpp"
#include "fedq/mdp.hpp"
#include "fedq/runtime.hpp"
#include "fedq/solver.hpp"

namespace {

using fedq::ErrorKind;
using nlohmann::ordered_json;

struct ConfigFlags {
  std::string config_file;
  std::string kind;
  std::string variant;
  std::string sweep;
  fedq::ExperimentConfig values;
};

// Registers one flag per config field. Flags given on the command line
// override the config file.
void add_config_flags(CLI::App* app, ConfigFlags& f) {
  auto& c = f.values;
  app->add_option("--config", f.config_file, "JSON config file");
  app->add_option("--kind", f.kind,
                  "regret_curve | speedup | comm_vs_M | comm_vs_S | comm_vs_A | single_run");
  app->add_option("--states", c.num_states, "number of states S");
  app->add_option("--actions", c.num_actions, "number of actions A");
  app->add_option("--horizon", c.horizon, "episode length H");
  app->add_option("--mdp-seed", c.mdp_seed, "seed of the generated MDP");
  app->add_option("--mdp", c.mdp_file, "load the MDP from a file instead");
  app->add_option("--min-gap-filter", c.min_gap_filter,
                  "use the first seed from --mdp-seed whose MDP has at least this gap");
  app->add_option("--variant", f.variant, "hoeffding | bernstein");
  app->add_option("--agents", c.num_agents, "number of agents M");
  app->add_option("--sweep", f.sweep, "comma-separated M, S or A values");
  app->add_option("--episodes", c.episodes_per_agent, "episodes per agent");
  app->add_option("--replications", c.replications, "runs per configuration");
  app->add_option("--seed", c.master_seed, "master seed");
  app->add_option("--bonus-scale", c.bonus_scale, "Hoeffding bonus constant c");
  app->add_option("--bernstein-scale", c.bernstein_scale, "Bernstein bonus constant c'");
  app->add_option("--log-factor", c.log_factor, "log factor iota");
  app->add_option("--burn-in", c.burn_in, "first episode count used in slope fits");
  app->add_option("--checkpoint-ratio", c.checkpoint_ratio, "geometric checkpoint ratio");
  app->add_option("--out", c.output_dir, "output directory");
  app->add_option("--threads", c.threads, "worker threads, 0 for all cores");
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fedq::fail(ErrorKind::InvalidConfig, "config field 'sweep': bad value '" + item + "'");
    }
  }
  return out;
}

fedq::ExperimentConfig resolve_config(CLI::App* app, const ConfigFlags& f) {
  fedq::ExperimentConfig c = f.config_file.empty() ? fedq::ExperimentConfig{}
                                                   : fedq::load_config(f.config_file);
  const auto& v = f.values;
  auto given = [&](const char* name) { return app->count(name) > 0; };
  if (given("--kind")) c.kind = fedq::parse_experiment_kind(f.kind);
  if (given("--states")) c.num_states = v.num_states;
  if (given("--actions")) c.num_actions = v.num_actions;
  if (given("--horizon")) c.horizon = v.horizon;
  if (given("--mdp-seed")) c.mdp_seed = v.mdp_seed;
  if (given("--mdp")) c.mdp_file = v.mdp_file;
  if (given("--min-gap-filter")) c.min_gap_filter = v.min_gap_filter;
  if (given("--variant")) c.variant = fedq::parse_variant(f.variant);
  if (given("--agents")) c.num_agents = v.num_agents;
  if (given("--sweep")) c.sweep = parse_int_list(f.sweep);
  if (given("--episodes")) c.episodes_per_agent = v.episodes_per_agent;
  if (given("--replications")) c.replications = v.replications;
  if (given("--seed")) c.master_seed = v.master_seed;
  if (given("--bonus-scale")) c.bonus_scale = v.bonus_scale;
  if (given("--bernstein-scale")) c.bernstein_scale = v.bernstein_scale;
  if (given("--log-factor")) c.log_factor = v.log_factor;
  if (given("--burn-in")) c.burn_in = v.burn_in;
  if (given("--checkpoint-ratio")) c.checkpoint_ratio = v.checkpoint_ratio;
  if (given("--out")) c.output_dir = v.output_dir;
  if (given("--threads")) c.threads = v.threads;
  fedq::validate(c);
  return c;
}

fedq::TabularMdp config_mdp(const fedq::ExperimentConfig& c) {
  if (!c.mdp_file.empty()) return fedq::load_mdp(c.mdp_file);
  std::uint64_t seed = c.mdp_seed;
  if (c.min_gap_filter > 0.0) {
    seed = fedq::select_mdp_seed(c.num_states, c.num_actions, c.horizon, seed, c.min_gap_filter);
  }
  return fedq::generate_random_mdp(c.num_states, c.num_actions, c.horizon, seed);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fedq::fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

int cmd_gen_mdp(int states, int actions, int horizon, std::uint64_t seed,
                const std::string& out) {
  const fedq::TabularMdp mdp = fedq::generate_random_mdp(states, actions, horizon, seed);
  if (out.empty()) {
    std::cout << fedq::mdp_to_json(mdp);
  } else {
    const std::filesystem::path parent = std::filesystem::path(out).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    fedq::save_mdp(mdp, out);
  }
  return 0;
}

int cmd_solve(const fedq::ExperimentConfig& c) {
  const fedq::TabularMdp mdp = config_mdp(c);
  const fedq::MdpSolution sol = fedq::solve_optimal(mdp);
  ordered_json j;
  j["S"] = mdp.num_states();
  j["A"] = mdp.num_actions();
  j["H"] = mdp.horizon();
  j["min_gap"] = sol.min_gap;
  j["is_gmdp"] = sol.is_gmdp;
  j["c_st"] = sol.c_st;
  ordered_json v = ordered_json::array();
  ordered_json pi = ordered_json::array();
  ordered_json p = ordered_json::array();
  for (int h = 0; h < mdp.horizon(); ++h) {
    ordered_json vr = ordered_json::array();
    ordered_json pr = ordered_json::array();
    ordered_json dr = ordered_json::array();
    for (int s = 0; s < mdp.num_states(); ++s) {
      vr.push_back(sol.v_star(h, s));
      pr.push_back(sol.canonical_policy(h, s));
      dr.push_back(sol.visit_prob_star(h, s));
    }
    v.push_back(vr);
    pi.push_back(pr);
    p.push_back(dr);
  }
  j["v_star"] = v;
  j["optimal_policy"] = pi;
  j["visit_prob_star"] = p;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_run(const fedq::ExperimentConfig& c, const std::string& transcript_path,
            const std::string& state_path) {
  const fedq::TabularMdp mdp = config_mdp(c);
  fedq::FedqConfig fc;
  fc.variant = c.variant;
  fc.num_agents = c.num_agents;
  fc.total_steps = c.episodes_per_agent * c.num_agents * mdp.horizon();
  fc.bonus_scale = c.bonus_scale;
  fc.bernstein_scale = c.bernstein_scale;
  fc.log_factor = c.log_factor;
  fc.seed = fedq::run_seed(c.master_seed, static_cast<std::uint64_t>(c.num_agents), 0);
  fedq::RunOptions opts;
  opts.checkpoints = fedq::geometric_checkpoints(c.episodes_per_agent, c.checkpoint_ratio);
  opts.record_transcripts = !transcript_path.empty();
  const fedq::FedqRun run = fedq::run_fedq(mdp, fc, opts);

  if (!c.output_dir.empty()) {
    const std::filesystem::path dir(c.output_dir);
    std::filesystem::create_directories(dir);
    std::ostringstream regret;
    fedq::write_regret_csv(regret, run.metrics);
    write_text(dir / "regret.csv", regret.str());
    std::ostringstream comm;
    fedq::write_communication_csv(comm, run.metrics);
    write_text(dir / "communication.csv", comm.str());
    std::ostringstream diag;
    fedq::write_diagnostics_csv(diag, run.metrics);
    write_text(dir / "diagnostics.csv", diag.str());
  }
  if (!transcript_path.empty()) {
    std::ofstream out(transcript_path);
    if (!out) fedq::fail(ErrorKind::Io, "cannot write " + transcript_path);
    fedq::write_transcript(out, run.transcripts);
  }
  if (!state_path.empty()) write_text(state_path, fedq::server_state_to_json(run.final_state));

  const auto& m = run.metrics;
  ordered_json j;
  j["regret"] = m.regret;
  j["rounds"] = m.rounds;
  j["comm_scalars"] = m.comm_scalars;
  j["abort_scalars"] = m.abort_scalars;
  j["switching_cost"] = m.switching_cost;
  j["suboptimal_visits"] = m.suboptimal_visits;
  j["episodes_total"] = m.episodes_total;
  j["optimism_fraction"] = m.optimism_fraction();
  j["invariant_violations"] = m.invariants.violations;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_experiment(const fedq::ExperimentConfig& c) {
  const fedq::ExperimentResult result = fedq::run_experiment(c);
  std::cout << result.summary_json;
  return 0;
}

// Reads "episode,rounds" rows (extra columns and '#' lines are ignored). A
// non-numeric first row is taken as the column header.
int cmd_fit_slope(const std::string& input, std::int64_t burn_in) {
  std::ifstream in(input);
  if (!in) fedq::fail(ErrorKind::Io, "cannot read " + input);
  std::vector<std::pair<std::int64_t, double>> points;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (!std::isdigit(static_cast<unsigned char>(line[0]))) continue;
    }
    std::stringstream row(line);
    std::string episode;
    std::string rounds;
    if (!std::getline(row, episode, ',') || !std::getline(row, rounds, ',')) {
      fedq::fail(ErrorKind::Parse, "malformed row: " + line);
    }
    try {
      points.emplace_back(std::stoll(episode), std::stod(rounds));
    } catch (const std::exception&) {
      fedq::fail(ErrorKind::Parse, "malformed row: " + line);
    }
  }
  const fedq::SlopeFit fit = fedq::fit_comm_slope(points, burn_in);
  ordered_json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r_squared"] = fit.r_squared;
  j["points"] = fit.points;
  std::cout << j.dump(2) << "\n";
  return 0;
}

void report_error(const std::string& kind, const std::string& message) {
  ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated Q-learning simulator"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-mdp", "generate a random MDP as JSON");
  int gen_states = 2;
  int gen_actions = 2;
  int gen_horizon = 2;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--states", gen_states, "number of states S");
  gen->add_option("--actions", gen_actions, "number of actions A");
  gen->add_option("--horizon", gen_horizon, "episode length H");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output file, stdout if omitted");

  auto* solve = app.add_subcommand("solve", "optimal values, gaps and G-MDP status");
  ConfigFlags solve_flags;
  add_config_flags(solve, solve_flags);

  auto* run = app.add_subcommand("run", "one FedQ run with per-run CSVs");
  ConfigFlags run_flags;
  std::string transcript_path;
  std::string state_path;
  add_config_flags(run, run_flags);
  run->add_option("--transcript", transcript_path, "write the step transcript");
  run->add_option("--save-state", state_path, "write the final server state");

  auto* experiment = app.add_subcommand("experiment", "replicated runs and sweeps");
  ConfigFlags exp_flags;
  add_config_flags(experiment, exp_flags);

  auto* fit = app.add_subcommand("fit-slope", "fit rounds against ln(episodes)");
  std::string fit_input;
  std::int64_t fit_burn_in = 50000;
  fit->add_option("--input", fit_input, "CSV with episode,rounds columns")->required();
  fit->add_option("--burn-in", fit_burn_in, "first episode count used");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("Usage", e.what());
    return 2;
  }

  try {
    if (*gen) return cmd_gen_mdp(gen_states, gen_actions, gen_horizon, gen_seed, gen_out);
    if (*solve) return cmd_solve(resolve_config(solve, solve_flags));
    if (*run) return cmd_run(resolve_config(run, run_flags), transcript_path, state_path);
    if (*experiment) return cmd_experiment(resolve_config(experiment, exp_flags));
    if (*fit) return cmd_fit_slope(fit_input, fit_burn_in);
  } catch (const fedq::Error& e) {
    report_error(std::string(fedq::error_kind_name(e.kind())), e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("Internal", e.what());
    return 1;
  }
  return 0;
}
