// Command-line front end: `train` runs learning trials and writes curves
// and a summary, `bench` micro-times the per-operation costs, `oracle` runs
// the self-check battery against the reference implementations.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "oselmq/errors.hpp"
#include "oselmq/harness.hpp"
#include "oselmq/oracle.hpp"

namespace {

using oselmq::ConfigError;

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an unsigned integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: " + key + " expects true/false, got '" + v + "'");
}

std::vector<double> to_scale(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = v.find(',', start);
    const std::string part =
        v.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    out.push_back(to_double(key, part));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Everything `train` can configure, with the canonical defaults.
struct TrainSettings {
  std::string algo = "oselm-l2-lipschitz";
  std::size_t hidden = 64;
  std::uint64_t seed = 1;
  std::size_t trials = 1;
  std::size_t max_episodes = 3000;
  double delta = 0.5;
  bool delta_set = false;
  double eps1 = 0.7;
  double eps2 = 0.5;
  double gamma = 0.99;
  std::size_t update_step = 2;
  double terminal_reward = -1.0;
  bool raw_terminal_reward = false;  // store failures with the env reward
  double live_reward = 0.0;
  bool raw_live_reward = false;  // store non-failures with the env reward
  bool store_terminal = true;
  std::string input_scale;  // comma list; empty = per-algorithm default
  std::size_t reset_after = 300;
  double solve_threshold = 195.0;
  std::size_t workers = 1;
  std::string out;

  void apply(const std::string& key, const std::string& value) {
    if (key == "algo") algo = value;
    else if (key == "hidden") hidden = to_u64(key, value);
    else if (key == "seed") seed = to_u64(key, value);
    else if (key == "trials") trials = to_u64(key, value);
    else if (key == "max_episodes") max_episodes = to_u64(key, value);
    else if (key == "delta") { delta = to_double(key, value); delta_set = true; }
    else if (key == "eps1") eps1 = to_double(key, value);
    else if (key == "eps2") eps2 = to_double(key, value);
    else if (key == "gamma") gamma = to_double(key, value);
    else if (key == "update_step") update_step = to_u64(key, value);
    else if (key == "terminal_reward") {
      if (value == "none") raw_terminal_reward = true;
      else { terminal_reward = to_double(key, value); raw_terminal_reward = false; }
    }
    else if (key == "live_reward") {
      if (value == "none") raw_live_reward = true;
      else { live_reward = to_double(key, value); raw_live_reward = false; }
    }
    else if (key == "store_terminal") store_terminal = to_bool(key, value);
    else if (key == "input_scale") input_scale = value;
    else if (key == "reset_after") reset_after = to_u64(key, value);
    else if (key == "solve_threshold") solve_threshold = to_double(key, value);
    else if (key == "workers") workers = to_u64(key, value);
    else if (key == "out") out = value;
    else throw ConfigError("config: unknown key '" + key + "'");
  }

  oselmq::RunConfig to_run_config() const {
    oselmq::RunConfig rc;
    rc.algo = oselmq::parse_algo(algo);
    rc.agent.n_tilde = hidden;
    rc.agent.seed = seed;
    rc.agent.eps1 = eps1;
    rc.agent.eps2 = eps2;
    rc.agent.gamma = gamma;
    rc.agent.delta = delta;
    rc.agent.update_step = update_step;
    rc.agent.store_terminal = store_terminal;
    if (!raw_terminal_reward) rc.agent.terminal_reward = terminal_reward;
    if (raw_live_reward) rc.agent.live_reward.reset();
    else rc.agent.live_reward = live_reward;
    if (!input_scale.empty()) rc.agent.input_scale = to_scale("input_scale", input_scale);
    rc.max_episodes = max_episodes;
    rc.trials = trials;
    rc.reset_after = reset_after;
    rc.solve_threshold = solve_threshold;
    rc.workers = workers;
    rc.out_dir = out;
    oselmq::apply_algo_defaults(rc, delta_set);
    rc.validate();
    return rc;
  }
};

int cmd_train(const TrainSettings& settings) {
  const oselmq::RunConfig rc = settings.to_run_config();
  const std::vector<oselmq::TrialResult> results = oselmq::run_trials(rc);

  for (const oselmq::TrialResult& r : results) {
    const std::string outcome =
        r.solved() ? "solved at episode " + std::to_string(*r.episodes_to_solve) : "not solved";
    std::fprintf(stderr, "seed %llu: %s, %zu episodes, %zu resets, %.3f ms compute\n",
                 static_cast<unsigned long long>(r.seed), outcome.c_str(),
                 r.episode_steps.size(), r.resets,
                 static_cast<double>(r.train_compute_ns) / 1e6);
  }

  const nlohmann::ordered_json summary = oselmq::summarize(rc, results);
  if (!rc.out_dir.empty()) {
    std::filesystem::create_directories(rc.out_dir);
    for (const oselmq::TrialResult& r : results) {
      const std::string name = oselmq::to_string(rc.algo) + "_h" +
                               std::to_string(rc.agent.n_tilde) + "_seed" +
                               std::to_string(r.seed) + ".csv";
      oselmq::write_learning_curve_csv(r, rc.out_dir / name);
    }
    std::ofstream os(rc.out_dir / "summary.json", std::ios::binary);
    if (!os) throw oselmq::IoError("train: cannot write summary.json");
    os << summary.dump(2) << "\n";
    std::fprintf(stderr, "wrote %zu curve file(s) and summary.json to %s\n", results.size(),
                 rc.out_dir.string().c_str());
  } else {
    std::cout << summary.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online Q-learning toolkit: recursive least-squares agents, "
               "gradient baseline, fixed-point emulation"};
  app.require_subcommand(1);

  TrainSettings ts;
  std::string train_config;
  auto* train = app.add_subcommand("train", "Run learning trials on the balancing task");
  auto* o_algo = train->add_option("--algo", ts.algo,
                                   "oselm | oselm-l2 | oselm-lipschitz | "
                                   "oselm-l2-lipschitz | elm | dqn | fixed");
  auto* o_hidden = train->add_option("--hidden", ts.hidden, "Hidden width");
  auto* o_seed = train->add_option("--seed", ts.seed, "Base seed; trial i uses seed+i");
  auto* o_trials = train->add_option("--trials", ts.trials, "Number of trials");
  auto* o_maxep = train->add_option("--max-episodes", ts.max_episodes, "Episode budget");
  auto* o_delta = train->add_option("--delta", ts.delta, "L2 strength of the initial solve");
  auto* o_eps1 = train->add_option("--eps1", ts.eps1, "Exploitation rate");
  auto* o_eps2 = train->add_option("--eps2", ts.eps2, "Sequential-update rate");
  auto* o_gamma = train->add_option("--gamma", ts.gamma, "Discount factor");
  auto* o_upd = train->add_option("--update-step", ts.update_step,
                                  "Target refresh cadence (episodes)");
  auto* o_term = train->add_option("--terminal-reward", ts.terminal_reward,
                                   "Reward substituted on stored failures");
  auto* o_rawterm = train->add_flag("--raw-terminal-reward", ts.raw_terminal_reward,
                                    "Store failures with the env reward instead");
  auto* o_live = train->add_option("--live-reward", ts.live_reward,
                                   "Reward substituted on stored non-failures");
  auto* o_rawlive = train->add_flag("--raw-live-reward", ts.raw_live_reward,
                                    "Store non-failures with the env reward instead");
  auto* o_storet = train->add_option("--store-terminal", ts.store_terminal,
                                     "Store terminal transitions (true/false)");
  auto* o_scale = train->add_option("--input-scale", ts.input_scale,
                                    "Comma-separated per-dimension observation "
                                    "multipliers (default per algorithm)");
  auto* o_reset = train->add_option("--reset-after", ts.reset_after,
                                    "Episodes without solving before re-init");
  auto* o_thresh = train->add_option("--solve-threshold", ts.solve_threshold,
                                     "Moving-average target");
  auto* o_workers = train->add_option("--workers", ts.workers, "Concurrent trials");
  auto* o_out = train->add_option("--out", ts.out, "Output directory");
  train->add_option("--config", train_config, "key=value file; flags override it");

  std::string bench_algo = "oselm-l2-lipschitz";
  std::size_t bench_hidden = 64;
  std::size_t bench_reps = 2000;
  std::uint64_t bench_seed = 1;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "Micro-time each operation class");
  bench->add_option("--algo", bench_algo, "Algorithm to benchmark");
  bench->add_option("--hidden", bench_hidden, "Hidden width");
  bench->add_option("--reps", bench_reps, "Repetitions per class (min 1000)");
  bench->add_option("--seed", bench_seed, "Seed for synthetic data");
  bench->add_option("--out", bench_out, "JSON output file (stdout when omitted)");

  auto* oracle_cmd = app.add_subcommand("oracle", "Run the reference-check battery");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // malformed invocation is a configuration error
  }

  try {
    if (train->parsed()) {
      // Precedence: defaults, then the config file, then explicit flags.
      TrainSettings merged;
      if (!train_config.empty()) {
        for (const auto& [key, value] : oselmq::read_config_file(train_config)) {
          merged.apply(key, value);
        }
      }
      const auto bind_value = [&](const CLI::Option* opt, const char* key,
                                  const std::string& rendered) {
        if (opt->count() > 0) merged.apply(key, rendered);
      };
      bind_value(o_algo, "algo", ts.algo);
      bind_value(o_hidden, "hidden", std::to_string(ts.hidden));
      bind_value(o_seed, "seed", std::to_string(ts.seed));
      bind_value(o_trials, "trials", std::to_string(ts.trials));
      bind_value(o_maxep, "max_episodes", std::to_string(ts.max_episodes));
      if (o_delta->count() > 0) {
        merged.delta = ts.delta;
        merged.delta_set = true;
      }
      if (o_eps1->count() > 0) merged.eps1 = ts.eps1;
      if (o_eps2->count() > 0) merged.eps2 = ts.eps2;
      if (o_gamma->count() > 0) merged.gamma = ts.gamma;
      bind_value(o_upd, "update_step", std::to_string(ts.update_step));
      if (o_term->count() > 0) {
        merged.terminal_reward = ts.terminal_reward;
        merged.raw_terminal_reward = false;
      }
      if (o_rawterm->count() > 0) merged.raw_terminal_reward = true;
      if (o_live->count() > 0) {
        merged.live_reward = ts.live_reward;
        merged.raw_live_reward = false;
      }
      if (o_rawlive->count() > 0) merged.raw_live_reward = true;
      if (o_storet->count() > 0) merged.store_terminal = ts.store_terminal;
      if (o_scale->count() > 0) merged.input_scale = ts.input_scale;
      bind_value(o_reset, "reset_after", std::to_string(ts.reset_after));
      if (o_thresh->count() > 0) merged.solve_threshold = ts.solve_threshold;
      bind_value(o_workers, "workers", std::to_string(ts.workers));
      if (o_out->count() > 0) merged.out = ts.out;
      return cmd_train(merged);
    }
    if (bench->parsed()) {
      const nlohmann::ordered_json j = oselmq::benchmark_ops(
          oselmq::parse_algo(bench_algo), bench_hidden, bench_reps, bench_seed);
      if (bench_out.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        std::ofstream os(bench_out, std::ios::binary);
        if (!os) throw oselmq::IoError("bench: cannot open " + bench_out);
        os << j.dump(2) << "\n";
        std::printf("wrote %s\n", bench_out.c_str());
      }
      return 0;
    }
    if (oracle_cmd->parsed()) {
      return oselmq::oracle::run_suite(std::cout) == 0 ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
