#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oselmq/agent.hpp"
#include "oselmq/timing.hpp"

namespace oselmq {

/// Trainable agent families the harness can run.
enum class Algo {
  oselm,               // online-sequential learner, no extras
  oselm_l2,            // + L2-regularized initial solve
  oselm_lipschitz,     // + input-weight spectral normalization
  oselm_l2_lipschitz,  // + both
  elm,                 // batch refits from a replay buffer
  dqn,                 // gradient-trained baseline
  fixed,               // oselm_l2_lipschitz on the Q20 fixed-point path
};

Algo parse_algo(const std::string& name);  // throws ConfigError on unknown names
std::string to_string(Algo algo);

/// Full experiment description.  `agent.seed` is the base seed; trial i runs
/// with seed base+i and an environment stream derived from it.
struct RunConfig {
  Algo algo = Algo::oselm_l2_lipschitz;
  AgentConfig agent;
  std::size_t max_episodes = 3000;
  std::size_t trials = 1;
  std::size_t reset_after = 300;     // episodes without solving before re-init
  double solve_threshold = 195.0;    // 100-episode moving average target
  std::size_t workers = 1;           // concurrent trials
  std::filesystem::path out_dir;     // empty: no files written

  void validate() const;
};

/// Applies an algorithm's conventions (regularization flags and default
/// delta) on top of the shared agent settings.  `delta_overridden` tells
/// whether the user chose delta explicitly.
void apply_algo_defaults(RunConfig& cfg, bool delta_overridden);

/// Everything recorded from one trial.
struct TrialResult {
  std::uint64_t seed = 0;
  std::vector<std::size_t> episode_steps;
  std::vector<double> moving_avg;        // over the last min(100, so-far) episodes
  std::vector<std::size_t> resets_after; // resets completed once each episode ended
  std::optional<std::size_t> episodes_to_solve;
  std::size_t resets = 0;
  std::array<OpStat, kOpClassCount> op_stats{};
  std::uint64_t train_compute_ns = 0;    // sum over all op classes
  std::uint64_t overflow_count = 0;      // fixed-point runs only
  double teacher_min = 0.0;              // teachers stay in the clipping range
  double teacher_max = 0.0;

  bool solved() const { return episodes_to_solve.has_value(); }
};

/// Runs one trial of cfg.algo with the given seed.
TrialResult run_trial(const RunConfig& cfg, std::uint64_t seed);

/// Runs cfg.trials trials (seeds base..base+trials-1), up to cfg.workers at
/// a time.  Results come back in seed order regardless of scheduling.
std::vector<TrialResult> run_trials(const RunConfig& cfg);

/// Writes the per-episode learning curve: header
/// `episode,steps,moving_avg_100,resets_so_far`, LF endings, six-decimal
/// averages.  Output is byte-deterministic for a given result.
void write_learning_curve_csv(const TrialResult& result, const std::filesystem::path& path);

/// Summary of a whole run as ordered JSON: configuration echo, per-trial
/// outcomes and timing breakdowns, and aggregates over all trials as well as
/// over solved trials only.
nlohmann::ordered_json summarize(const RunConfig& cfg, const std::vector<TrialResult>& results);

/// Microbenchmark: isolates each operation class of the chosen algorithm on
/// synthetic data of the configured width and reports per-call statistics.
/// DQN additionally reports `train_step_total`, the cost of one whole train
/// step.  At least 1000 repetitions per class.
nlohmann::ordered_json benchmark_ops(Algo algo, std::size_t hidden, std::size_t reps,
                                     std::uint64_t seed);

/// key=value file (one pair per line, `#` comments).  Returns the raw pairs;
/// unknown keys are the caller's problem so the CLI can reject them by name.
std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::filesystem::path& path);

}  // namespace oselmq
