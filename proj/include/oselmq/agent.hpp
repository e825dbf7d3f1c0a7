#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "oselmq/oselm.hpp"
#include "oselmq/rng.hpp"
#include "oselmq/timing.hpp"

namespace oselmq {

/// Q-learning agent configuration.  The defaults reproduce the canonical
/// setup: epsilon1 is the probability of *exploiting* (greedy action),
/// epsilon2 the probability that a step performs a sequential update.
struct AgentConfig {
  std::size_t n_tilde = 64;   // hidden width; also the initial-train batch size
  double eps1 = 0.7;          // exploitation rate
  double eps2 = 0.5;          // sequential-update rate
  double gamma = 0.99;        // discount factor
  double delta = 0.5;         // L2 strength for the initial solve (when use_l2)
  std::size_t update_step = 2;  // target-network refresh cadence, in episodes
  double clip_lo = -1.0;      // teacher clipping range
  double clip_hi = 1.0;
  bool use_l2 = false;        // regularize the initial solve with `delta`
  bool use_lipschitz = false; // rescale alpha to unit largest singular value
  std::vector<double> action_codes = {-0.5, 0.5};  // appended action encoding
  /// Replaces the environment reward on stored failure transitions.
  std::optional<double> terminal_reward;
  /// Store terminal transitions.  Failures take terminal_reward (when set);
  /// step-limit terminals take live_reward.  Either way d = 1 suppresses the
  /// bootstrap, so stored failures and stored step-limit rows anchor the two
  /// ends of the value scale.
  bool store_terminal = false;
  /// Replaces the environment reward on stored *non-failure* transitions.
  /// The default of 0 makes failures carry the only outcome signal: targets
  /// then live in [-gamma, 0] and the clipping range is an outlier guard
  /// rather than a ceiling the teacher saturates against.  nullopt keeps the
  /// raw environment reward.
  std::optional<double> live_reward = 0.0;
  /// Per-dimension multipliers applied to the observation before the action
  /// code is appended (empty = identity).  The hidden layer draws its input
  /// weights from a fixed cube, so observation components with very
  /// different natural ranges otherwise contribute very unequally to every
  /// hidden unit.
  std::vector<double> input_scale;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

/// One transition.  d is 1 exactly when s_next is terminal.
struct Experience {
  std::vector<double> s;
  int a = 0;
  double r = 0.0;
  std::vector<double> s_next;
  int d = 0;
};

/// Online network (theta1) and target network (theta2).  Both share alpha
/// and bias; theta2 trails theta1 by up to update_step episodes.
struct QNetPair {
  OselmState theta1;
  OselmState theta2;
};

struct ActionChoice {
  int action = 0;
  bool greedy = false;
};

/// What a completed step did.
struct StepOutcome {
  bool stored = false;
  bool init_trained = false;
  bool seq_trained = false;
};

/// Draws Q-network parameters for a |s|+1 input: input weights uniform in
/// [-1, 1] (rescaled to unit spectral norm when cfg.use_lipschitz), hidden
/// bias zero, readout left at its uniform [0, 1) draw until the first fit
/// replaces it.  See the OselmAgent class comment for why.
ElmParams draw_q_net(const AgentConfig& cfg, std::size_t state_dim, Rng& rng);

/// 1 x (|s|+1) network input: the state with the action's code appended.
Matrix encode_input(std::span<const double> s, int action, const AgentConfig& cfg);

/// Q(s, a) for every action, via one scalar-output forward pass per action.
std::vector<double> q_values(const OselmState& net, std::span<const double> s,
                             const AgentConfig& cfg);

/// Epsilon-greedy action selection: with probability eps1 the greedy action
/// (ties break to the lowest index), otherwise uniform.  Only the greedy
/// branch evaluates the network.  Consumes one uniform draw, plus one more
/// on the random branch.
ActionChoice select_action(const OselmState& net, std::span<const double> s,
                           const AgentConfig& cfg, Rng& rng, OpTimers* timers = nullptr);

/// Clipped TD(0) teacher: clip(clip_lo, r + (1-d) * gamma * max_a Q(s', a),
/// clip_hi), with Q from the target network.  Terminal transitions skip the
/// forward passes, and so does an untrained target network: its readout is
/// still the random draw, and bootstrapping from it floods every early
/// teacher with the same clipped noise, so the initial batch regresses on
/// immediate rewards alone.
double compute_target(const Experience& e, const OselmState& target_net,
                      const AgentConfig& cfg);

/// Upper bound on the network's Lipschitz constant: sigma_max(beta) when
/// alpha was normalized at initialization, else sigma_max(alpha) *
/// sigma_max(beta).
double lipschitz_bound(const QNetPair& nets, const AgentConfig& cfg);

/// Online Q-learning driver around OselmState.  Per step: act() draws the
/// action (and advances the global step counter), then observe() completes
/// the step: terminal transitions are dropped unless store_terminal keeps
/// them, the first n_tilde processed steps fill the initial-train buffer,
/// the batch solve runs at the first update opportunity at or past n_tilde
/// steps, and later steps sequentially train with probability eps2.
/// end_episode() refreshes the target network every update_step episodes.
///
/// The Q-networks draw their input weights uniformly from [-1, 1] (then
/// rescaled to unit spectral norm when use_lipschitz) with the hidden bias
/// at zero, so every hidden unit's active half-space crosses the scaled
/// observation region; the readout is refit from data before its first
/// greedy use.  One-sided input weights with a one-sided bias instead leave
/// almost every hidden unit active across the whole visited region, making
/// the net nearly affine there -- too weak to express a useful policy.
class OselmAgent {
 public:
  OselmAgent(AgentConfig cfg, std::size_t state_dim);

  /// Chooses the action for state s; begins a new step.
  int act(std::span<const double> s);

  /// Completes the current step.  `failure` marks terminals that ended in a
  /// failed balance (as opposed to the step limit).
  StepOutcome observe(const Experience& e, bool failure);

  /// Call after every episode with its 1-based index.
  void end_episode(std::size_t episode_index);

  /// Re-randomizes alpha, bias, beta (re-normalizing alpha when configured)
  /// and clears all training state, including the global step counter.
  void reset_parameters();

  void sync_target();

  double lipschitz_bound() const { return oselmq::lipschitz_bound(nets_, cfg_); }

  const QNetPair& nets() const { return nets_; }
  const AgentConfig& config() const { return cfg_; }
  std::uint64_t global_step() const { return step_; }
  std::size_t buffer_size() const { return buffer_.size(); }
  const OpTimers& timers() const { return timers_; }

  /// Extremes of every teacher value ever produced; both stay inside
  /// [clip_lo, clip_hi] by construction.
  double teacher_min() const { return teacher_min_; }
  double teacher_max() const { return teacher_max_; }

 private:
  double teacher_for(const Experience& e);
  void init_train_now();

  AgentConfig cfg_;
  std::size_t state_dim_;
  Rng rng_;
  QNetPair nets_;
  std::vector<Experience> buffer_;
  std::uint64_t step_ = 0;
  OpTimers timers_;
  double teacher_min_ = 0.0;
  double teacher_max_ = 0.0;
  bool teacher_seen_ = false;
};

}  // namespace oselmq
