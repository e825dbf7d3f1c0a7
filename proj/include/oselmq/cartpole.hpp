#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "oselmq/rng.hpp"

namespace oselmq {

struct CartPoleState {
  double x = 0.0;         // cart position (m)
  double x_dot = 0.0;     // cart velocity (m/s)
  double theta = 0.0;     // pole angle (rad), 0 = upright
  double theta_dot = 0.0; // pole angular velocity (rad/s)

  std::array<double, 4> as_array() const { return {x, x_dot, theta, theta_dot}; }
};

enum class DoneReason { running, pole_fell, cart_out, step_limit };

struct EpisodeStatus {
  std::size_t steps = 0;
  bool done = false;
  DoneReason reason = DoneReason::running;
};

struct StepResult {
  CartPoleState state;
  double reward = 0.0;
  bool done = false;
  DoneReason reason = DoneReason::running;
};

/// Cart-pole balancing task, version-0 rules: episodes last at most 200
/// steps, reward is +1 per step (terminal step included), and the episode
/// fails when |x| > 2.4 m or the pole tips more than 12 degrees.  Dynamics
/// are integrated by explicit Euler with a 0.02 s step; the position update
/// uses the velocity from before the velocity update.
class CartPole {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kTotalMass = kMassCart + kMassPole;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kPoleMassLength = kMassPole * kHalfLength;
  static constexpr double kForceMag = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kXThreshold = 2.4;
  static constexpr double kThetaThreshold = 12.0 * 2.0 * 3.141592653589793 / 360.0;
  static constexpr std::size_t kMaxSteps = 200;

  explicit CartPole(std::uint64_t seed);

  /// Starts a new episode; every state component is uniform in [-0.05, 0.05).
  CartPoleState reset();

  /// Applies action 0 (push left) or 1 (push right) for one time step.
  /// Throws ConfigError for other actions and StateError when the episode is
  /// already over or reset was never called.
  StepResult step(int action);

  const CartPoleState& state() const { return state_; }
  EpisodeStatus status() const { return status_; }

  /// One Euler step of the dynamics from `s` under a signed force; exposed
  /// so the integrator can be validated in isolation.
  static CartPoleState integrate(const CartPoleState& s, double force);

 private:
  Rng rng_;
  CartPoleState state_;
  EpisodeStatus status_;
  bool started_ = false;
};

/// One recorded step of an episode, for offline inspection.
struct TrajectoryRow {
  std::size_t step = 0;
  CartPoleState state;   // state before the action
  int action = 0;
  double reward = 0.0;
  bool done = false;
};

/// Writes rows as CSV with header
/// step,x,x_dot,theta,theta_dot,action,reward,done (LF line endings,
/// six-decimal fixed formatting; files are byte-deterministic).
void write_trajectory_csv(const std::vector<TrajectoryRow>& rows,
                          const std::filesystem::path& path);

}  // namespace oselmq
