#include "oselmq/cartpole.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "oselmq/errors.hpp"

namespace oselmq {

CartPole::CartPole(std::uint64_t seed) : rng_(seed) {}

CartPoleState CartPole::reset() {
  state_.x = rng_.uniform(-0.05, 0.05);
  state_.x_dot = rng_.uniform(-0.05, 0.05);
  state_.theta = rng_.uniform(-0.05, 0.05);
  state_.theta_dot = rng_.uniform(-0.05, 0.05);
  status_ = EpisodeStatus{};
  started_ = true;
  return state_;
}

CartPoleState CartPole::integrate(const CartPoleState& s, double force) {
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);
  const double temp =
      (force + kPoleMassLength * s.theta_dot * s.theta_dot * sin_t) / kTotalMass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

  // Semi-explicit Euler in the classic ordering: positions advance with the
  // old velocities.
  CartPoleState next;
  next.x = s.x + kTau * s.x_dot;
  next.x_dot = s.x_dot + kTau * x_acc;
  next.theta = s.theta + kTau * s.theta_dot;
  next.theta_dot = s.theta_dot + kTau * theta_acc;
  return next;
}

StepResult CartPole::step(int action) {
  if (!started_) throw StateError("step: reset has not been called");
  if (status_.done) throw StateError("step: episode is over; call reset");
  if (action != 0 && action != 1) {
    throw ConfigError("step: action must be 0 or 1, got " + std::to_string(action));
  }
  const double force = action == 1 ? kForceMag : -kForceMag;
  state_ = integrate(state_, force);
  ++status_.steps;

  if (std::abs(state_.theta) > kThetaThreshold) {
    status_.done = true;
    status_.reason = DoneReason::pole_fell;
  } else if (std::abs(state_.x) > kXThreshold) {
    status_.done = true;
    status_.reason = DoneReason::cart_out;
  } else if (status_.steps >= kMaxSteps) {
    status_.done = true;
    status_.reason = DoneReason::step_limit;
  }

  StepResult r;
  r.state = state_;
  r.reward = 1.0;
  r.done = status_.done;
  r.reason = status_.done ? status_.reason : DoneReason::running;
  return r;
}

void write_trajectory_csv(const std::vector<TrajectoryRow>& rows,
                          const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("trajectory: cannot open " + path.string() + " for writing");
  os << "step,x,x_dot,theta,theta_dot,action,reward,done\n";
  char buf[256];
  for (const TrajectoryRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f,%d,%.6f,%d\n", r.step,
                  r.state.x, r.state.x_dot, r.state.theta, r.state.theta_dot, r.action,
                  r.reward, r.done ? 1 : 0);
    os << buf;
  }
  if (!os) throw IoError("trajectory: write failed for " + path.string());
}

}  // namespace oselmq
