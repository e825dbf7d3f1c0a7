#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oselmq/agent.hpp"
#include "oselmq/matrix.hpp"
#include "oselmq/rng.hpp"
#include "oselmq/timing.hpp"

namespace oselmq {

struct DqnConfig {
  std::size_t state_dim = 4;
  std::size_t hidden = 64;
  std::size_t actions = 2;
  double eps1 = 0.7;   // exploitation rate, as for the other agents
  double gamma = 0.99;
  double lr = 0.01;
  std::size_t batch_size = 32;
  std::size_t capacity = 10000;
  std::size_t update_step = 2;  // target refresh cadence, in episodes
  std::uint64_t seed = 0;

  void validate() const;
};

/// Two-layer perceptron: relu(s w1 + b1) w2 + b2, one output per action.
struct MlpParams {
  Matrix w1;  // n x hidden
  Matrix b1;  // 1 x hidden
  Matrix w2;  // hidden x actions
  Matrix b2;  // 1 x actions
};

/// Uniform initialization in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer,
/// biases included; draw order w1, b1, w2, b2 (row-major).
MlpParams mlp_init(std::size_t n, std::size_t hidden, std::size_t actions, Rng& rng);

/// Forward pass for a k x n batch; returns k x actions Q-values.
Matrix mlp_forward(const MlpParams& params, const Matrix& s);

struct HuberResult {
  double loss = 0.0;
  double grad = 0.0;
};

/// Huber loss (threshold 1) of one residual and its derivative:
/// 0.5 r^2 for |r| <= 1, |r| - 0.5 otherwise; gradient clamp(r, -1, 1).
HuberResult huber(double residual);

struct MlpGrads {
  Matrix w1, b1, w2, b2;
  double loss = 0.0;  // mean Huber loss over the batch
};

/// Mean-Huber-loss gradients for a batch where only the taken action's
/// output contributes per row.
MlpGrads dqn_loss_gradients(const MlpParams& params, const Matrix& s,
                            const std::vector<int>& actions,
                            const std::vector<double>& targets);

/// Adam moments for the four parameter matrices, in w1, b1, w2, b2 order.
struct AdamState {
  explicit AdamState(const MlpParams& shape, double lr);

  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// One Adam update of params from grads (bias-corrected moments).
void adam_step(MlpParams& params, AdamState& adam, const MlpGrads& grads);

/// Fixed-capacity ring buffer of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Experience e);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& operator[](std::size_t i) const { return data_[i]; }

  /// `count` indices drawn uniformly (with replacement).
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Experience> data_;
};

/// Epsilon-greedy over the online network's outputs; same draw discipline as
/// the other agents (one uniform, plus one on the random branch).
ActionChoice dqn_select_action(const MlpParams& params, std::span<const double> s,
                               double eps1, Rng& rng, OpTimers* timers = nullptr);

/// One training step: sample a batch, bootstrap unclipped targets from the
/// target network, then a gradient/Adam update.  No-op (returns false) until
/// the buffer holds at least one batch.
bool dqn_train_step(MlpParams& online, const MlpParams& target, AdamState& adam,
                    const ReplayBuffer& buffer, const DqnConfig& cfg, Rng& rng,
                    OpTimers* timers = nullptr);

/// Deep Q-learning driver with the same act/observe/end_episode surface as
/// OselmAgent.  Every transition is stored (terminals included, rewards
/// unmodified) and a training step runs on every observe.  There is no
/// parameter-reset rule.
class DqnAgent {
 public:
  explicit DqnAgent(DqnConfig cfg);

  int act(std::span<const double> s);
  StepOutcome observe(const Experience& e, bool failure);
  void end_episode(std::size_t episode_index);
  void reset_parameters() {}  // intentionally empty: DQN never resets

  const MlpParams& online() const { return online_; }
  const MlpParams& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const OpTimers& timers() const { return timers_; }

 private:
  DqnConfig cfg_;
  Rng rng_;
  MlpParams online_;
  MlpParams target_;
  AdamState adam_;
  ReplayBuffer buffer_;
  OpTimers timers_;
};

}  // namespace oselmq
