#include "oselmq/agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oselmq/errors.hpp"

namespace oselmq {

void AgentConfig::validate() const {
  if (n_tilde == 0) throw ConfigError("agent: n_tilde must be >= 1");
  if (eps1 < 0.0 || eps1 > 1.0) throw ConfigError("agent: eps1 must lie in [0, 1]");
  if (eps2 < 0.0 || eps2 > 1.0) throw ConfigError("agent: eps2 must lie in [0, 1]");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("agent: gamma must lie in [0, 1]");
  if (use_l2 && delta <= 0.0) throw ConfigError("agent: use_l2 requires delta > 0");
  if (delta < 0.0) throw ConfigError("agent: delta must be >= 0");
  if (update_step == 0) throw ConfigError("agent: update_step must be >= 1");
  if (clip_lo > clip_hi) throw ConfigError("agent: clip_lo must be <= clip_hi");
  if (action_codes.size() < 2) throw ConfigError("agent: need at least two action codes");
  for (std::size_t i = 0; i < action_codes.size(); ++i)
    for (std::size_t j = i + 1; j < action_codes.size(); ++j)
      if (action_codes[i] == action_codes[j])
        throw ConfigError("agent: action codes must be distinct");
  for (double v : input_scale)
    if (!std::isfinite(v) || v <= 0.0)
      throw ConfigError("agent: input_scale entries must be finite and positive");
}

Matrix encode_input(std::span<const double> s, int action, const AgentConfig& cfg) {
  if (action < 0 || static_cast<std::size_t>(action) >= cfg.action_codes.size()) {
    throw ConfigError("encode_input: action " + std::to_string(action) + " out of range");
  }
  Matrix x(1, s.size() + 1);
  std::copy(s.begin(), s.end(), x.row(0).begin());
  for (std::size_t i = 0; i < s.size() && i < cfg.input_scale.size(); ++i)
    x(0, i) *= cfg.input_scale[i];
  x(0, s.size()) = cfg.action_codes[static_cast<std::size_t>(action)];
  return x;
}

std::vector<double> q_values(const OselmState& net, std::span<const double> s,
                             const AgentConfig& cfg) {
  std::vector<double> q(cfg.action_codes.size());
  for (std::size_t a = 0; a < q.size(); ++a) {
    q[a] = net.predict(encode_input(s, static_cast<int>(a), cfg))(0, 0);
  }
  return q;
}

namespace {

int argmax_lowest(const std::vector<double>& q) {
  int best = 0;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] > q[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace

ActionChoice select_action(const OselmState& net, std::span<const double> s,
                           const AgentConfig& cfg, Rng& rng, OpTimers* timers) {
  ActionChoice choice;
  const double r1 = rng.uniform();
  if (r1 < cfg.eps1) {
    choice.greedy = true;
    ScopedTimer timer(timers,
                      net.trained() ? OpClass::predict_seq : OpClass::predict_init);
    choice.action = argmax_lowest(q_values(net, s, cfg));
  } else {
    choice.action = static_cast<int>(rng.uniform_index(cfg.action_codes.size()));
  }
  return choice;
}

double compute_target(const Experience& e, const OselmState& target_net,
                      const AgentConfig& cfg) {
  double bootstrap = 0.0;
  if (e.d == 0 && target_net.trained()) {
    const std::vector<double> q = q_values(target_net, e.s_next, cfg);
    bootstrap = cfg.gamma * *std::max_element(q.begin(), q.end());
  }
  return clip(cfg.clip_lo, e.r + bootstrap, cfg.clip_hi);
}

double lipschitz_bound(const QNetPair& nets, const AgentConfig& cfg) {
  const double sb = sigma_max(nets.theta1.params().beta);
  if (cfg.use_lipschitz) return sb;  // sigma_max(alpha) == 1 by construction
  return sigma_max(nets.theta1.params().alpha) * sb;
}

ElmParams draw_q_net(const AgentConfig& cfg, std::size_t state_dim, Rng& rng) {
  NetworkShape shape{state_dim + 1, cfg.n_tilde, 1};
  ElmParams params = elm_init(shape, rng, /*normalize_alpha=*/false);
  // Recentre the input weights so the ReLU kinks face every direction, then
  // normalize; the spectral rescale must see the final alpha.
  for (std::size_t r = 0; r < params.alpha.rows(); ++r)
    for (std::size_t c = 0; c < params.alpha.cols(); ++c)
      params.alpha(r, c) = 2.0 * params.alpha(r, c) - 1.0;
  if (cfg.use_lipschitz) {
    const double s = sigma_max(params.alpha);
    for (std::size_t r = 0; r < params.alpha.rows(); ++r)
      for (std::size_t c = 0; c < params.alpha.cols(); ++c) params.alpha(r, c) /= s;
  }
  for (std::size_t j = 0; j < params.bias.cols(); ++j) params.bias(0, j) = 0.0;
  return params;
}

namespace {

QNetPair make_nets(const AgentConfig& cfg, std::size_t state_dim, Rng& rng) {
  ElmParams params = draw_q_net(cfg, state_dim, rng);
  OselmState theta1(params);
  OselmState theta2(std::move(params));
  return QNetPair{std::move(theta1), std::move(theta2)};
}

AgentConfig validated(AgentConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

OselmAgent::OselmAgent(AgentConfig cfg, std::size_t state_dim)
    : cfg_(validated(std::move(cfg))),
      state_dim_(state_dim),
      rng_(cfg_.seed),
      nets_(make_nets(cfg_, state_dim, rng_)) {
  buffer_.reserve(cfg_.n_tilde);
}

int OselmAgent::act(std::span<const double> s) {
  ++step_;
  return select_action(nets_.theta1, s, cfg_, rng_, &timers_).action;
}

double OselmAgent::teacher_for(const Experience& e) {
  double target;
  {
    ScopedTimer timer(e.d == 0 ? &timers_ : nullptr,
                      nets_.theta2.trained() ? OpClass::predict_seq
                                             : OpClass::predict_init);
    target = compute_target(e, nets_.theta2, cfg_);
  }
  if (target < cfg_.clip_lo || target > cfg_.clip_hi) {
    throw NumericError("teacher escaped the clipping range: " + std::to_string(target));
  }
  if (!teacher_seen_) {
    teacher_min_ = teacher_max_ = target;
    teacher_seen_ = true;
  } else {
    teacher_min_ = std::min(teacher_min_, target);
    teacher_max_ = std::max(teacher_max_, target);
  }
  return target;
}

void OselmAgent::init_train_now() {
  Matrix x0(buffer_.size(), state_dim_ + 1);
  Matrix t0(buffer_.size(), 1);
  for (std::size_t i = 0; i < buffer_.size(); ++i) {
    const Matrix row = encode_input(buffer_[i].s, buffer_[i].a, cfg_);
    std::copy(row.row(0).begin(), row.row(0).end(), x0.row(i).begin());
    t0(i, 0) = teacher_for(buffer_[i]);
  }
  const double delta = cfg_.use_l2 ? cfg_.delta : 1e-8;
  {
    ScopedTimer timer(&timers_, OpClass::train_init);
    nets_.theta1.init_train(x0, t0, delta);
  }
  buffer_.clear();
  buffer_.shrink_to_fit();
}

StepOutcome OselmAgent::observe(const Experience& e, bool failure) {
  if (e.d != 0 && e.d != 1) throw ConfigError("observe: d must be 0 or 1");
  StepOutcome out;

  Experience stored = e;
  if (e.d == 1) {
    if (!cfg_.store_terminal) return out;
    // Failures take the penalty; a step-limit terminal is recorded at the
    // live reward with no bootstrap, anchoring the top of the value scale
    // the way failures anchor the bottom.
    if (failure) {
      if (cfg_.terminal_reward) stored.r = *cfg_.terminal_reward;
    } else if (cfg_.live_reward) {
      stored.r = *cfg_.live_reward;
    }
  } else if (cfg_.live_reward) {
    stored.r = *cfg_.live_reward;
  }

  if (!nets_.theta1.trained() && buffer_.size() < cfg_.n_tilde) {
    buffer_.push_back(std::move(stored));
    out.stored = true;
  }

  // One update-gate draw per processed step keeps the stream layout fixed
  // whether or not training happens.
  const double r2 = rng_.uniform();
  if (!nets_.theta1.trained()) {
    if (step_ >= cfg_.n_tilde) {
      init_train_now();
      out.init_trained = true;
    }
  } else if (r2 < cfg_.eps2) {
    // Trained, so the buffer branch above did not run and `stored` is live.
    const Matrix x = encode_input(stored.s, stored.a, cfg_);
    Matrix t(1, 1);
    t(0, 0) = teacher_for(stored);
    {
      ScopedTimer timer(&timers_, OpClass::train_seq);
      nets_.theta1.seq_train(x, t);
    }
    out.seq_trained = true;
  }
  return out;
}

void OselmAgent::end_episode(std::size_t episode_index) {
  if (episode_index % cfg_.update_step == 0) sync_target();
}

void OselmAgent::sync_target() { nets_.theta2.sync_learned_from(nets_.theta1); }

void OselmAgent::reset_parameters() {
  nets_ = make_nets(cfg_, state_dim_, rng_);
  buffer_.clear();
  step_ = 0;
}

}  // namespace oselmq
