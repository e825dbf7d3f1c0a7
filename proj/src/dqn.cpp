#include "oselmq/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oselmq/errors.hpp"

namespace oselmq {

void DqnConfig::validate() const {
  if (state_dim == 0 || hidden == 0 || actions < 2) {
    throw ConfigError("dqn: state_dim, hidden must be >= 1 and actions >= 2");
  }
  if (eps1 < 0.0 || eps1 > 1.0) throw ConfigError("dqn: eps1 must lie in [0, 1]");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("dqn: gamma must lie in [0, 1]");
  if (lr <= 0.0) throw ConfigError("dqn: lr must be > 0");
  if (batch_size == 0 || capacity < batch_size) {
    throw ConfigError("dqn: capacity must be >= batch_size >= 1");
  }
  if (update_step == 0) throw ConfigError("dqn: update_step must be >= 1");
}

MlpParams mlp_init(std::size_t n, std::size_t hidden, std::size_t actions, Rng& rng) {
  const double lim1 = 1.0 / std::sqrt(static_cast<double>(n));
  const double lim2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  MlpParams p;
  p.w1 = random_uniform(n, hidden, rng, -lim1, lim1);
  p.b1 = random_uniform(1, hidden, rng, -lim1, lim1);
  p.w2 = random_uniform(hidden, actions, rng, -lim2, lim2);
  p.b2 = random_uniform(1, actions, rng, -lim2, lim2);
  return p;
}

namespace {

// relu(s w1 + b1); shared by forward and backward passes.
Matrix hidden_layer(const MlpParams& p, const Matrix& s) {
  if (s.cols() != p.w1.rows()) {
    throw ShapeError("mlp_forward: input " + shape_string(s) + " vs w1 " +
                     shape_string(p.w1));
  }
  Matrix h = matmul(s, p.w1);
  const double* b = p.b1.row(0).data();
  for (std::size_t r = 0; r < h.rows(); ++r) {
    double* hr = h.row(r).data();
    for (std::size_t j = 0; j < h.cols(); ++j) hr[j] = std::max(0.0, hr[j] + b[j]);
  }
  return h;
}

}  // namespace

Matrix mlp_forward(const MlpParams& params, const Matrix& s) {
  Matrix y = matmul(hidden_layer(params, s), params.w2);
  const double* b = params.b2.row(0).data();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double* yr = y.row(r).data();
    for (std::size_t j = 0; j < y.cols(); ++j) yr[j] += b[j];
  }
  return y;
}

HuberResult huber(double residual) {
  HuberResult h;
  if (std::abs(residual) <= 1.0) {
    h.loss = 0.5 * residual * residual;
    h.grad = residual;
  } else {
    h.loss = std::abs(residual) - 0.5;
    h.grad = residual > 0.0 ? 1.0 : -1.0;
  }
  return h;
}

MlpGrads dqn_loss_gradients(const MlpParams& params, const Matrix& s,
                            const std::vector<int>& actions,
                            const std::vector<double>& targets) {
  const std::size_t k = s.rows();
  if (actions.size() != k || targets.size() != k) {
    throw ShapeError("dqn_loss_gradients: batch size mismatch");
  }
  const Matrix h = hidden_layer(params, s);
  Matrix y = matmul(h, params.w2);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < y.cols(); ++j) y(r, j) += params.b2(0, j);
  }

  // dL/dy is nonzero only at each row's taken action.
  Matrix dy(k, y.cols());
  double loss = 0.0;
  const double inv_k = 1.0 / static_cast<double>(k);
  for (std::size_t r = 0; r < k; ++r) {
    const auto a = static_cast<std::size_t>(actions[r]);
    if (a >= y.cols()) throw ConfigError("dqn_loss_gradients: action out of range");
    const HuberResult hr = huber(y(r, a) - targets[r]);
    loss += hr.loss * inv_k;
    dy(r, a) = hr.grad * inv_k;
  }

  MlpGrads g;
  g.loss = loss;
  g.w2 = matmul(transpose(h), dy);
  g.b2 = Matrix(1, y.cols());
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t j = 0; j < y.cols(); ++j) g.b2(0, j) += dy(r, j);

  Matrix dh = matmul(dy, transpose(params.w2));
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < dh.cols(); ++j) {
      if (h(r, j) <= 0.0) dh(r, j) = 0.0;  // relu gate
    }
  }
  g.w1 = matmul(transpose(s), dh);
  g.b1 = Matrix(1, dh.cols());
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t j = 0; j < dh.cols(); ++j) g.b1(0, j) += dh(r, j);
  return g;
}

AdamState::AdamState(const MlpParams& shape, double lr_in) : lr(lr_in) {
  for (const Matrix* p : {&shape.w1, &shape.b1, &shape.w2, &shape.b2}) {
    m.emplace_back(p->rows(), p->cols());
    v.emplace_back(p->rows(), p->cols());
  }
}

void adam_step(MlpParams& params, AdamState& adam, const MlpGrads& grads) {
  ++adam.step;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
  Matrix* ps[] = {&params.w1, &params.b1, &params.w2, &params.b2};
  const Matrix* gs[] = {&grads.w1, &grads.b1, &grads.w2, &grads.b2};
  for (std::size_t i = 0; i < 4; ++i) {
    auto pd = ps[i]->data();
    const auto gd = gs[i]->data();
    auto md = adam.m[i].data();
    auto vd = adam.v[i].data();
    for (std::size_t j = 0; j < pd.size(); ++j) {
      md[j] = adam.beta1 * md[j] + (1.0 - adam.beta1) * gd[j];
      vd[j] = adam.beta2 * vd[j] + (1.0 - adam.beta2) * gd[j] * gd[j];
      const double mhat = md[j] / bc1;
      const double vhat = vd[j] / bc2;
      pd[j] -= adam.lr * mhat / (std::sqrt(vhat) + adam.eps);
    }
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer: capacity must be >= 1");
  data_.reserve(capacity);
}

void ReplayBuffer::push(Experience e) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(e));
  } else {
    data_[next_] = std::move(e);  // overwrite the oldest entry
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (data_.empty()) throw StateError("replay buffer: sampling from an empty buffer");
  std::vector<std::size_t> idx(count);
  for (std::size_t& i : idx) i = rng.uniform_index(data_.size());
  return idx;
}

ActionChoice dqn_select_action(const MlpParams& params, std::span<const double> s,
                               double eps1, Rng& rng, OpTimers* timers) {
  ActionChoice choice;
  const double r1 = rng.uniform();
  if (r1 < eps1) {
    choice.greedy = true;
    Matrix x(1, s.size());
    std::copy(s.begin(), s.end(), x.row(0).begin());
    Matrix q;
    {
      ScopedTimer timer(timers, OpClass::predict_1);
      q = mlp_forward(params, x);
    }
    int best = 0;
    for (std::size_t j = 1; j < q.cols(); ++j) {
      if (q(0, j) > q(0, static_cast<std::size_t>(best))) best = static_cast<int>(j);
    }
    choice.action = best;
  } else {
    choice.action = static_cast<int>(rng.uniform_index(params.w2.cols()));
  }
  return choice;
}

bool dqn_train_step(MlpParams& online, const MlpParams& target, AdamState& adam,
                    const ReplayBuffer& buffer, const DqnConfig& cfg, Rng& rng,
                    OpTimers* timers) {
  if (buffer.size() < cfg.batch_size) return false;
  const std::vector<std::size_t> idx = buffer.sample_indices(cfg.batch_size, rng);

  const std::size_t n = cfg.state_dim;
  Matrix s(cfg.batch_size, n);
  Matrix s_next(cfg.batch_size, n);
  std::vector<int> actions(cfg.batch_size);
  std::vector<double> targets(cfg.batch_size);
  for (std::size_t r = 0; r < cfg.batch_size; ++r) {
    const Experience& e = buffer[idx[r]];
    std::copy(e.s.begin(), e.s.end(), s.row(r).begin());
    std::copy(e.s_next.begin(), e.s_next.end(), s_next.row(r).begin());
    actions[r] = e.a;
  }

  Matrix q_next;
  {
    ScopedTimer timer(timers, OpClass::predict_32);
    q_next = mlp_forward(target, s_next);
  }
  for (std::size_t r = 0; r < cfg.batch_size; ++r) {
    const Experience& e = buffer[idx[r]];
    double best = q_next(r, 0);
    for (std::size_t j = 1; j < q_next.cols(); ++j) best = std::max(best, q_next(r, j));
    // Unclipped bootstrap target; terminals take the bare reward.
    targets[r] = e.r + (e.d == 0 ? cfg.gamma * best : 0.0);
  }

  ScopedTimer timer(timers, OpClass::train_dqn);
  const MlpGrads grads = dqn_loss_gradients(online, s, actions, targets);
  adam_step(online, adam, grads);
  return true;
}

namespace {

DqnConfig validated(DqnConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

DqnAgent::DqnAgent(DqnConfig cfg)
    : cfg_(validated(std::move(cfg))),
      rng_(cfg_.seed),
      online_(mlp_init(cfg_.state_dim, cfg_.hidden, cfg_.actions, rng_)),
      target_(online_),
      adam_(online_, cfg_.lr),
      buffer_(cfg_.capacity) {}

int DqnAgent::act(std::span<const double> s) {
  return dqn_select_action(online_, s, cfg_.eps1, rng_, &timers_).action;
}

StepOutcome DqnAgent::observe(const Experience& e, bool /*failure*/) {
  StepOutcome out;
  buffer_.push(e);
  out.stored = true;
  out.seq_trained = dqn_train_step(online_, target_, adam_, buffer_, cfg_, rng_, &timers_);
  return out;
}

void DqnAgent::end_episode(std::size_t episode_index) {
  if (episode_index % cfg_.update_step == 0) target_ = online_;
}

}  // namespace oselmq
