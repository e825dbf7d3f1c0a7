#include "oselmq/fixedq20.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "oselmq/errors.hpp"

namespace oselmq {

namespace {

constexpr std::int64_t kRawMin = std::numeric_limits<std::int32_t>::min();
constexpr std::int64_t kRawMax = std::numeric_limits<std::int32_t>::max();

std::int32_t saturate(std::int64_t wide, std::uint64_t* overflow) {
  if (wide > kRawMax) {
    if (overflow) ++*overflow;
    return static_cast<std::int32_t>(kRawMax);
  }
  if (wide < kRawMin) {
    if (overflow) ++*overflow;
    return static_cast<std::int32_t>(kRawMin);
  }
  return static_cast<std::int32_t>(wide);
}

}  // namespace

FixedQ20 fx_convert(double v, std::uint64_t* overflow) {
  const double scaled = v * static_cast<double>(1 << kFxFracBits);
  if (scaled >= static_cast<double>(kRawMax) + 0.5) {
    if (overflow) ++*overflow;
    return FixedQ20{static_cast<std::int32_t>(kRawMax)};
  }
  if (scaled <= static_cast<double>(kRawMin) - 0.5) {
    if (overflow) ++*overflow;
    return FixedQ20{static_cast<std::int32_t>(kRawMin)};
  }
  // llrint rounds to nearest, ties to even, under the default FP environment.
  return FixedQ20{saturate(std::llrint(scaled), overflow)};
}

double fx_to_real(FixedQ20 f) {
  return static_cast<double>(f.raw) / static_cast<double>(1 << kFxFracBits);
}

FixedQ20 fx_add(FixedQ20 a, FixedQ20 b, std::uint64_t* overflow) {
  return FixedQ20{saturate(static_cast<std::int64_t>(a.raw) + b.raw, overflow)};
}

FixedQ20 fx_sub(FixedQ20 a, FixedQ20 b, std::uint64_t* overflow) {
  return FixedQ20{saturate(static_cast<std::int64_t>(a.raw) - b.raw, overflow)};
}

FixedQ20 fx_mul(FixedQ20 a, FixedQ20 b, std::uint64_t* overflow) {
  const std::int64_t prod = static_cast<std::int64_t>(a.raw) * b.raw;
  // Round half up at the dropped bit, then arithmetic shift.
  const std::int64_t rounded = (prod + (std::int64_t{1} << (kFxFracBits - 1))) >> kFxFracBits;
  return FixedQ20{saturate(rounded, overflow)};
}

FixedQ20 fx_div(FixedQ20 a, FixedQ20 b, std::uint64_t* overflow) {
  if (b.raw == 0) throw NumericError("fx_div: division by zero");
  const std::int64_t q = (static_cast<std::int64_t>(a.raw) << kFxFracBits) / b.raw;
  return FixedQ20{saturate(q, overflow)};
}

FixedOselmState FixedOselmState::from_float(const OselmState& theta1,
                                            const OselmState& theta2) {
  const NetworkShape& shape = theta1.params().shape;
  if (shape.m != 1) throw ShapeError("fixed state: output dimension must be 1");
  if (!theta1.trained()) throw StateError("fixed state: quantizing an untrained network");

  FixedOselmState st;
  st.shape = shape;
  auto quantize = [&st](const Matrix& m, std::vector<FixedQ20>& out) {
    out.reserve(m.size());
    for (double v : m.data()) out.push_back(fx_convert(v, &st.overflow_count));
  };
  quantize(theta1.params().alpha, st.alpha);
  quantize(theta1.params().bias, st.bias);
  quantize(theta1.params().beta, st.beta1);
  quantize(theta2.params().beta, st.beta2);
  quantize(theta1.p(), st.p);
  return st;
}

void FixedOselmState::sync_target_bank() { beta2 = beta1; }

namespace {

// Hidden activations in Q20: acc_j = relu(bias_j + sum_i x_i alpha_ij).
void fx_hidden(FixedOselmState& st, std::span<const FixedQ20> x,
               std::vector<FixedQ20>& h) {
  const std::size_t n = st.shape.n, nt = st.shape.n_tilde;
  if (x.size() != n) throw ShapeError("fx_predict: input length mismatch");
  h.resize(nt);
  for (std::size_t j = 0; j < nt; ++j) {
    FixedQ20 acc = st.bias[j];
    for (std::size_t i = 0; i < n; ++i) {
      acc = fx_add(acc, fx_mul(x[i], st.alpha[i * nt + j], &st.overflow_count),
                   &st.overflow_count);
    }
    if (acc.raw < 0) acc.raw = 0;  // relu
    h[j] = acc;
  }
}

}  // namespace

FixedQ20 fx_predict(FixedOselmState& state, std::span<const FixedQ20> x, BetaBank bank) {
  std::vector<FixedQ20> h;
  fx_hidden(state, x, h);
  const std::vector<FixedQ20>& beta = bank == BetaBank::online ? state.beta1 : state.beta2;
  FixedQ20 y{0};
  for (std::size_t j = 0; j < h.size(); ++j) {
    y = fx_add(y, fx_mul(h[j], beta[j], &state.overflow_count), &state.overflow_count);
  }
  return y;
}

void fx_seq_train(FixedOselmState& state, std::span<const FixedQ20> x, FixedQ20 t) {
  const std::size_t nt = state.shape.n_tilde;
  std::uint64_t* ovf = &state.overflow_count;

  std::vector<FixedQ20> h;
  fx_hidden(state, x, h);

  // z = P h^T, s = 1 + h z, recip = 1 / s (the single division).
  std::vector<FixedQ20> z(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    FixedQ20 acc{0};
    const FixedQ20* pi = state.p.data() + i * nt;
    for (std::size_t j = 0; j < nt; ++j) acc = fx_add(acc, fx_mul(pi[j], h[j], ovf), ovf);
    z[i] = acc;
  }
  FixedQ20 s = kFxOne;
  for (std::size_t i = 0; i < nt; ++i) s = fx_add(s, fx_mul(h[i], z[i], ovf), ovf);
  const FixedQ20 recip = fx_div(kFxOne, s, ovf);

  // w = z * recip (= P_new h^T); P <- P - z w^T; beta1 <- beta1 + w resid.
  std::vector<FixedQ20> w(nt);
  for (std::size_t i = 0; i < nt; ++i) w[i] = fx_mul(z[i], recip, ovf);
  for (std::size_t i = 0; i < nt; ++i) {
    FixedQ20* pi = state.p.data() + i * nt;
    const FixedQ20 zi = z[i];
    for (std::size_t j = 0; j < nt; ++j) {
      pi[j] = fx_sub(pi[j], fx_mul(zi, w[j], ovf), ovf);
    }
  }
  FixedQ20 pred{0};
  for (std::size_t j = 0; j < nt; ++j) {
    pred = fx_add(pred, fx_mul(h[j], state.beta1[j], ovf), ovf);
  }
  const FixedQ20 resid = fx_sub(t, pred, ovf);
  for (std::size_t i = 0; i < nt; ++i) {
    state.beta1[i] = fx_add(state.beta1[i], fx_mul(w[i], resid, ovf), ovf);
  }
}

void write_hex_dump(const FixedOselmState& state, std::ostream& os) {
  char buf[16];
  auto dump = [&](const std::vector<FixedQ20>& words) {
    for (FixedQ20 w : words) {
      std::snprintf(buf, sizeof(buf), "%08x\n", static_cast<std::uint32_t>(w.raw));
      os << buf;
    }
  };
  dump(state.alpha);
  dump(state.bias);
  dump(state.beta1);
  dump(state.beta2);
  dump(state.p);
}

// ---------------------------------------------------------------------------
// FixedAgent

namespace {

AgentConfig validated_cfg(AgentConfig cfg) {
  cfg.validate();
  return cfg;
}

QNetPair make_float_nets(const AgentConfig& cfg, std::size_t state_dim, Rng& rng) {
  ElmParams params = draw_q_net(cfg, state_dim, rng);
  OselmState theta1(params);
  OselmState theta2(std::move(params));
  return QNetPair{std::move(theta1), std::move(theta2)};
}

}  // namespace

FixedAgent::FixedAgent(AgentConfig cfg, std::size_t state_dim)
    : cfg_(validated_cfg(std::move(cfg))),
      state_dim_(state_dim),
      rng_(cfg_.seed),
      float_nets_(make_float_nets(cfg_, state_dim, rng_)) {
  buffer_.reserve(cfg_.n_tilde);
}

const FixedOselmState& FixedAgent::fixed_state() const {
  if (!fixed_) throw StateError("fixed agent: device image not built yet");
  return *fixed_;
}

std::uint64_t FixedAgent::overflow_count() const {
  return overflow_before_reset_ + (fixed_ ? fixed_->overflow_count : 0);
}

std::vector<FixedQ20> FixedAgent::encode_fx(std::span<const double> s, int action) {
  std::vector<FixedQ20> x(s.size() + 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double scaled =
        i < cfg_.input_scale.size() ? s[i] * cfg_.input_scale[i] : s[i];
    x[i] = fx_convert(scaled, &fixed_->overflow_count);
  }
  x[s.size()] = fx_convert(cfg_.action_codes[static_cast<std::size_t>(action)],
                           &fixed_->overflow_count);
  return x;
}

double FixedAgent::q_fx(std::span<const double> s, int action, BetaBank bank) {
  const std::vector<FixedQ20> x = encode_fx(s, action);
  return fx_to_real(fx_predict(*fixed_, x, bank));
}

int FixedAgent::greedy_fx(std::span<const double> s, BetaBank bank) {
  int best = 0;
  double best_q = q_fx(s, 0, bank);
  for (std::size_t a = 1; a < cfg_.action_codes.size(); ++a) {
    const double q = q_fx(s, static_cast<int>(a), bank);
    if (q > best_q) {
      best_q = q;
      best = static_cast<int>(a);
    }
  }
  return best;
}

int FixedAgent::act(std::span<const double> s) {
  ++step_;
  const double r1 = rng_.uniform();
  if (r1 < cfg_.eps1) {
    if (fixed_) {
      ScopedTimer timer(&timers_, OpClass::predict_seq);
      return greedy_fx(s, BetaBank::online);
    }
    ScopedTimer timer(&timers_, OpClass::predict_init);
    const std::vector<double> q = q_values(float_nets_.theta1, s, cfg_);
    int best = 0;
    for (std::size_t a = 1; a < q.size(); ++a) {
      if (q[a] > q[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
    }
    return best;
  }
  return static_cast<int>(rng_.uniform_index(cfg_.action_codes.size()));
}

void FixedAgent::record_teacher(double t) {
  if (t < cfg_.clip_lo || t > cfg_.clip_hi) {
    throw NumericError("teacher escaped the clipping range: " + std::to_string(t));
  }
  if (!teacher_seen_) {
    teacher_min_ = teacher_max_ = t;
    teacher_seen_ = true;
  } else {
    teacher_min_ = std::min(teacher_min_, t);
    teacher_max_ = std::max(teacher_max_, t);
  }
}

double FixedAgent::teacher_for(const Experience& e) {
  double target;
  if (fixed_) {
    double bootstrap = 0.0;
    if (e.d == 0) {
      ScopedTimer timer(&timers_, OpClass::predict_seq);
      double best = q_fx(e.s_next, 0, BetaBank::target);
      for (std::size_t a = 1; a < cfg_.action_codes.size(); ++a) {
        best = std::max(best, q_fx(e.s_next, static_cast<int>(a), BetaBank::target));
      }
      bootstrap = cfg_.gamma * best;
    }
    target = clip(cfg_.clip_lo, e.r + bootstrap, cfg_.clip_hi);
  } else {
    ScopedTimer timer(e.d == 0 ? &timers_ : nullptr, OpClass::predict_init);
    target = compute_target(e, float_nets_.theta2, cfg_);
  }
  record_teacher(target);
  return target;
}

StepOutcome FixedAgent::observe(const Experience& e, bool failure) {
  if (e.d != 0 && e.d != 1) throw ConfigError("observe: d must be 0 or 1");
  StepOutcome out;

  Experience stored = e;
  if (e.d == 1) {
    if (!cfg_.store_terminal) return out;
    if (failure) {
      if (cfg_.terminal_reward) stored.r = *cfg_.terminal_reward;
    } else if (cfg_.live_reward) {
      stored.r = *cfg_.live_reward;
    }
  } else if (cfg_.live_reward) {
    stored.r = *cfg_.live_reward;
  }

  if (!fixed_ && buffer_.size() < cfg_.n_tilde) {
    buffer_.push_back(std::move(stored));
    out.stored = true;
  }

  const double r2 = rng_.uniform();
  if (!fixed_) {
    if (step_ >= cfg_.n_tilde) {
      // Host-side float solve, then quantize the whole network once.
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
        float_nets_.theta1.init_train(x0, t0, delta);
      }
      fixed_ = FixedOselmState::from_float(float_nets_.theta1, float_nets_.theta2);
      buffer_.clear();
      buffer_.shrink_to_fit();
      out.init_trained = true;
    }
  } else if (r2 < cfg_.eps2) {
    const double target = teacher_for(stored);
    const std::vector<FixedQ20> x = encode_fx(stored.s, stored.a);
    const FixedQ20 t = fx_convert(target, &fixed_->overflow_count);
    {
      ScopedTimer timer(&timers_, OpClass::train_seq);
      fx_seq_train(*fixed_, x, t);
    }
    out.seq_trained = true;
  }
  return out;
}

void FixedAgent::end_episode(std::size_t episode_index) {
  if (episode_index % cfg_.update_step == 0 && fixed_) fixed_->sync_target_bank();
}

void FixedAgent::reset_parameters() {
  if (fixed_) overflow_before_reset_ += fixed_->overflow_count;
  float_nets_ = make_float_nets(cfg_, state_dim_, rng_);
  fixed_.reset();
  buffer_.clear();
  step_ = 0;
}

}  // namespace oselmq
