#include <doctest.h>

#include <cmath>
#include <vector>

#include "oselmq/agent.hpp"
#include "oselmq/errors.hpp"
#include "oselmq/matrix.hpp"
#include "oselmq/oselm.hpp"
#include "oselmq/rng.hpp"

using namespace oselmq;

namespace {

AgentConfig small_cfg() {
  AgentConfig cfg;
  cfg.n_tilde = 8;
  cfg.delta = 0.5;
  cfg.use_l2 = true;
  cfg.use_lipschitz = true;
  cfg.eps1 = 1.0;  // deterministic greedy keeps tests reproducible
  cfg.eps2 = 0.0;
  cfg.terminal_reward = -1.0;
  cfg.store_terminal = true;
  cfg.seed = 9;
  return cfg;
}

Experience make_exp(double r, int d, double fill = 0.1) {
  Experience e;
  e.s = {fill, fill, fill, fill};
  e.a = 0;
  e.r = r;
  e.s_next = {fill + 0.01, fill, fill, fill};
  e.d = d;
  return e;
}

// Drives act+observe pairs with non-terminal steps until the initial batch
// solve fires, returning how many steps that took.
std::size_t drive_to_init(OselmAgent& agent, double r = 1.0) {
  for (std::size_t i = 1; i <= 10000; ++i) {
    Experience e = make_exp(r, 0, 0.01 * static_cast<double>(i % 7));
    agent.act(e.s);
    if (agent.observe(e, false).init_trained) return i;
  }
  return 0;
}

}  // namespace

TEST_SUITE("agent") {

TEST_CASE("config validation rejects bad settings") {
  AgentConfig ok = small_cfg();
  CHECK_NOTHROW(ok.validate());

  AgentConfig c = ok;
  c.n_tilde = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.eps1 = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.eps2 = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.gamma = 1.0001;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.use_l2 = true;
  c.delta = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.update_step = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.clip_lo = 2.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.action_codes = {0.5};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.action_codes = {0.5, 0.5};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.input_scale = {1.0, 0.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.input_scale = {1.0, -2.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("encode_input appends the action code and applies the scale") {
  AgentConfig cfg = small_cfg();
  cfg.input_scale = {0.5, 1.0, 10.0, 1.5};
  const std::vector<double> s = {1.0, 2.0, 3.0, 4.0};
  const Matrix x = encode_input(s, 1, cfg);
  CHECK(x.rows() == 1);
  CHECK(x.cols() == 5);
  CHECK(x(0, 0) == 0.5);
  CHECK(x(0, 1) == 2.0);
  CHECK(x(0, 2) == 30.0);
  CHECK(x(0, 3) == 6.0);
  CHECK(x(0, 4) == 0.5);  // code of action 1

  cfg.input_scale.clear();
  const Matrix raw = encode_input(s, 0, cfg);
  CHECK(raw(0, 2) == 3.0);
  CHECK(raw(0, 4) == -0.5);

  CHECK_THROWS_AS(encode_input(s, 2, cfg), ConfigError);
  CHECK_THROWS_AS(encode_input(s, -1, cfg), ConfigError);
}

TEST_CASE("draw_q_net spans both signs with zero bias") {
  AgentConfig cfg = small_cfg();
  cfg.n_tilde = 32;
  cfg.use_lipschitz = false;
  Rng rng(4);
  const ElmParams p = draw_q_net(cfg, 4, rng);
  CHECK(p.shape.n == 5);
  CHECK(p.shape.n_tilde == 32);
  CHECK(p.shape.m == 1);
  bool has_neg = false, has_pos = false;
  for (double v : p.alpha.data()) {
    CHECK(v >= -1.0);
    CHECK(v < 1.0);
    has_neg = has_neg || v < 0.0;
    has_pos = has_pos || v > 0.0;
  }
  CHECK(has_neg);
  CHECK(has_pos);
  for (double v : p.bias.data()) CHECK(v == 0.0);

  cfg.use_lipschitz = true;
  Rng rng2(4);
  const ElmParams q = draw_q_net(cfg, 4, rng2);
  CHECK(sigma_max(q.alpha) == doctest::Approx(1.0).epsilon(1e-6));
  // The spectral rescale changes alpha only; the rest of the stream is
  // untouched, so beta matches the unnormalized draw exactly.
  CHECK(q.beta == p.beta);
}

TEST_CASE("select_action is greedy at the configured rate") {
  AgentConfig cfg = small_cfg();
  cfg.eps1 = 0.7;
  Rng init_rng(2);
  OselmState net(draw_q_net(cfg, 4, init_rng));
  Rng rng(1234);
  const std::vector<double> s = {0.01, -0.02, 0.005, 0.03};
  int greedy = 0;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) {
    if (select_action(net, s, cfg, rng).greedy) ++greedy;
  }
  const double frac = static_cast<double>(greedy) / trials;
  CHECK(std::abs(frac - 0.7) <= 0.0043);  // three sigma
}

TEST_CASE("greedy ties break to the lowest action index") {
  AgentConfig cfg = small_cfg();
  cfg.eps1 = 1.0;
  ElmParams p;
  p.shape = NetworkShape{5, 4, 1};
  p.alpha = Matrix(5, 4, 0.3);
  p.bias = Matrix(1, 4, 0.0);
  p.beta = Matrix(4, 1, 0.0);  // all Q-values identically zero
  OselmState net(std::move(p));
  Rng rng(5);
  const std::vector<double> s = {0.1, 0.2, 0.3, 0.4};
  for (int i = 0; i < 20; ++i) {
    const ActionChoice c = select_action(net, s, cfg, rng);
    CHECK(c.greedy);
    CHECK(c.action == 0);
  }
}

TEST_CASE("compute_target covers terminal, untrained and trained cases") {
  AgentConfig cfg = small_cfg();
  Rng rng(8);
  OselmState untrained(draw_q_net(cfg, 4, rng));

  Experience term = make_exp(-1.0, 1);
  CHECK(compute_target(term, untrained, cfg) == -1.0);

  // An untrained target network contributes no bootstrap even off-terminal.
  Experience live = make_exp(0.0, 0);
  CHECK(compute_target(live, untrained, cfg) == 0.0);
  live.r = 0.25;
  CHECK(compute_target(live, untrained, cfg) == 0.25);

  // Out-of-range rewards clip.
  Experience big = make_exp(-5.0, 1);
  CHECK(compute_target(big, untrained, cfg) == cfg.clip_lo);
  big.r = 7.0;
  CHECK(compute_target(big, untrained, cfg) == cfg.clip_hi);

  // A trained target bootstraps with the discounted best Q.
  OselmState trained(draw_q_net(cfg, 4, rng));
  const Matrix x0 = random_uniform(8, 5, rng, -1.0, 1.0);
  const Matrix t0 = random_uniform(8, 1, rng, -0.5, 0.5);
  trained.init_train(x0, t0, cfg.delta);
  Experience e = make_exp(0.0, 0);
  const std::vector<double> q = q_values(trained, e.s_next, cfg);
  const double expect = clip(cfg.clip_lo, cfg.gamma * std::max(q[0], q[1]), cfg.clip_hi);
  CHECK(compute_target(e, trained, cfg) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("initial training fires once the step count reaches the width") {
  AgentConfig cfg = small_cfg();
  OselmAgent agent(cfg, 4);
  CHECK(agent.global_step() == 0);
  std::size_t inits = 0;
  for (std::size_t i = 1; i <= 8; ++i) {
    Experience e = make_exp(1.0, 0, 0.01 * static_cast<double>(i));
    agent.act(e.s);
    CHECK(agent.global_step() == i);
    const StepOutcome out = agent.observe(e, false);
    CHECK(out.stored);
    if (out.init_trained) {
      ++inits;
      CHECK(i == 8);
    } else {
      CHECK_FALSE(agent.nets().theta1.trained());
    }
  }
  CHECK(inits == 1);
  CHECK(agent.nets().theta1.trained());
  CHECK(agent.buffer_size() == 0);
  // The target network only follows on an explicit sync.
  CHECK_FALSE(agent.nets().theta2.trained());
}

TEST_CASE("live-reward substitution pins non-failure teachers to zero") {
  AgentConfig cfg = small_cfg();  // live_reward defaults to 0.0
  OselmAgent agent(cfg, 4);
  // Seven live steps at env reward +1, then a failure at env reward +1:
  // stored rewards become 0 and terminal_reward, so the initial teachers
  // are exactly {0 x7, -1}.
  for (std::size_t i = 1; i <= 7; ++i) {
    Experience e = make_exp(1.0, 0, 0.01 * static_cast<double>(i));
    agent.act(e.s);
    agent.observe(e, false);
  }
  Experience fail = make_exp(1.0, 1);
  agent.act(fail.s);
  const StepOutcome out = agent.observe(fail, true);
  CHECK(out.init_trained);
  CHECK(agent.teacher_min() == -1.0);
  CHECK(agent.teacher_max() == 0.0);
}

TEST_CASE("a step-limit terminal stores at the live reward, not the penalty") {
  AgentConfig cfg = small_cfg();
  OselmAgent agent(cfg, 4);
  for (std::size_t i = 1; i <= 7; ++i) {
    Experience e = make_exp(1.0, 0, 0.01 * static_cast<double>(i));
    agent.act(e.s);
    agent.observe(e, false);
  }
  Experience cap = make_exp(1.0, 1);
  agent.act(cap.s);
  CHECK(agent.observe(cap, /*failure=*/false).init_trained);
  // All eight teachers sit at the live reward; the penalty never applied.
  CHECK(agent.teacher_min() == 0.0);
  CHECK(agent.teacher_max() == 0.0);
}

TEST_CASE("raw live reward passes the env reward through") {
  AgentConfig cfg = small_cfg();
  cfg.live_reward.reset();
  OselmAgent agent(cfg, 4);
  drive_to_init(agent, 0.5);
  CHECK(agent.teacher_min() == 0.5);
  CHECK(agent.teacher_max() == 0.5);
}

TEST_CASE("store_terminal=false drops terminal transitions entirely") {
  AgentConfig cfg = small_cfg();
  cfg.n_tilde = 4;
  cfg.store_terminal = false;
  OselmAgent agent(cfg, 4);
  for (std::size_t i = 1; i <= 3; ++i) {
    Experience e = make_exp(1.0, 0, 0.02 * static_cast<double>(i));
    agent.act(e.s);
    CHECK(agent.observe(e, false).stored);
  }
  Experience fail = make_exp(1.0, 1);
  agent.act(fail.s);
  const StepOutcome out = agent.observe(fail, true);
  CHECK_FALSE(out.stored);
  CHECK_FALSE(out.init_trained);
  CHECK(agent.buffer_size() == 3);
  // The next live step completes the batch and triggers the solve.
  Experience e = make_exp(1.0, 0, 0.09);
  agent.act(e.s);
  CHECK(agent.observe(e, false).init_trained);
}

TEST_CASE("observe validates the done flag") {
  OselmAgent agent(small_cfg(), 4);
  Experience e = make_exp(0.0, 2);
  CHECK_THROWS_AS(agent.observe(e, false), ConfigError);
}

TEST_CASE("eps2 gates sequential updates") {
  AgentConfig cfg = small_cfg();
  cfg.eps2 = 1.0;
  OselmAgent agent(cfg, 4);
  drive_to_init(agent);
  for (int i = 0; i < 5; ++i) {
    Experience e = make_exp(1.0, 0, 0.03 * (i + 1));
    agent.act(e.s);
    CHECK(agent.observe(e, false).seq_trained);
  }

  AgentConfig off = small_cfg();
  off.eps2 = 0.0;
  OselmAgent frozen(off, 4);
  drive_to_init(frozen);
  const Matrix beta_after_init = frozen.nets().theta1.params().beta;
  for (int i = 0; i < 5; ++i) {
    Experience e = make_exp(1.0, 0, 0.03 * (i + 1));
    frozen.act(e.s);
    CHECK_FALSE(frozen.observe(e, false).seq_trained);
  }
  CHECK(frozen.nets().theta1.params().beta == beta_after_init);
}

TEST_CASE("target refresh follows the update_step cadence") {
  AgentConfig cfg = small_cfg();
  cfg.eps2 = 1.0;
  cfg.update_step = 2;
  OselmAgent agent(cfg, 4);
  drive_to_init(agent);

  agent.end_episode(1);  // 1 % 2 != 0: no refresh
  CHECK_FALSE(agent.nets().theta2.trained());
  agent.end_episode(2);
  CHECK(agent.nets().theta2.trained());
  CHECK(agent.nets().theta2.params().beta == agent.nets().theta1.params().beta);

  // Train past the sync point; the banks drift apart until the next refresh.
  Experience e = make_exp(1.0, 0, 0.05);
  agent.act(e.s);
  agent.observe(e, false);
  CHECK_FALSE(agent.nets().theta2.params().beta == agent.nets().theta1.params().beta);
  agent.end_episode(4);
  CHECK(agent.nets().theta2.params().beta == agent.nets().theta1.params().beta);
}

TEST_CASE("input weights never move after construction") {
  AgentConfig cfg = small_cfg();
  cfg.eps2 = 1.0;
  OselmAgent agent(cfg, 4);
  const Matrix alpha0 = agent.nets().theta1.params().alpha;
  drive_to_init(agent);
  for (int i = 0; i < 50; ++i) {
    Experience e = make_exp(1.0, 0, 0.01 * (i % 9));
    agent.act(e.s);
    agent.observe(e, false);
  }
  agent.end_episode(2);
  CHECK(agent.nets().theta1.params().alpha == alpha0);
  CHECK(agent.nets().theta2.params().alpha == alpha0);
}

TEST_CASE("reset_parameters redraws the nets and clears progress") {
  AgentConfig cfg = small_cfg();
  OselmAgent agent(cfg, 4);
  drive_to_init(agent);
  const Matrix alpha0 = agent.nets().theta1.params().alpha;
  CHECK(agent.nets().theta1.trained());
  agent.reset_parameters();
  CHECK(agent.global_step() == 0);
  CHECK(agent.buffer_size() == 0);
  CHECK_FALSE(agent.nets().theta1.trained());
  CHECK_FALSE(agent.nets().theta1.params().alpha == alpha0);
  // A reset keeps the normalization contract.
  CHECK(sigma_max(agent.nets().theta1.params().alpha) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("teachers stay inside the clipping range under wild rewards") {
  AgentConfig cfg = small_cfg();
  cfg.live_reward.reset();  // pass env rewards through unmodified
  cfg.eps2 = 1.0;
  cfg.terminal_reward = -9.0;
  OselmAgent agent(cfg, 4);
  Rng noise(3);
  for (int i = 0; i < 300; ++i) {
    Experience e = make_exp(noise.uniform(-6.0, 6.0), 0, noise.uniform(-0.2, 0.2));
    agent.act(e.s);
    const bool failure = i % 37 == 36;
    e.d = failure ? 1 : 0;
    agent.observe(e, failure);
    if (i % 9 == 8) agent.end_episode(static_cast<std::size_t>(i / 9) + 1);
  }
  CHECK(agent.teacher_min() >= cfg.clip_lo);
  CHECK(agent.teacher_max() <= cfg.clip_hi);
  CHECK(agent.teacher_min() == cfg.clip_lo);  // -9 terminal clips exactly
  CHECK(agent.teacher_max() == cfg.clip_hi);  // +6 live rewards clip exactly
}

TEST_CASE("lipschitz_bound reflects the normalization mode") {
  AgentConfig cfg = small_cfg();
  cfg.eps2 = 1.0;
  OselmAgent agent(cfg, 4);
  drive_to_init(agent);
  const Matrix& beta = agent.nets().theta1.params().beta;
  CHECK(agent.lipschitz_bound() == doctest::Approx(sigma_max(beta)).epsilon(1e-12));

  AgentConfig plain = small_cfg();
  plain.use_lipschitz = false;
  plain.use_l2 = true;
  OselmAgent rough(plain, 4);
  drive_to_init(rough);
  const double expect = sigma_max(rough.nets().theta1.params().alpha) *
                        sigma_max(rough.nets().theta1.params().beta);
  CHECK(rough.lipschitz_bound() == doctest::Approx(expect).epsilon(1e-12));
}

}  // TEST_SUITE
