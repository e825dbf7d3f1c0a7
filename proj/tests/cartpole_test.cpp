#include <doctest.h>

#include <cmath>

#include "oselmq/cartpole.hpp"
#include "oselmq/errors.hpp"
#include "oselmq/oracle.hpp"
#include "oselmq/rng.hpp"

using namespace oselmq;
using namespace oselmq::oracle;

TEST_SUITE("cartpole") {

TEST_CASE("one integration step from the origin, frozen values") {
  const CartPoleState s0{};
  const CartPoleState s1 = CartPole::integrate(s0, CartPole::kForceMag);
  // Hand-computed explicit-Euler step: temp = 10 / 1.1, theta_acc =
  // -temp / (0.5 * (4/3 - 0.1/1.1)), x_acc = temp - 0.05 * theta_acc / 1.1.
  CHECK(s1.x == 0.0);
  CHECK(s1.theta == 0.0);
  CHECK(std::abs(s1.x_dot - 0.19512195121951222) <= 1e-12);
  CHECK(std::abs(s1.theta_dot - (-0.29268292682926828)) <= 1e-12);

  // Pushing left mirrors the signs.
  const CartPoleState s1l = CartPole::integrate(s0, -CartPole::kForceMag);
  CHECK(std::abs(s1l.x_dot + s1.x_dot) <= 1e-15);
  CHECK(std::abs(s1l.theta_dot + s1.theta_dot) <= 1e-15);
}

TEST_CASE("integrate matches the reference dynamics on random states") {
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    CartPoleState s;
    s.x = rng.uniform(-2.4, 2.4);
    s.x_dot = rng.uniform(-3.0, 3.0);
    s.theta = rng.uniform(-0.2, 0.2);
    s.theta_dot = rng.uniform(-3.0, 3.0);
    const double force = rng.uniform() < 0.5 ? -CartPole::kForceMag : CartPole::kForceMag;
    const CartPoleState a = CartPole::integrate(s, force);
    const CartPoleState b = cartpole_step_ref(s, force);
    CHECK(std::abs(a.x - b.x) <= 1e-12);
    CHECK(std::abs(a.x_dot - b.x_dot) <= 1e-12);
    CHECK(std::abs(a.theta - b.theta) <= 1e-12);
    CHECK(std::abs(a.theta_dot - b.theta_dot) <= 1e-12);
  }
}

TEST_CASE("reset draws all four components uniformly in [-0.05, 0.05]") {
  CartPole env(42);
  for (int i = 0; i < 50; ++i) {
    const CartPoleState s = env.reset();
    for (double v : s.as_array()) {
      CHECK(v >= -0.05);
      CHECK(v <= 0.05);
    }
  }
  // Deterministic per seed.
  CartPole a(7), b(7);
  const auto sa = a.reset().as_array();
  const auto sb = b.reset().as_array();
  for (int i = 0; i < 4; ++i) CHECK(sa[i] == sb[i]);
}

TEST_CASE("stepping requires reset and a valid action") {
  CartPole env(1);
  CHECK_THROWS_AS(env.step(0), StateError);
  env.reset();
  CHECK_THROWS_AS(env.step(2), ConfigError);
  CHECK_THROWS_AS(env.step(-1), ConfigError);
  CHECK_NOTHROW(env.step(1));
}

TEST_CASE("reward is one per step including the terminal step") {
  CartPole env(3);
  env.reset();
  double total = 0.0;
  StepResult r;
  std::size_t steps = 0;
  do {
    r = env.step(1);  // constant push fails fast
    total += r.reward;
    ++steps;
    CHECK(r.reward == 1.0);
  } while (!r.done);
  CHECK(total == static_cast<double>(steps));
  CHECK(env.status().steps == steps);
  CHECK(r.reason == DoneReason::pole_fell);
  CHECK(steps < 20);  // constant one-sided force drops the pole quickly
  CHECK_THROWS_AS(env.step(1), StateError);
}

TEST_CASE("episodes truncate at 200 steps") {
  // Alternating pushes keep the pole up long enough only from a lucky
  // start, so drive the limit with a scripted balanced state instead:
  // feed the env the action opposing the pole lean each step.
  CartPole env(12);
  CartPoleState s = env.reset();
  StepResult r;
  std::size_t steps = 0;
  do {
    const int action = s.theta + 0.1 * s.theta_dot > 0.0 ? 1 : 0;
    r = env.step(action);
    s = r.state;
    ++steps;
  } while (!r.done && steps < 500);
  CHECK(r.done);
  if (r.reason == DoneReason::step_limit) {
    CHECK(steps == CartPole::kMaxSteps);
  }
  CHECK(steps <= CartPole::kMaxSteps);
}

TEST_CASE("termination reasons match the threshold crossed") {
  CartPole env(5);
  env.reset();
  StepResult r;
  do {
    r = env.step(0);
  } while (!r.done);
  CHECK((r.reason == DoneReason::pole_fell || r.reason == DoneReason::cart_out));
  if (r.reason == DoneReason::pole_fell) {
    CHECK(std::abs(r.state.theta) > CartPole::kThetaThreshold);
  } else {
    CHECK(std::abs(r.state.x) > CartPole::kXThreshold);
  }
}

}  // TEST_SUITE
