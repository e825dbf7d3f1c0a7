#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "oselmq/agent.hpp"
#include "oselmq/elm.hpp"
#include "oselmq/errors.hpp"
#include "oselmq/fixedq20.hpp"
#include "oselmq/matrix.hpp"
#include "oselmq/oracle.hpp"
#include "oselmq/oselm.hpp"
#include "oselmq/rng.hpp"

using namespace oselmq;
using namespace oselmq::oracle;

namespace {

// Small trained float network pair with |weights| well inside Q20 range.
std::pair<OselmState, OselmState> trained_pair(std::uint64_t seed) {
  AgentConfig cfg;
  cfg.n_tilde = 16;
  cfg.use_l2 = true;
  cfg.use_lipschitz = true;
  cfg.delta = 0.5;
  Rng rng(seed);
  ElmParams params = draw_q_net(cfg, 4, rng);
  OselmState theta1(params);
  OselmState theta2(params);
  const Matrix x0 = random_uniform(16, 5, rng, -1.0, 1.0);
  const Matrix t0 = random_uniform(16, 1, rng, -1.0, 1.0);
  theta1.init_train(x0, t0, 0.5);
  theta2.sync_learned_from(theta1);
  return {std::move(theta1), std::move(theta2)};
}

std::vector<FixedQ20> fx_vector(const std::vector<double>& v) {
  std::vector<FixedQ20> out;
  out.reserve(v.size());
  for (double d : v) out.push_back(fx_convert(d));
  return out;
}

}  // namespace

TEST_SUITE("fixedq20") {

TEST_CASE("conversion literals and round trip") {
  CHECK(fx_convert(1.0).raw == 1048576);
  CHECK(fx_convert(1.0) == kFxOne);
  CHECK(fx_convert(-1.0).raw == -1048576);
  CHECK(fx_convert(0.0).raw == 0);
  CHECK(fx_to_real(FixedQ20{1048576}) == 1.0);
  CHECK(fx_to_real(fx_convert(0.25)) == 0.25);
  // Resolution: one raw unit is 2^-20.
  CHECK(fx_to_real(FixedQ20{1}) == doctest::Approx(9.5367431640625e-7));
}

TEST_CASE("conversion rounds ties to even") {
  // 1.5 and 2.5 raw units both land on raw 2 under round-to-nearest-even.
  const double ulp = 1.0 / 1048576.0;
  CHECK(fx_convert(1.5 * ulp).raw == 2);
  CHECK(fx_convert(2.5 * ulp).raw == 2);
  CHECK(fx_convert(3.5 * ulp).raw == 4);
  CHECK(fx_convert(-1.5 * ulp).raw == -2);
}

TEST_CASE("conversion saturates out-of-range values and counts overflow") {
  std::uint64_t ovf = 0;
  CHECK(fx_convert(3000.0, &ovf).raw == std::numeric_limits<std::int32_t>::max());
  CHECK(ovf == 1);
  CHECK(fx_convert(-3000.0, &ovf).raw == std::numeric_limits<std::int32_t>::min());
  CHECK(ovf == 2);
  // The largest representable magnitude is just under 2048.
  CHECK(fx_convert(2047.0, &ovf).raw == 2047 * 1048576);
  CHECK(ovf == 2);
}

TEST_CASE("addition and subtraction saturate") {
  std::uint64_t ovf = 0;
  const FixedQ20 big{std::numeric_limits<std::int32_t>::max()};
  CHECK(fx_add(big, kFxOne, &ovf) == big);
  CHECK(ovf == 1);
  const FixedQ20 small{std::numeric_limits<std::int32_t>::min()};
  CHECK(fx_sub(small, kFxOne, &ovf) == small);
  CHECK(ovf == 2);
  CHECK(fx_add(fx_convert(0.25), fx_convert(0.5), &ovf) == fx_convert(0.75));
  CHECK(ovf == 2);
}

TEST_CASE("multiplication rounds half up at the dropped bit") {
  CHECK(fx_mul(fx_convert(0.5), fx_convert(0.5)).raw == 262144);  // 0.25
  // Product 2^19 sits exactly halfway between raws 0 and 1: half rounds up.
  CHECK(fx_mul(FixedQ20{1}, fx_convert(0.5)).raw == 1);
  CHECK(fx_mul(FixedQ20{3}, fx_convert(0.5)).raw == 2);  // 1.5 -> 2
  // Rounding is toward +infinity on the half, also for negatives.
  CHECK(fx_mul(FixedQ20{-1}, fx_convert(0.5)).raw == 0);
  CHECK(fx_mul(fx_convert(-1.0), fx_convert(1.0)).raw == -1048576);
}

TEST_CASE("division truncates and rejects a zero divisor") {
  CHECK(fx_div(kFxOne, fx_convert(3.0)).raw == 349525);
  CHECK(fx_div(kFxOne, fx_convert(0.5)).raw == 2097152);  // 2.0
  CHECK(fx_div(fx_convert(-1.0), fx_convert(4.0)).raw == -262144);
  CHECK_THROWS_AS(fx_div(kFxOne, FixedQ20{0}), NumericError);
  std::uint64_t ovf = 0;
  CHECK(fx_div(fx_convert(2000.0), FixedQ20{2}, &ovf).raw ==
        std::numeric_limits<std::int32_t>::max());
  CHECK(ovf == 1);
}

TEST_CASE("from_float quantizes every bank and enforces preconditions") {
  auto [theta1, theta2] = trained_pair(3);
  const FixedOselmState st = FixedOselmState::from_float(theta1, theta2);
  CHECK(st.shape.n == 5);
  CHECK(st.shape.n_tilde == 16);
  CHECK(st.alpha.size() == 80);
  CHECK(st.bias.size() == 16);
  CHECK(st.beta1.size() == 16);
  CHECK(st.beta2.size() == 16);
  CHECK(st.p.size() == 256);
  CHECK(st.overflow_count == 0);
  CHECK(st.alpha[0] == fx_convert(theta1.params().alpha(0, 0)));
  CHECK(st.beta1[5] == fx_convert(theta1.params().beta(5, 0)));

  Rng rng(9);
  OselmState untrained(elm_init(NetworkShape{5, 8, 1}, rng, false));
  CHECK_THROWS_AS(FixedOselmState::from_float(untrained, untrained), StateError);
}

TEST_CASE("sync_target_bank copies the online weights") {
  auto [theta1, theta2] = trained_pair(5);
  FixedOselmState st = FixedOselmState::from_float(theta1, theta2);
  st.beta1[0].raw += 1234;
  CHECK_FALSE(st.beta1 == st.beta2);
  st.sync_target_bank();
  CHECK(st.beta1 == st.beta2);
}

TEST_CASE("fx_predict tracks the quantized float forward pass") {
  auto [theta1, theta2] = trained_pair(7);
  FixedOselmState st = FixedOselmState::from_float(theta1, theta2);
  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const std::vector<FixedQ20> xq = fx_vector(x);
    const double got = fx_to_real(fx_predict(st, xq, BetaBank::online));
    const double want = quantized_float_predict(st, xq, BetaBank::online);
    worst = std::max(worst, std::abs(got - want));
  }
  CHECK(worst <= 1e-3);
  CHECK(st.overflow_count == 0);
}

TEST_CASE("fx_predict distinguishes the beta banks") {
  auto [theta1, theta2] = trained_pair(13);
  FixedOselmState st = FixedOselmState::from_float(theta1, theta2);
  for (auto& b : st.beta2) b.raw = 0;
  const std::vector<FixedQ20> x = fx_vector({0.3, -0.2, 0.1, 0.4, 0.5});
  CHECK(fx_predict(st, x, BetaBank::target).raw == 0);
  CHECK(fx_predict(st, x, BetaBank::online).raw != 0);
}

TEST_CASE("fx_predict validates the input length") {
  auto [theta1, theta2] = trained_pair(15);
  FixedOselmState st = FixedOselmState::from_float(theta1, theta2);
  const std::vector<FixedQ20> x = fx_vector({0.1, 0.2});
  CHECK_THROWS_AS(fx_predict(st, x, BetaBank::online), ShapeError);
}

TEST_CASE("fx_seq_train tracks float recursive least squares") {
  auto [theta1, theta2] = trained_pair(17);
  FixedOselmState st = FixedOselmState::from_float(theta1, theta2);
  Rng rng(19);
  for (int i = 0; i < 50; ++i) {
    Matrix x(1, 5);
    std::vector<double> xv(5);
    for (std::size_t j = 0; j < 5; ++j) {
      xv[j] = rng.uniform(-1.0, 1.0);
      x(0, j) = fx_to_real(fx_convert(xv[j]));  // feed both paths the quantized input
    }
    Matrix t(1, 1);
    t(0, 0) = rng.uniform(-1.0, 1.0);
    theta1.seq_train(x, t);
    fx_seq_train(st, fx_vector(xv), fx_convert(t(0, 0)));
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < 16; ++j) {
    worst = std::max(worst,
                     std::abs(fx_to_real(st.beta1[j]) - theta1.params().beta(j, 0)));
  }
  CHECK(worst <= 1e-2);
  CHECK(st.overflow_count == 0);
}

TEST_CASE("hex dump renders one zero-padded word per line") {
  FixedOselmState st;
  st.shape = NetworkShape{1, 1, 1};
  st.alpha = {fx_convert(1.0)};
  st.bias = {FixedQ20{0}};
  st.beta1 = {fx_convert(-1.0)};
  st.beta2 = {FixedQ20{255}};
  st.p = {fx_convert(0.5)};
  std::ostringstream os;
  write_hex_dump(st, os);
  CHECK(os.str() == "00100000\n00000000\nfff00000\n000000ff\n00080000\n");
}

TEST_CASE("the fixed agent is bit-reproducible and overflow-free") {
  AgentConfig cfg;
  cfg.n_tilde = 8;
  cfg.use_l2 = true;
  cfg.use_lipschitz = true;
  cfg.delta = 0.5;
  cfg.eps1 = 0.7;
  cfg.eps2 = 1.0;
  cfg.terminal_reward = -1.0;
  cfg.store_terminal = true;
  cfg.seed = 21;
  cfg.input_scale = {0.5, 1.0, 10.0, 1.5};

  auto drive = [&cfg]() {
    FixedAgent agent(cfg, 4);
    Rng noise(33);
    for (int i = 0; i < 60; ++i) {
      Experience e;
      e.s = {noise.uniform(-0.1, 0.1), noise.uniform(-1.0, 1.0),
             noise.uniform(-0.1, 0.1), noise.uniform(-1.0, 1.0)};
      e.a = agent.act(e.s);
      e.s_next = e.s;
      const bool failure = i % 23 == 22;
      e.d = failure ? 1 : 0;
      e.r = 1.0;
      agent.observe(e, failure);
      if (i % 11 == 10) agent.end_episode(static_cast<std::size_t>(i / 11) + 1);
    }
    return agent;
  };

  FixedAgent a = drive();
  FixedAgent b = drive();
  CHECK(a.on_device());
  CHECK(a.global_step() == 60);
  CHECK(a.overflow_count() == 0);
  CHECK(a.teacher_min() >= -1.0);
  CHECK(a.teacher_max() <= 1.0);
  REQUIRE(b.on_device());
  CHECK(a.fixed_state().beta1 == b.fixed_state().beta1);
  CHECK(a.fixed_state().p == b.fixed_state().p);
  CHECK(a.overflow_count() == b.overflow_count());
}

}  // TEST_SUITE
