#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "oselmq/elm.hpp"
#include "oselmq/errors.hpp"
#include "oselmq/matrix.hpp"
#include "oselmq/oracle.hpp"
#include "oselmq/oselm.hpp"
#include "oselmq/rng.hpp"

using namespace oselmq;
using namespace oselmq::oracle;

namespace {

double rel_frobenius(const Matrix& a, const Matrix& b) {
  return frobenius_norm(a - b) / std::max(frobenius_norm(b), 1e-300);
}

OselmState trained_state(Rng& rng, const NetworkShape& shape, std::size_t k0,
                         double delta) {
  OselmState st(elm_init(shape, rng, false));
  const Matrix x0 = random_uniform(k0, shape.n, rng, -1.0, 1.0);
  const Matrix t0 = random_uniform(k0, shape.m, rng, -1.0, 1.0);
  st.init_train(x0, t0, delta);
  return st;
}

void append_doubles(std::string& out, std::initializer_list<double> vals) {
  for (double v : vals) {
    char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof(double));
    out.append(buf, sizeof(double));
  }
}

void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

}  // namespace

TEST_SUITE("oselm") {

TEST_CASE("init_train matches the batch ridge solve") {
  Rng rng(3);
  const NetworkShape shape{4, 12, 1};
  ElmParams params = elm_init(shape, rng, false);
  const Matrix x0 = random_uniform(12, 4, rng, -1.0, 1.0);
  const Matrix t0 = random_uniform(12, 1, rng, -1.0, 1.0);

  OselmState st(params);
  CHECK_FALSE(st.trained());
  st.init_train(x0, t0, 0.5);
  CHECK(st.trained());

  const ElmParams batch = elm_fit(params, x0, t0, 0.5);
  CHECK(rel_frobenius(st.params().beta, batch.beta) <= 1e-10);

  // P is the regularized inverse normal matrix.
  const Matrix h0 = hidden(params, x0);
  Matrix normal = matmul(transpose(h0), h0);
  for (std::size_t i = 0; i < normal.rows(); ++i) normal(i, i) += 0.5;
  CHECK(rel_frobenius(st.p(), inverse(normal)) <= 1e-10);
}

TEST_CASE("sequential updates reproduce the cumulative ridge solution") {
  Rng rng(7);
  const NetworkShape shape{3, 8, 1};
  ElmParams params = elm_init(shape, rng, false);
  const std::size_t k0 = 8;
  const std::size_t steps = 50;
  const double delta = 0.5;

  Matrix x_all(k0 + steps, 3);
  Matrix t_all(k0 + steps, 1);
  Rng data(71);
  for (std::size_t i = 0; i < x_all.rows(); ++i) {
    for (std::size_t j = 0; j < 3; ++j) x_all(i, j) = data.uniform(-1.0, 1.0);
    t_all(i, 0) = data.uniform(-1.0, 1.0);
  }

  OselmState st(params);
  Matrix x0(k0, 3), t0(k0, 1);
  for (std::size_t i = 0; i < k0; ++i) {
    for (std::size_t j = 0; j < 3; ++j) x0(i, j) = x_all(i, j);
    t0(i, 0) = t_all(i, 0);
  }
  st.init_train(x0, t0, delta);
  for (std::size_t i = k0; i < x_all.rows(); ++i) {
    Matrix x(1, 3), t(1, 1);
    for (std::size_t j = 0; j < 3; ++j) x(0, j) = x_all(i, j);
    t(0, 0) = t_all(i, 0);
    st.seq_train(x, t);
  }

  const Matrix ref = ridge_solve(hidden(params, x_all), t_all, delta);
  CHECK(rel_frobenius(st.params().beta, ref) <= 1e-5);
}

TEST_CASE("P stays symmetric positive definite over many updates") {
  Rng rng(13);
  OselmState st = trained_state(rng, NetworkShape{3, 16, 1}, 16, 0.5);
  Rng data(131);
  for (int i = 0; i < 10000; ++i) {
    Matrix x(1, 3), t(1, 1);
    for (std::size_t j = 0; j < 3; ++j) x(0, j) = data.uniform(-1.0, 1.0);
    t(0, 0) = data.uniform(-1.0, 1.0);
    st.seq_train(x, t);
  }
  const Matrix& p = st.p();
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) CHECK(p(i, j) == p(j, i));
  CHECK(smallest_eigenvalue_spd(p) > 0.0);
  CHECK(p.all_finite());
}

TEST_CASE("lifecycle violations throw") {
  Rng rng(5);
  const NetworkShape shape{2, 4, 1};
  OselmState st(elm_init(shape, rng, false));
  CHECK_THROWS_AS(st.seq_train(Matrix(1, 2), Matrix(1, 1)), StateError);
  std::ostringstream sink(std::ios::binary);
  CHECK_THROWS_AS(st.save(sink), StateError);
  const Matrix x0 = random_uniform(4, 2, rng, -1.0, 1.0);
  const Matrix t0 = random_uniform(4, 1, rng, -1.0, 1.0);
  CHECK_THROWS_AS(st.init_train(x0, t0, -1.0), ConfigError);
  st.init_train(x0, t0, 0.5);
  CHECK_THROWS_AS(st.init_train(x0, t0, 0.5), StateError);
}

TEST_CASE("a vanishing innovation denominator raises NumericError") {
  // Craft a checkpoint whose P makes s = 1 + h P h^T collapse to zero:
  // n = n_tilde = m = 1, alpha = 1, bias = 0, P = -1, so x = [1] gives
  // h = 1 and s = 0.
  std::string blob = "OSLM";
  append_u32(blob, 1);  // version
  append_u32(blob, 1);  // n
  append_u32(blob, 1);  // n_tilde
  append_u32(blob, 1);  // m
  append_doubles(blob, {1.0});   // alpha
  append_doubles(blob, {0.0});   // bias
  append_doubles(blob, {0.0});   // beta
  append_doubles(blob, {-1.0});  // P
  std::istringstream is(blob);
  OselmState st = OselmState::load(is);
  CHECK(st.trained());
  CHECK_THROWS_AS(st.seq_train(Matrix(1, 1, 1.0), Matrix(1, 1, 0.0)), NumericError);
}

TEST_CASE("checkpoint round trip preserves parameters and predictions") {
  Rng rng(19);
  OselmState st = trained_state(rng, NetworkShape{3, 6, 2}, 10, 1.0);
  std::ostringstream os(std::ios::binary);
  st.save(os);
  std::istringstream is(os.str(), std::ios::binary);
  const OselmState back = OselmState::load(is);
  CHECK(back.trained());
  CHECK(back.params().alpha == st.params().alpha);
  CHECK(back.params().bias == st.params().bias);
  CHECK(back.params().beta == st.params().beta);
  CHECK(back.p() == st.p());
  const Matrix probe = random_uniform(5, 3, rng, -1.0, 1.0);
  CHECK(back.predict(probe) == st.predict(probe));
}

TEST_CASE("malformed checkpoints raise IoError") {
  std::istringstream bad_magic("NOPE....");
  CHECK_THROWS_AS(OselmState::load(bad_magic), IoError);

  Rng rng(19);
  OselmState st = trained_state(rng, NetworkShape{2, 4, 1}, 6, 1.0);
  std::ostringstream os(std::ios::binary);
  st.save(os);
  const std::string full = os.str();
  std::istringstream truncated(full.substr(0, full.size() / 2), std::ios::binary);
  CHECK_THROWS_AS(OselmState::load(truncated), IoError);
}

TEST_CASE("sync_learned_from copies beta and P but not alpha") {
  Rng rng(23);
  const NetworkShape shape{3, 6, 1};
  OselmState src = trained_state(rng, shape, 8, 0.5);
  OselmState dst(elm_init(shape, rng, false));
  const Matrix alpha_before = dst.params().alpha;
  dst.sync_learned_from(src);
  CHECK(dst.trained());
  CHECK(dst.params().beta == src.params().beta);
  CHECK(dst.p() == src.p());
  CHECK(dst.params().alpha == alpha_before);
}

}  // TEST_SUITE
