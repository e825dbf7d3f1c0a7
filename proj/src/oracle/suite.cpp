#include <cmath>
#include <ostream>
#include <sstream>

#include "oselmq/agent.hpp"
#include "oselmq/errors.hpp"
#include "oselmq/oracle.hpp"
#include "oselmq/oselm.hpp"
#include "oselmq/rng.hpp"

namespace oselmq::oracle {

namespace {

struct Reporter {
  std::ostream& os;
  int failures = 0;

  void check(const std::string& name, bool ok, const std::string& detail) {
    os << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) os << " (" << detail << ")";
    os << "\n";
    if (!ok) ++failures;
  }
};

double rel_frobenius(const Matrix& got, const Matrix& want) {
  const double denom = frobenius_norm(want);
  return frobenius_norm(got - want) / (denom > 0.0 ? denom : 1.0);
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << std::scientific << v;
  return ss.str();
}

}  // namespace

int run_suite(std::ostream& os) {
  Reporter rep{os};
  Rng rng(20240817);

  {  // products against the triple-loop reference
    double worst = 0.0;
    for (int c = 0; c < 20; ++c) {
      const std::size_t a = 1 + rng.uniform_index(24);
      const std::size_t b = 1 + rng.uniform_index(24);
      const std::size_t d = 1 + rng.uniform_index(24);
      const Matrix x = random_uniform(a, b, rng, -1.0, 1.0);
      const Matrix y = random_uniform(b, d, rng, -1.0, 1.0);
      worst = std::max(worst, rel_frobenius(matmul(x, y), naive_matmul(x, y)));
    }
    rep.check("matmul vs triple-loop reference", worst <= 1e-12, "max rel err " + fmt(worst));
  }

  {  // inverse residual
    Matrix a = random_uniform(64, 64, rng, -1.0, 1.0);
    Matrix spd = matmul(transpose(a), a);
    for (std::size_t i = 0; i < 64; ++i) spd(i, i) += 1.0;
    const double resid = frobenius_norm(matmul(spd, inverse(spd)) - Matrix::identity(64));
    rep.check("inverse residual |A A^-1 - I|_F", resid <= 1e-8, fmt(resid));
  }

  {  // largest singular value against the Jacobi eigensolver
    double worst = 0.0;
    for (int c = 0; c < 20; ++c) {
      const std::size_t r = 1 + rng.uniform_index(32);
      const std::size_t cc = 1 + rng.uniform_index(32);
      const Matrix a = random_uniform(r, cc, rng);
      worst = std::max(worst, std::abs(sigma_max(a) - jacobi_sigma_max(a)));
    }
    rep.check("sigma_max vs Jacobi", worst <= 1e-8, "max abs err " + fmt(worst));
  }

  {  // sigma_max^2 <= squared Frobenius norm
    bool ok = true;
    for (int c = 0; c < 20; ++c) {
      const Matrix a = random_uniform(1 + rng.uniform_index(16), 1 + rng.uniform_index(16),
                                      rng, -1.0, 1.0);
      const double s = sigma_max(a);
      const double f = frobenius_norm(a);
      if (s * s > f * f * (1.0 + 1e-12)) ok = false;
    }
    rep.check("sigma_max^2 bounded by squared Frobenius norm", ok, "");
  }

  {  // forward pass against scalar loops
    NetworkShape shape{5, 32, 1};
    const ElmParams params = elm_init(shape, rng, false);
    const Matrix x = random_uniform(8, 5, rng, -2.0, 2.0);
    const double err = rel_frobenius(elm_predict(params, x), relu_forward(params, x));
    rep.check("elm_predict vs scalar reference", err <= 1e-12, "rel err " + fmt(err));
  }

  {  // regularized batch solve against the long-double reference
    NetworkShape shape{5, 16, 1};
    ElmParams params = elm_init(shape, rng, false);
    const Matrix x = random_uniform(48, 5, rng, -1.0, 1.0);
    const Matrix t = random_uniform(48, 1, rng, -1.0, 1.0);
    params = elm_fit(std::move(params), x, t, 0.5);
    const Matrix want = ridge_solve(hidden(params, x), t, 0.5);
    const double err = rel_frobenius(params.beta, want);
    rep.check("elm_fit vs long-double ridge solve", err <= 1e-9, "rel err " + fmt(err));
  }

  {  // sequential updates equal the batch solve over the union of data
    NetworkShape shape{5, 16, 1};
    ElmParams params = elm_init(shape, rng, false);
    OselmState st(params);
    Matrix all_x(16 + 200, 5);
    Matrix all_t(16 + 200, 1);
    const Matrix x0 = random_uniform(16, 5, rng, -1.0, 1.0);
    const Matrix t0 = random_uniform(16, 1, rng, -1.0, 1.0);
    for (std::size_t r = 0; r < 16; ++r) {
      std::copy(x0.row(r).begin(), x0.row(r).end(), all_x.row(r).begin());
      all_t(r, 0) = t0(r, 0);
    }
    st.init_train(x0, t0, 0.5);
    for (std::size_t r = 0; r < 200; ++r) {
      const Matrix x = random_uniform(1, 5, rng, -1.0, 1.0);
      const Matrix t = random_uniform(1, 1, rng, -1.0, 1.0);
      std::copy(x.row(0).begin(), x.row(0).end(), all_x.row(16 + r).begin());
      all_t(16 + r, 0) = t(0, 0);
      st.seq_train(x, t);
    }
    const Matrix want = ridge_solve(hidden(params, all_x), all_t, 0.5);
    const double err = rel_frobenius(st.params().beta, want);
    rep.check("recursive updates vs batch ridge solve", err <= 1e-5, "rel err " + fmt(err));
  }

  {  // teacher assembly
    AgentConfig cfg;
    cfg.n_tilde = 8;
    cfg.seed = 7;
    NetworkShape shape{5, 8, 1};
    ElmParams params = elm_init(shape, rng, false);
    // Force a known Q landscape: zero alpha, bias 1 -> hidden all ones.
    for (double& v : params.alpha.data()) v = 0.0;
    for (double& v : params.bias.data()) v = 1.0;
    for (double& v : params.beta.data()) v = 0.0625;  // Q = 8 * 0.0625 = 0.5
    OselmState target(params);
    Experience e{{0.1, 0.2, 0.3, 0.4}, 0, 1.0, {0.1, 0.2, 0.3, 0.4}, 0};
    const double got = compute_target(e, target, cfg);
    const bool ok1 = std::abs(got - 1.0) < 1e-12;  // clip(1 + 0.99*0.5) = 1
    e.d = 1;
    e.r = -1.0;
    const double got_term = compute_target(e, target, cfg);
    const bool ok2 = std::abs(got_term + 1.0) < 1e-12;
    rep.check("clipped teacher assembly", ok1 && ok2,
              "got " + fmt(got) + ", " + fmt(got_term));
  }

  {  // analytic gradients against central differences
    Rng drng(99);
    MlpParams params = mlp_init(4, 8, 2, drng);
    const Matrix s = random_uniform(16, 4, drng, -1.0, 1.0);
    std::vector<int> actions(16);
    std::vector<double> targets(16);
    for (std::size_t i = 0; i < 16; ++i) {
      actions[i] = static_cast<int>(drng.uniform_index(2));
      targets[i] = drng.uniform(-2.0, 2.0);
    }
    const MlpGrads got = dqn_loss_gradients(params, s, actions, targets);
    const MlpGrads want = fd_gradients(params, s, actions, targets, 1e-5);
    double num = 0.0, den = 0.0;
    for (auto field : {&MlpGrads::w1, &MlpGrads::b1, &MlpGrads::w2, &MlpGrads::b2}) {
      const Matrix diff = got.*field - want.*field;
      num += frobenius_norm(diff) * frobenius_norm(diff);
      den += frobenius_norm(want.*field) * frobenius_norm(want.*field);
    }
    const double rel = std::sqrt(num) / std::sqrt(den);
    rep.check("DQN gradients vs finite differences", rel <= 1e-4, "rel err " + fmt(rel));
  }

  {  // dynamics against the independently coded step
    Rng crng(3);
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
      CartPoleState s;
      s.x = crng.uniform(-2.0, 2.0);
      s.x_dot = crng.uniform(-2.0, 2.0);
      s.theta = crng.uniform(-0.2, 0.2);
      s.theta_dot = crng.uniform(-2.0, 2.0);
      const double force = crng.uniform() < 0.5 ? -10.0 : 10.0;
      const CartPoleState got = CartPole::integrate(s, force);
      const CartPoleState want = cartpole_step_ref(s, force);
      worst = std::max({worst, std::abs(got.x - want.x), std::abs(got.x_dot - want.x_dot),
                        std::abs(got.theta - want.theta),
                        std::abs(got.theta_dot - want.theta_dot)});
    }
    rep.check("dynamics step vs reference", worst <= 1e-14, "max abs err " + fmt(worst));
  }

  {  // fixed-point operators against float with a half-step rounding bound
    Rng frng(11);
    double worst = 0.0;
    for (int c = 0; c < 10000; ++c) {
      const FixedQ20 a = fx_convert(frng.uniform(-8.0, 8.0));
      const FixedQ20 b = fx_convert(frng.uniform(-8.0, 8.0));
      worst = std::max(worst, std::abs(fx_to_real(fx_add(a, b)) -
                                       (fx_to_real(a) + fx_to_real(b))));
      worst = std::max(worst, std::abs(fx_to_real(fx_mul(a, b)) -
                                       fx_to_real(a) * fx_to_real(b)));
      if (std::abs(fx_to_real(b)) >= 0.25) {
        worst = std::max(worst, std::abs(fx_to_real(fx_div(a, b)) -
                                         fx_to_real(a) / fx_to_real(b)));
      }
    }
    rep.check("fixed-point ops vs float", worst <= 0x1.0p-19, "max abs err " + fmt(worst));
  }

  {  // fixed-point forward pass against the dequantized float dataflow
    Rng frng(12);
    NetworkShape shape{5, 64, 1};
    ElmParams params;
    params.shape = shape;
    params.alpha = random_uniform(5, 64, frng, -0.25, 0.25);
    params.bias = random_uniform(1, 64, frng, 0.0, 1.0);
    params.beta = random_uniform(64, 1, frng, -2.0, 2.0);
    OselmState st(params);
    const Matrix x0 = random_uniform(64, 5, frng, -1.0, 1.0);
    const Matrix t0 = random_uniform(64, 1, frng, -1.0, 1.0);
    st.init_train(x0, t0, 0.5);
    OselmState target(params);
    target.sync_learned_from(st);
    FixedOselmState fx = FixedOselmState::from_float(st, target);
    double worst = 0.0;
    std::vector<FixedQ20> x(5);
    for (int c = 0; c < 2000; ++c) {
      for (std::size_t i = 0; i < 5; ++i) x[i] = fx_convert(frng.uniform(-8.0, 8.0));
      const double got = fx_to_real(fx_predict(fx, x));
      const double want = quantized_float_predict(fx, x, BetaBank::online);
      worst = std::max(worst, std::abs(got - want));
    }
    rep.check("fixed-point forward vs dequantized float", worst <= 1e-3,
              "max abs err " + fmt(worst));
  }

  {  // optimizer bias correction: first step moves by ~lr for unit gradient
    MlpParams p;
    p.w1 = Matrix(1, 1, 0.0);
    p.b1 = Matrix(1, 1, 0.0);
    p.w2 = Matrix(1, 1, 0.0);
    p.b2 = Matrix(1, 1, 0.0);
    AdamState adam(p, 0.01);
    MlpGrads g;
    g.w1 = Matrix(1, 1, 1.0);
    g.b1 = Matrix(1, 1, 0.0);
    g.w2 = Matrix(1, 1, 0.0);
    g.b2 = Matrix(1, 1, 0.0);
    adam_step(p, adam, g);
    const double moved = -p.w1(0, 0);
    rep.check("optimizer first-step magnitude", std::abs(moved - 0.01) <= 1e-6,
              "step " + fmt(moved));
  }

  os << (rep.failures == 0 ? "all checks passed\n"
                           : std::to_string(rep.failures) + " check(s) failed\n");
  return rep.failures;
}

}  // namespace oselmq::oracle
