#include "oselmq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oselmq/errors.hpp"
#include "oselmq/rng.hpp"

namespace oselmq::oracle {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("naive_matmul: incompatible shapes");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double acc = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        acc += static_cast<long double>(a(i, k)) * static_cast<long double>(b(k, j));
      }
      c(i, j) = static_cast<double>(acc);
    }
  }
  return c;
}

double jacobi_sigma_max(const Matrix& a) {
  const std::size_t n = a.cols();
  // S = a^T a, accumulated in long double.
  std::vector<long double> s(n * n, 0.0L);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const long double ari = a(r, i);
      if (ari == 0.0L) continue;
      for (std::size_t j = 0; j < n; ++j) {
        s[i * n + j] += ari * static_cast<long double>(a(r, j));
      }
    }
  }
  long double total = 0.0L;
  for (long double v : s) total += v * v;
  const long double scale = std::sqrt(total);

  for (int sweep = 0; sweep < 100; ++sweep) {
    long double off = 0.0L;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += s[p * n + q] * s[p * n + q];
    if (std::sqrt(2.0L * off) <= 1e-15L * (scale + 1e-300L)) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const long double spq = s[p * n + q];
        if (spq == 0.0L) continue;
        const long double theta = (s[q * n + q] - s[p * n + p]) / (2.0L * spq);
        const long double t =
            (theta >= 0.0L ? 1.0L : -1.0L) /
            (std::abs(theta) + std::sqrt(1.0L + theta * theta));
        const long double c = 1.0L / std::sqrt(1.0L + t * t);
        const long double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const long double skp = s[k * n + p];
          const long double skq = s[k * n + q];
          s[k * n + p] = c * skp - sn * skq;
          s[k * n + q] = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const long double spk = s[p * n + k];
          const long double sqk = s[q * n + k];
          s[p * n + k] = c * spk - sn * sqk;
          s[q * n + k] = sn * spk + c * sqk;
        }
      }
    }
  }
  long double lmax = 0.0L;
  for (std::size_t i = 0; i < n; ++i) lmax = std::max(lmax, s[i * n + i]);
  return static_cast<double>(std::sqrt(std::max(lmax, 0.0L)));
}

double sampled_max_gain(const Matrix& a, std::size_t samples, Rng& rng) {
  const std::size_t n = a.cols();
  std::vector<double> v(n);
  double best = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double norm2 = 0.0;
    for (double& x : v) {
      // Box-Muller-free radial sampling: uniform cube rejected to the unit
      // ball would be slow in high dims; a Gaussian via CLT-12 is plenty
      // for a lower-bound probe.
      double g = -6.0;
      for (int k = 0; k < 12; ++k) g += rng.uniform();
      x = g;
      norm2 += g * g;
    }
    if (norm2 == 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    double gain2 = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += a(r, j) * v[j] * inv;
      gain2 += acc * acc;
    }
    best = std::max(best, std::sqrt(gain2));
  }
  return best;
}

namespace {

// Gaussian elimination with partial pivoting on a long-double system; b has
// `mcols` right-hand sides.
std::vector<long double> solve_ld(std::vector<long double> a, std::vector<long double> b,
                                  std::size_t n, std::size_t mcols) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    long double best = std::abs(a[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const long double v = std::abs(a[r * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < 1e-30L) throw SingularError("oracle solve: singular", col);
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[col * n + j], a[pivot * n + j]);
      for (std::size_t j = 0; j < mcols; ++j)
        std::swap(b[col * mcols + j], b[pivot * mcols + j]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const long double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0L) continue;
      for (std::size_t j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
      for (std::size_t j = 0; j < mcols; ++j) b[r * mcols + j] -= f * b[col * mcols + j];
    }
  }
  std::vector<long double> x(n * mcols, 0.0L);
  for (std::size_t col = 0; col < mcols; ++col) {
    for (std::size_t ri = n; ri-- > 0;) {
      long double acc = b[ri * mcols + col];
      for (std::size_t j = ri + 1; j < n; ++j) acc -= a[ri * n + j] * x[j * mcols + col];
      x[ri * mcols + col] = acc / a[ri * n + ri];
    }
  }
  return x;
}

}  // namespace

Matrix ridge_solve(const Matrix& h, const Matrix& t, double delta) {
  const std::size_t k = h.rows(), n = h.cols(), m = t.cols();
  std::vector<long double> gram(n * n, 0.0L);
  std::vector<long double> rhs(n * m, 0.0L);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const long double hri = h(r, i);
      if (hri == 0.0L) continue;
      for (std::size_t j = 0; j < n; ++j) gram[i * n + j] += hri * static_cast<long double>(h(r, j));
      for (std::size_t j = 0; j < m; ++j) rhs[i * m + j] += hri * static_cast<long double>(t(r, j));
    }
  }
  for (std::size_t i = 0; i < n; ++i) gram[i * n + i] += static_cast<long double>(delta);
  const std::vector<long double> x = solve_ld(std::move(gram), std::move(rhs), n, m);
  Matrix beta(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) beta(i, j) = static_cast<double>(x[i * m + j]);
  return beta;
}

double smallest_eigenvalue_spd(const Matrix& a) {
  const std::size_t n = a.rows();
  if (n != a.cols()) throw ShapeError("smallest_eigenvalue_spd: square input required");
  std::vector<long double> al(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) al[i * n + j] = a(i, j);

  std::vector<long double> v(n);
  std::uint64_t s = 0x9e3779b97f4a7c15ULL;
  for (auto& x : v) {
    s = splitmix64(s);
    x = static_cast<long double>(s >> 11) / static_cast<long double>(1ULL << 53);
  }
  long double lambda = 0.0L;
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<long double> b(v);
    std::vector<long double> y = solve_ld(al, std::move(b), n, 1);
    long double norm2 = 0.0L;
    for (long double x : y) norm2 += x * x;
    const long double inv = 1.0L / std::sqrt(norm2);
    for (std::size_t i = 0; i < n; ++i) v[i] = y[i] * inv;
    // Rayleigh quotient v^T A v.
    long double r = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      long double acc = 0.0L;
      for (std::size_t j = 0; j < n; ++j) acc += al[i * n + j] * v[j];
      r += v[i] * acc;
    }
    if (iter > 2 && std::abs(r - lambda) <= 1e-16L * std::abs(r)) {
      lambda = r;
      break;
    }
    lambda = r;
  }
  return static_cast<double>(lambda);
}

Matrix relu_forward(const ElmParams& params, const Matrix& x) {
  const std::size_t k = x.rows(), n = params.shape.n, nt = params.shape.n_tilde,
                    m = params.shape.m;
  Matrix y(k, m);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      long double acc = 0.0L;
      for (std::size_t j = 0; j < nt; ++j) {
        long double pre = params.bias(0, j);
        for (std::size_t i = 0; i < n; ++i) pre += static_cast<long double>(x(r, i)) * params.alpha(i, j);
        if (pre > 0.0L) acc += pre * static_cast<long double>(params.beta(j, c));
      }
      y(r, c) = static_cast<double>(acc);
    }
  }
  return y;
}

Matrix mlp_forward_ref(const MlpParams& params, const Matrix& s) {
  const std::size_t k = s.rows(), n = params.w1.rows(), hdim = params.w1.cols(),
                    out = params.w2.cols();
  Matrix y(k, out);
  for (std::size_t r = 0; r < k; ++r) {
    std::vector<long double> h(hdim);
    for (std::size_t j = 0; j < hdim; ++j) {
      long double acc = params.b1(0, j);
      for (std::size_t i = 0; i < n; ++i) acc += static_cast<long double>(s(r, i)) * params.w1(i, j);
      h[j] = acc > 0.0L ? acc : 0.0L;
    }
    for (std::size_t c = 0; c < out; ++c) {
      long double acc = params.b2(0, c);
      for (std::size_t j = 0; j < hdim; ++j) acc += h[j] * static_cast<long double>(params.w2(j, c));
      y(r, c) = static_cast<double>(acc);
    }
  }
  return y;
}

double dqn_loss_ref(const MlpParams& params, const Matrix& s,
                    const std::vector<int>& actions, const std::vector<double>& targets) {
  const Matrix y = mlp_forward_ref(params, s);
  long double loss = 0.0L;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const long double resid =
        y(r, static_cast<std::size_t>(actions[r])) - static_cast<long double>(targets[r]);
    const long double ar = std::abs(resid);
    loss += ar <= 1.0L ? 0.5L * resid * resid : ar - 0.5L;
  }
  return static_cast<double>(loss / static_cast<long double>(s.rows()));
}

MlpGrads fd_gradients(const MlpParams& params, const Matrix& s,
                      const std::vector<int>& actions, const std::vector<double>& targets,
                      double step) {
  MlpGrads g;
  g.loss = dqn_loss_ref(params, s, actions, targets);
  MlpParams work = params;
  auto differentiate = [&](Matrix MlpParams::* field, Matrix MlpGrads::* gfield) {
    const Matrix& src = params.*field;
    Matrix& dst = work.*field;
    Matrix& out = g.*gfield;
    out = Matrix(src.rows(), src.cols());
    for (std::size_t i = 0; i < src.size(); ++i) {
      const double orig = src.data()[i];
      dst.data()[i] = orig + step;
      const double up = dqn_loss_ref(work, s, actions, targets);
      dst.data()[i] = orig - step;
      const double down = dqn_loss_ref(work, s, actions, targets);
      dst.data()[i] = orig;
      out.data()[i] = (up - down) / (2.0 * step);
    }
  };
  differentiate(&MlpParams::w1, &MlpGrads::w1);
  differentiate(&MlpParams::b1, &MlpGrads::b1);
  differentiate(&MlpParams::w2, &MlpGrads::w2);
  differentiate(&MlpParams::b2, &MlpGrads::b2);
  return g;
}

CartPoleState cartpole_step_ref(const CartPoleState& s, double force) {
  // Same physics, separately written: pole angular acceleration from the
  // standard frictionless cart-pole equations, then one Euler step where
  // positions use the pre-update velocities.
  const double g = 9.8, mc = 1.0, mp = 0.1, l = 0.5, tau = 0.02;
  const double mt = mc + mp;
  const double ct = std::cos(s.theta), st = std::sin(s.theta);
  const double temp = (force + mp * l * s.theta_dot * s.theta_dot * st) / mt;
  const double th_acc = (g * st - ct * temp) / (l * (4.0 / 3.0 - mp * ct * ct / mt));
  const double x_acc = temp - mp * l * th_acc * ct / mt;
  CartPoleState n;
  n.x = s.x + tau * s.x_dot;
  n.x_dot = s.x_dot + tau * x_acc;
  n.theta = s.theta + tau * s.theta_dot;
  n.theta_dot = s.theta_dot + tau * th_acc;
  return n;
}

double quantized_float_predict(const FixedOselmState& state,
                               const std::vector<FixedQ20>& x, BetaBank bank) {
  const std::size_t n = state.shape.n, nt = state.shape.n_tilde;
  const std::vector<FixedQ20>& beta = bank == BetaBank::online ? state.beta1 : state.beta2;
  double y = 0.0;
  for (std::size_t j = 0; j < nt; ++j) {
    double acc = fx_to_real(state.bias[j]);
    for (std::size_t i = 0; i < n; ++i) {
      acc += fx_to_real(x[i]) * fx_to_real(state.alpha[i * nt + j]);
    }
    if (acc > 0.0) y += acc * fx_to_real(beta[j]);
  }
  return y;
}

}  // namespace oselmq::oracle
