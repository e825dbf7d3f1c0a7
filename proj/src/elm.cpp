#include "oselmq/elm.hpp"

#include <algorithm>
#include <string>

#include "oselmq/errors.hpp"
#include "oselmq/rng.hpp"

namespace oselmq {

void NetworkShape::validate() const {
  if (n == 0 || n_tilde == 0 || m == 0) {
    throw ConfigError("network shape: all of n, n_tilde, m must be >= 1 (got " +
                      std::to_string(n) + ", " + std::to_string(n_tilde) + ", " +
                      std::to_string(m) + ")");
  }
}

ElmParams elm_init(const NetworkShape& shape, Rng& rng, bool normalize_alpha) {
  shape.validate();
  ElmParams p;
  p.shape = shape;
  p.alpha = random_uniform(shape.n, shape.n_tilde, rng);
  p.bias = random_uniform(1, shape.n_tilde, rng);
  p.beta = random_uniform(shape.n_tilde, shape.m, rng);
  if (normalize_alpha) {
    const double s = sigma_max(p.alpha);
    if (s > 0.0) {
      const double inv = 1.0 / s;
      for (double& v : p.alpha.data()) v *= inv;
    }
  }
  return p;
}

Matrix hidden(const ElmParams& params, const Matrix& x) {
  const NetworkShape& sh = params.shape;
  if (x.cols() != sh.n) {
    throw ShapeError("hidden: input " + shape_string(x) + " vs n=" + std::to_string(sh.n));
  }
  Matrix h(x.rows(), sh.n_tilde);
  const double* b = params.bias.row(0).data();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.row(r).data();
    double* hr = h.row(r).data();
    std::copy(b, b + sh.n_tilde, hr);
    for (std::size_t i = 0; i < sh.n; ++i) {
      const double xi = xr[i];
      if (xi == 0.0) continue;
      const double* ai = params.alpha.row(i).data();
      for (std::size_t j = 0; j < sh.n_tilde; ++j) hr[j] += xi * ai[j];
    }
    for (std::size_t j = 0; j < sh.n_tilde; ++j) hr[j] = std::max(0.0, hr[j]);
  }
  return h;
}

Matrix elm_predict(const ElmParams& params, const Matrix& x) {
  return matmul(hidden(params, x), params.beta);
}

ElmParams elm_fit(ElmParams params, const Matrix& x, const Matrix& t, double delta) {
  if (delta < 0.0) throw ConfigError("elm_fit: delta must be >= 0");
  if (t.rows() != x.rows() || t.cols() != params.shape.m) {
    throw ShapeError("elm_fit: targets " + shape_string(t) + " for input " + shape_string(x));
  }
  const Matrix h = hidden(params, x);
  const Matrix ht = transpose(h);
  Matrix gram = matmul(ht, h);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += delta;
  params.beta = matmul(inverse(gram), matmul(ht, t));
  return params;
}

}  // namespace oselmq
