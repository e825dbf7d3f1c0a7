#pragma once

#include <cstddef>

#include "oselmq/matrix.hpp"

namespace oselmq {

class Rng;

/// Layer sizes of a single-hidden-layer network: n inputs, n_tilde hidden
/// units, m outputs.
struct NetworkShape {
  std::size_t n = 0;
  std::size_t n_tilde = 0;
  std::size_t m = 0;

  void validate() const;  // throws ConfigError unless all sizes are >= 1
};

/// Parameters of an extreme learning machine: random input weights alpha
/// (n x n_tilde) and biases (1 x n_tilde) that stay fixed after
/// initialization, and the trained output weights beta (n_tilde x m).
struct ElmParams {
  NetworkShape shape;
  Matrix alpha;
  Matrix bias;
  Matrix beta;
};

/// Draws alpha, bias and beta i.i.d. uniform in [0, 1) (row-major, in that
/// order) and optionally rescales alpha by its largest singular value so
/// that sigma_max(alpha) == 1.
ElmParams elm_init(const NetworkShape& shape, Rng& rng, bool normalize_alpha);

/// Hidden-layer activations H = relu(x * alpha + bias) for a k x n input
/// batch; the bias row is broadcast over the batch.
Matrix hidden(const ElmParams& params, const Matrix& x);

/// Network output H * beta (k x m).
Matrix elm_predict(const ElmParams& params, const Matrix& x);

/// Batch least-squares fit of beta with L2 regularization strength delta:
/// beta = (H^T H + delta I)^-1 H^T t.  alpha and bias are left untouched.
/// delta must be >= 0; a singular normal matrix raises SingularError.
ElmParams elm_fit(ElmParams params, const Matrix& x, const Matrix& t, double delta);

}  // namespace oselmq
