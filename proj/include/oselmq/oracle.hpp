#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "oselmq/cartpole.hpp"
#include "oselmq/dqn.hpp"
#include "oselmq/elm.hpp"
#include "oselmq/fixedq20.hpp"
#include "oselmq/matrix.hpp"

namespace oselmq::oracle {

/// Reference implementations kept deliberately independent of the library's
/// numeric kernels: plain scalar loops, a different eigen-algorithm, higher
/// working precision.  They exist so the fast paths can be cross-checked.

/// Triple-loop i,j,k product.
Matrix naive_matmul(const Matrix& a, const Matrix& b);

/// Largest singular value via a cyclic Jacobi eigensolver on a^T a
/// (long-double accumulation).
double jacobi_sigma_max(const Matrix& a);

/// max |A v| over `samples` random unit vectors: a Monte-Carlo lower bound
/// on the largest singular value.
double sampled_max_gain(const Matrix& a, std::size_t samples, Rng& rng);

/// Ridge solve (H^T H + delta I) beta = H^T t by Gaussian elimination in
/// long double.
Matrix ridge_solve(const Matrix& h, const Matrix& t, double delta);

/// Smallest eigenvalue of a symmetric positive-definite matrix by inverse
/// power iteration (long-double solves).
double smallest_eigenvalue_spd(const Matrix& a);

/// Scalar-loop recomputation of relu(x alpha + bias) beta.
Matrix relu_forward(const ElmParams& params, const Matrix& x);

/// Scalar-loop two-layer perceptron forward pass.
Matrix mlp_forward_ref(const MlpParams& params, const Matrix& s);

/// Mean Huber loss of the batch, recomputed with scalar loops.
double dqn_loss_ref(const MlpParams& params, const Matrix& s,
                    const std::vector<int>& actions, const std::vector<double>& targets);

/// Central finite-difference gradients of dqn_loss_ref.
MlpGrads fd_gradients(const MlpParams& params, const Matrix& s,
                      const std::vector<int>& actions, const std::vector<double>& targets,
                      double step);

/// Independently coded dynamics step of the balancing task.
CartPoleState cartpole_step_ref(const CartPoleState& s, double force);

/// The value the fixed-point forward pass approximates: the same dataflow
/// evaluated in double on the dequantized parameters.
double quantized_float_predict(const FixedOselmState& state,
                               const std::vector<FixedQ20>& x, BetaBank bank);

/// Self-contained verification battery.  Prints one PASS/FAIL line per
/// check to `os` and returns the number of failures.
int run_suite(std::ostream& os);

}  // namespace oselmq::oracle
