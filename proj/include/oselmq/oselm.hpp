#pragma once

#include <filesystem>
#include <iosfwd>

#include "oselmq/elm.hpp"
#include "oselmq/matrix.hpp"

namespace oselmq {

/// Online-sequential ELM.  After an initial batch solve, the output weights
/// are maintained by rank-1 recursive least squares: no matrix inversion is
/// needed per sample, only a scalar reciprocal.
///
/// Lifecycle: constructed untrained from ElmParams; init_train performs the
/// regularized batch solve and seeds the covariance-like matrix P; seq_train
/// then folds in one sample at a time.  predict works in any state (before
/// training it reflects the random initial beta).
///
/// Single-writer: instances are not synchronized; callers update a given
/// instance strictly sequentially.
class OselmState {
 public:
  explicit OselmState(ElmParams params);

  const ElmParams& params() const { return params_; }
  const Matrix& p() const { return p_; }
  bool trained() const { return trained_; }

  /// Batch solve on k0 rows: P = (H0^T H0 + delta I)^-1, beta = P H0^T t0.
  /// Throws StateError when already trained and ConfigError for delta < 0.
  void init_train(const Matrix& x0, const Matrix& t0, double delta);

  /// Folds one sample (x: 1 x n, t: 1 x m) into beta and P.  The innovation
  /// denominator s = 1 + h P h^T must stay away from zero (NumericError when
  /// |s| < 1e-12); P is re-symmetrized after the update to stop drift.
  /// Throws StateError before init_train.
  void seq_train(const Matrix& x, const Matrix& t);

  /// Network output for a k x n batch.
  Matrix predict(const Matrix& x) const;

  /// Copies the learned quantities (beta, P, trained flag) from another
  /// instance with identical layer sizes; alpha and bias are left as-is.
  /// Used to refresh a target network.
  void sync_learned_from(const OselmState& src);

  /// Checkpoint I/O.  Fixed little-endian layout: magic "OSLM", version,
  /// layer sizes, then alpha, bias, beta, P as row-major float64.  Only
  /// trained states can be saved (StateError otherwise); a loaded state is
  /// trained by construction.  Malformed data raises IoError.
  void save(std::ostream& os) const;
  void save(const std::filesystem::path& path) const;
  static OselmState load(std::istream& is);
  static OselmState load(const std::filesystem::path& path);

 private:
  ElmParams params_;
  Matrix p_;
  bool trained_ = false;
};

}  // namespace oselmq
