#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "oselmq/agent.hpp"

namespace oselmq {

/// Signed fixed-point value with 11 integer and 20 fractional bits in an
/// int32 (range [-2048, 2048 - 2^-20]).  All arithmetic saturates instead of
/// wrapping; saturation events are counted through the optional overflow
/// pointer each operation takes.
struct FixedQ20 {
  std::int32_t raw = 0;
  friend bool operator==(FixedQ20, FixedQ20) = default;
};

inline constexpr int kFxFracBits = 20;
inline constexpr FixedQ20 kFxOne{1 << kFxFracBits};

/// Nearest representable value (ties to even), saturating out-of-range input.
FixedQ20 fx_convert(double v, std::uint64_t* overflow = nullptr);

double fx_to_real(FixedQ20 f);

FixedQ20 fx_add(FixedQ20 a, FixedQ20 b, std::uint64_t* overflow = nullptr);
FixedQ20 fx_sub(FixedQ20 a, FixedQ20 b, std::uint64_t* overflow = nullptr);

/// Full-width product rounded at bit 20 (round half up), then saturated.
FixedQ20 fx_mul(FixedQ20 a, FixedQ20 b, std::uint64_t* overflow = nullptr);

/// (a << 20) / b truncated toward zero, then saturated.  b == 0 raises
/// NumericError.
FixedQ20 fx_div(FixedQ20 a, FixedQ20 b, std::uint64_t* overflow = nullptr);

enum class BetaBank { online, target };

/// Device-resident network image: one shared input layer, two output-weight
/// banks (online and target), and the inverse-covariance matrix, all in
/// Q20.  Every arithmetic step of predict/train below is integer-only and
/// charges saturation events to overflow_count.
struct FixedOselmState {
  NetworkShape shape;  // m must be 1 (scalar Q output)
  std::vector<FixedQ20> alpha;  // n x n_tilde, row-major
  std::vector<FixedQ20> bias;   // n_tilde
  std::vector<FixedQ20> beta1;  // n_tilde (online bank)
  std::vector<FixedQ20> beta2;  // n_tilde (target bank)
  std::vector<FixedQ20> p;      // n_tilde x n_tilde, row-major
  std::uint64_t overflow_count = 0;

  /// Quantizes a trained float network pair.  Conversion saturation also
  /// counts toward overflow_count.
  static FixedOselmState from_float(const OselmState& theta1, const OselmState& theta2);

  /// Copies the online bank over the target bank (raw words).
  void sync_target_bank();
};

/// Scalar Q for one encoded input row; one accumulator per dot product,
/// with relu applied to each hidden accumulator.
FixedQ20 fx_predict(FixedOselmState& state, std::span<const FixedQ20> x,
                    BetaBank bank = BetaBank::online);

/// Rank-1 recursive least-squares update of beta1 and P against teacher t.
/// The single division computes recip = 1/s once; everything else is adds
/// and multiplies.  A zero denominator raises NumericError.
void fx_seq_train(FixedOselmState& state, std::span<const FixedQ20> x, FixedQ20 t);

/// Raw little-endian memory image: one 8-digit hex word per line, in
/// alpha, bias, beta1, beta2, P order (row-major).
void write_hex_dump(const FixedOselmState& state, std::ostream& os);

/// Q-learning driver that mirrors OselmAgent but runs the post-initial
/// phase entirely in Q20: the initial batch solve happens in float (host
/// side), the resulting parameters are quantized once, and every later
/// prediction and sequential update uses the fixed-point kernels.  Teacher
/// assembly (reward + discounted bootstrap, then clipping) stays in host
/// float before quantizing, mirroring the host/device split at the initial
/// load.
class FixedAgent {
 public:
  FixedAgent(AgentConfig cfg, std::size_t state_dim);

  int act(std::span<const double> s);
  StepOutcome observe(const Experience& e, bool failure);
  void end_episode(std::size_t episode_index);
  void reset_parameters();

  bool on_device() const { return fixed_.has_value(); }
  const FixedOselmState& fixed_state() const;
  std::uint64_t overflow_count() const;
  std::uint64_t global_step() const { return step_; }
  const OpTimers& timers() const { return timers_; }
  double teacher_min() const { return teacher_min_; }
  double teacher_max() const { return teacher_max_; }

 private:
  std::vector<FixedQ20> encode_fx(std::span<const double> s, int action);
  double q_fx(std::span<const double> s, int action, BetaBank bank);
  int greedy_fx(std::span<const double> s, BetaBank bank);
  double teacher_for(const Experience& e);
  void record_teacher(double t);

  AgentConfig cfg_;
  std::size_t state_dim_;
  Rng rng_;
  QNetPair float_nets_;                  // live until the device image exists
  std::optional<FixedOselmState> fixed_;
  std::vector<Experience> buffer_;
  std::uint64_t step_ = 0;
  std::uint64_t overflow_before_reset_ = 0;
  OpTimers timers_;
  double teacher_min_ = 0.0;
  double teacher_max_ = 0.0;
  bool teacher_seen_ = false;
};

}  // namespace oselmq
