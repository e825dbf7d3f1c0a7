#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <string_view>

namespace oselmq {

/// Operation classes whose wall time is accounted separately.  Environment
/// interaction is never timed; the classes partition agent compute.
enum class OpClass : int {
  train_seq = 0,     // one rank-1 recursive least-squares update
  predict_seq,       // forward passes after initial training
  train_init,        // initial batch solve (or a batch refit)
  predict_init,      // forward passes before initial training
  train_dqn,         // gradient/optimizer work of one DQN train step
  predict_1,         // single-row MLP forward
  predict_32,        // batch-32 MLP forward
  count_
};

constexpr std::size_t kOpClassCount = static_cast<std::size_t>(OpClass::count_);

constexpr std::string_view to_string(OpClass c) {
  switch (c) {
    case OpClass::train_seq:    return "train_seq";
    case OpClass::predict_seq:  return "predict_seq";
    case OpClass::train_init:   return "train_init";
    case OpClass::predict_init: return "predict_init";
    case OpClass::train_dqn:    return "train_DQN";
    case OpClass::predict_1:    return "predict_1";
    case OpClass::predict_32:   return "predict_32";
    default:                    return "?";
  }
}

struct OpStat {
  std::uint64_t count = 0;
  std::uint64_t total_ns = 0;
};

/// Per-class call counters and accumulated wall time.
class OpTimers {
 public:
  void add(OpClass c, std::uint64_t ns) {
    auto& s = stats_[static_cast<std::size_t>(c)];
    ++s.count;
    s.total_ns += ns;
  }

  const OpStat& stat(OpClass c) const { return stats_[static_cast<std::size_t>(c)]; }
  const std::array<OpStat, kOpClassCount>& stats() const { return stats_; }

  std::uint64_t total_ns() const {
    std::uint64_t t = 0;
    for (const auto& s : stats_) t += s.total_ns;
    return t;
  }

 private:
  std::array<OpStat, kOpClassCount> stats_{};
};

/// Times a scope and charges it to one operation class.  A null timer set
/// disables measurement.
class ScopedTimer {
 public:
  ScopedTimer(OpTimers* timers, OpClass c)
      : timers_(timers), class_(c),
        start_(timers ? std::chrono::steady_clock::now()
                      : std::chrono::steady_clock::time_point{}) {}

  ~ScopedTimer() {
    if (!timers_) return;
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                        std::chrono::steady_clock::now() - start_)
                        .count();
    timers_->add(class_, static_cast<std::uint64_t>(ns));
  }

  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  OpTimers* timers_;
  OpClass class_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace oselmq
