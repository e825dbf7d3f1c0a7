#include "oselmq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <utility>

#include "oselmq/cartpole.hpp"
#include "oselmq/dqn.hpp"
#include "oselmq/errors.hpp"
#include "oselmq/fixedq20.hpp"

namespace oselmq {

Algo parse_algo(const std::string& name) {
  if (name == "oselm") return Algo::oselm;
  if (name == "oselm-l2") return Algo::oselm_l2;
  if (name == "oselm-lipschitz") return Algo::oselm_lipschitz;
  if (name == "oselm-l2-lipschitz") return Algo::oselm_l2_lipschitz;
  if (name == "elm") return Algo::elm;
  if (name == "dqn") return Algo::dqn;
  if (name == "fixed") return Algo::fixed;
  throw ConfigError("unknown algorithm '" + name + "'");
}

std::string to_string(Algo algo) {
  switch (algo) {
    case Algo::oselm: return "oselm";
    case Algo::oselm_l2: return "oselm-l2";
    case Algo::oselm_lipschitz: return "oselm-lipschitz";
    case Algo::oselm_l2_lipschitz: return "oselm-l2-lipschitz";
    case Algo::elm: return "elm";
    case Algo::dqn: return "dqn";
    case Algo::fixed: return "fixed";
  }
  return "?";
}

void RunConfig::validate() const {
  agent.validate();
  if (max_episodes == 0) throw ConfigError("run: max_episodes must be >= 1");
  if (trials == 0) throw ConfigError("run: trials must be >= 1");
  if (reset_after == 0) throw ConfigError("run: reset_after must be >= 1");
  if (solve_threshold <= 0.0) throw ConfigError("run: solve_threshold must be > 0");
  if (workers == 0) throw ConfigError("run: workers must be >= 1");
}

void apply_algo_defaults(RunConfig& cfg, bool delta_overridden) {
  // The observation components span very different ranges (|x| <= 2.4,
  // |theta| <= 0.21, velocities a few units); these multipliers bring their
  // per-unit influence on the random hidden layer to a comparable order,
  // weighting the pole coordinates above the cart ones.  The backprop
  // baseline learns its own input weighting and takes the raw observation.
  if (cfg.algo != Algo::dqn && cfg.agent.input_scale.empty())
    cfg.agent.input_scale = {0.5, 1.0, 10.0, 1.5};
  switch (cfg.algo) {
    case Algo::oselm:
    case Algo::elm:
    case Algo::dqn:
      cfg.agent.use_l2 = false;
      cfg.agent.use_lipschitz = false;
      break;
    case Algo::oselm_l2:
      cfg.agent.use_l2 = true;
      cfg.agent.use_lipschitz = false;
      if (!delta_overridden) cfg.agent.delta = 1.0;
      break;
    case Algo::oselm_lipschitz:
      cfg.agent.use_l2 = false;
      cfg.agent.use_lipschitz = true;
      break;
    case Algo::oselm_l2_lipschitz:
    case Algo::fixed:
      cfg.agent.use_l2 = true;
      cfg.agent.use_lipschitz = true;
      if (!delta_overridden) cfg.agent.delta = 0.5;
      break;
  }
}

namespace {

constexpr std::size_t kStateDim = 4;
constexpr std::size_t kElmReplayCapacity = 10000;
constexpr std::size_t kElmFitBatch = 512;

// Batch-refit baseline: the same exploration, encoding and clipped teachers
// as the online learner, but beta is re-solved from replayed experience at
// the target-refresh cadence instead of being updated per step.
class ElmBaselineAgent {
 public:
  ElmBaselineAgent(AgentConfig cfg, std::size_t state_dim)
      : cfg_(std::move(cfg)),
        state_dim_(state_dim),
        rng_(cfg_.seed),
        buffer_(kElmReplayCapacity) {
    cfg_.validate();
    theta1_ = draw_q_net(cfg_, state_dim_, rng_);
    theta2_ = theta1_;
  }

  int act(std::span<const double> s) {
    const double r1 = rng_.uniform();
    if (r1 >= cfg_.eps1) {
      return static_cast<int>(rng_.uniform_index(cfg_.action_codes.size()));
    }
    ScopedTimer timer(&timers_, fitted_ ? OpClass::predict_seq : OpClass::predict_init);
    int best = 0;
    double best_q = q_of(theta1_, s, 0);
    for (std::size_t a = 1; a < cfg_.action_codes.size(); ++a) {
      const double q = q_of(theta1_, s, static_cast<int>(a));
      if (q > best_q) {
        best_q = q;
        best = static_cast<int>(a);
      }
    }
    return best;
  }

  StepOutcome observe(const Experience& e, bool failure) {
    StepOutcome out;
    Experience stored = e;
    if (e.d == 1) {
      if (!cfg_.store_terminal) return out;
      if (failure) {
        if (cfg_.terminal_reward) stored.r = *cfg_.terminal_reward;
      } else if (cfg_.live_reward) {
        stored.r = *cfg_.live_reward;
      }
    } else if (cfg_.live_reward) {
      stored.r = *cfg_.live_reward;
    }
    buffer_.push(std::move(stored));
    out.stored = true;
    return out;
  }

  void end_episode(std::size_t episode_index) {
    if (episode_index % cfg_.update_step != 0) return;
    if (buffer_.size() < cfg_.n_tilde) return;  // not enough rows for a fit
    refit();
  }

  void reset_parameters() {
    // Weights restart from scratch; replayed experience stays valid.
    theta1_ = draw_q_net(cfg_, state_dim_, rng_);
    theta2_ = theta1_;
    fitted_ = false;
  }

  const OpTimers& timers() const { return timers_; }
  double teacher_min() const { return teacher_min_; }
  double teacher_max() const { return teacher_max_; }

 private:
  double q_of(const ElmParams& params, std::span<const double> s, int action) const {
    return elm_predict(params, encode_input(s, action, cfg_))(0, 0);
  }

  void refit() {
    // Fit on the whole buffer when small, else on a uniform subsample
    // without replacement.
    std::vector<std::size_t> idx;
    if (buffer_.size() <= kElmFitBatch) {
      idx.resize(buffer_.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    } else {
      idx.resize(buffer_.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (std::size_t i = 0; i < kElmFitBatch; ++i) {
        const std::size_t j = i + rng_.uniform_index(idx.size() - i);
        std::swap(idx[i], idx[j]);
      }
      idx.resize(kElmFitBatch);
    }

    Matrix x(idx.size(), state_dim_ + 1);
    Matrix t(idx.size(), 1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const Experience& e = buffer_[idx[r]];
      const Matrix row = encode_input(e.s, e.a, cfg_);
      std::copy(row.row(0).begin(), row.row(0).end(), x.row(r).begin());
      double target;
      {
        ScopedTimer timer(e.d == 0 ? &timers_ : nullptr,
                          fitted_ ? OpClass::predict_seq : OpClass::predict_init);
        target = teacher_of(e);
      }
      record_teacher(target);
      t(r, 0) = target;
    }
    const double delta = cfg_.use_l2 ? cfg_.delta : 1e-8;
    {
      ScopedTimer timer(&timers_, OpClass::train_init);
      theta1_ = elm_fit(std::move(theta1_), x, t, delta);
    }
    theta2_ = theta1_;
    fitted_ = true;
  }

  double teacher_of(const Experience& e) const {
    // As in compute_target, an unfitted readout contributes no bootstrap.
    double bootstrap = 0.0;
    if (e.d == 0 && fitted_) {
      double best = q_of(theta2_, e.s_next, 0);
      for (std::size_t a = 1; a < cfg_.action_codes.size(); ++a) {
        best = std::max(best, q_of(theta2_, e.s_next, static_cast<int>(a)));
      }
      bootstrap = cfg_.gamma * best;
    }
    return clip(cfg_.clip_lo, e.r + bootstrap, cfg_.clip_hi);
  }

  void record_teacher(double t) {
    if (t < cfg_.clip_lo || t > cfg_.clip_hi) {
      throw NumericError("teacher escaped the clipping range: " + std::to_string(t));
    }
    if (!teacher_seen_) {
      teacher_min_ = teacher_max_ = t;
      teacher_seen_ = true;
    } else {
      teacher_min_ = std::min(teacher_min_, t);
      teacher_max_ = std::max(teacher_max_, t);
    }
  }

  AgentConfig cfg_;
  std::size_t state_dim_;
  Rng rng_;
  ElmParams theta1_;
  ElmParams theta2_;
  ReplayBuffer buffer_;
  bool fitted_ = false;
  OpTimers timers_;
  double teacher_min_ = 0.0;
  double teacher_max_ = 0.0;
  bool teacher_seen_ = false;
};

template <class AgentT>
void run_episode_loop(AgentT& agent, CartPole& env, const RunConfig& cfg,
                      bool allow_reset, TrialResult& out) {
  double window_sum = 0.0;
  std::size_t episodes_since_reset = 0;
  for (std::size_t ep = 1; ep <= cfg.max_episodes; ++ep) {
    CartPoleState s = env.reset();
    while (true) {
      const std::array<double, 4> cur = s.as_array();
      const int a = agent.act(cur);
      const StepResult st = env.step(a);
      const bool failure =
          st.reason == DoneReason::pole_fell || st.reason == DoneReason::cart_out;
      Experience e;
      e.s.assign(cur.begin(), cur.end());
      e.a = a;
      e.r = st.reward;
      const std::array<double, 4> nxt = st.state.as_array();
      e.s_next.assign(nxt.begin(), nxt.end());
      e.d = st.done ? 1 : 0;
      agent.observe(e, failure);
      if (st.done) break;
      s = st.state;
    }
    const std::size_t steps = env.status().steps;
    out.episode_steps.push_back(steps);
    agent.end_episode(ep);

    window_sum += static_cast<double>(steps);
    if (ep > 100) window_sum -= static_cast<double>(out.episode_steps[ep - 101]);
    const double avg = window_sum / static_cast<double>(std::min<std::size_t>(ep, 100));
    out.moving_avg.push_back(avg);

    ++episodes_since_reset;
    const bool solved_now = ep >= 100 && avg >= cfg.solve_threshold;
    if (!solved_now && allow_reset && episodes_since_reset >= cfg.reset_after) {
      agent.reset_parameters();
      episodes_since_reset = 0;
      ++out.resets;
    }
    out.resets_after.push_back(out.resets);
    if (solved_now) {
      out.episodes_to_solve = ep;
      break;
    }
  }
}

}  // namespace

TrialResult run_trial(const RunConfig& cfg, std::uint64_t seed) {
  RunConfig c = cfg;
  c.validate();
  c.agent.seed = seed;
  // Flags follow the algorithm name so a mislabeled config cannot run the
  // wrong variant; delta stays caller-controlled.
  switch (c.algo) {
    case Algo::oselm: c.agent.use_l2 = false; c.agent.use_lipschitz = false; break;
    case Algo::oselm_l2: c.agent.use_l2 = true; c.agent.use_lipschitz = false; break;
    case Algo::oselm_lipschitz: c.agent.use_l2 = false; c.agent.use_lipschitz = true; break;
    case Algo::oselm_l2_lipschitz:
    case Algo::fixed: c.agent.use_l2 = true; c.agent.use_lipschitz = true; break;
    case Algo::elm:
    case Algo::dqn: c.agent.use_l2 = false; c.agent.use_lipschitz = false; break;
  }

  CartPole env(splitmix64(seed));
  TrialResult out;
  out.seed = seed;

  switch (c.algo) {
    case Algo::oselm:
    case Algo::oselm_l2:
    case Algo::oselm_lipschitz:
    case Algo::oselm_l2_lipschitz: {
      OselmAgent agent(c.agent, kStateDim);
      run_episode_loop(agent, env, c, /*allow_reset=*/true, out);
      out.op_stats = agent.timers().stats();
      out.teacher_min = agent.teacher_min();
      out.teacher_max = agent.teacher_max();
      break;
    }
    case Algo::elm: {
      ElmBaselineAgent agent(c.agent, kStateDim);
      run_episode_loop(agent, env, c, /*allow_reset=*/true, out);
      out.op_stats = agent.timers().stats();
      out.teacher_min = agent.teacher_min();
      out.teacher_max = agent.teacher_max();
      break;
    }
    case Algo::dqn: {
      DqnConfig dc;
      dc.state_dim = kStateDim;
      dc.hidden = c.agent.n_tilde;
      dc.eps1 = c.agent.eps1;
      dc.gamma = c.agent.gamma;
      dc.update_step = c.agent.update_step;
      dc.seed = seed;
      DqnAgent agent(dc);
      run_episode_loop(agent, env, c, /*allow_reset=*/false, out);
      out.op_stats = agent.timers().stats();
      break;
    }
    case Algo::fixed: {
      FixedAgent agent(c.agent, kStateDim);
      run_episode_loop(agent, env, c, /*allow_reset=*/true, out);
      out.op_stats = agent.timers().stats();
      out.overflow_count = agent.overflow_count();
      out.teacher_min = agent.teacher_min();
      out.teacher_max = agent.teacher_max();
      break;
    }
  }

  for (const OpStat& s : out.op_stats) out.train_compute_ns += s.total_ns;
  return out;
}

std::vector<TrialResult> run_trials(const RunConfig& cfg) {
  cfg.validate();
  const std::uint64_t base = cfg.agent.seed;
  std::vector<TrialResult> results(cfg.trials);
  const std::size_t workers = std::min(cfg.workers, cfg.trials);
  if (workers <= 1) {
    for (std::size_t i = 0; i < cfg.trials; ++i) results[i] = run_trial(cfg, base + i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cfg.trials) break;
        results[i] = run_trial(cfg, base + i);
      }
    }));
  }
  for (auto& f : futures) f.get();
  return results;
}

void write_learning_curve_csv(const TrialResult& result, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("learning curve: cannot open " + path.string() + " for writing");
  os << "episode,steps,moving_avg_100,resets_so_far\n";
  char buf[128];
  for (std::size_t i = 0; i < result.episode_steps.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f,%zu\n", i + 1, result.episode_steps[i],
                  result.moving_avg[i], result.resets_after[i]);
    os << buf;
  }
  if (!os) throw IoError("learning curve: write failed for " + path.string());
}

namespace {

nlohmann::ordered_json op_stats_json(const std::array<OpStat, kOpClassCount>& stats) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < kOpClassCount; ++i) {
    const auto c = static_cast<OpClass>(i);
    j[std::string(to_string(c))] = {{"count", stats[i].count},
                                    {"total_ns", stats[i].total_ns}};
  }
  return j;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

nlohmann::ordered_json summarize(const RunConfig& cfg,
                                 const std::vector<TrialResult>& results) {
  nlohmann::ordered_json j;
  j["algo"] = to_string(cfg.algo);
  j["hidden"] = cfg.agent.n_tilde;
  j["trials"] = cfg.trials;
  j["base_seed"] = cfg.agent.seed;
  j["max_episodes"] = cfg.max_episodes;
  j["eps1"] = cfg.agent.eps1;
  j["eps2"] = cfg.agent.eps2;
  j["gamma"] = cfg.agent.gamma;
  j["delta"] = cfg.agent.delta;
  j["update_step"] = cfg.agent.update_step;
  if (cfg.agent.terminal_reward) {
    j["terminal_reward"] = *cfg.agent.terminal_reward;
  } else {
    j["terminal_reward"] = nullptr;
  }
  j["store_terminal"] = cfg.agent.store_terminal;
  if (cfg.agent.live_reward) {
    j["live_reward"] = *cfg.agent.live_reward;
  } else {
    j["live_reward"] = nullptr;
  }
  j["input_scale"] = cfg.agent.input_scale;
  j["reset_after"] = cfg.reset_after;
  j["solve_threshold"] = cfg.solve_threshold;

  nlohmann::ordered_json trials = nlohmann::ordered_json::array();
  std::vector<double> solve_episodes;
  std::vector<double> compute_all;
  std::vector<double> compute_solved;
  for (const TrialResult& r : results) {
    nlohmann::ordered_json t;
    t["seed"] = r.seed;
    t["episodes"] = r.episode_steps.size();
    t["solved"] = r.solved();
    if (r.solved()) {
      t["episodes_to_solve"] = *r.episodes_to_solve;
      solve_episodes.push_back(static_cast<double>(*r.episodes_to_solve));
      compute_solved.push_back(static_cast<double>(r.train_compute_ns));
    } else {
      t["episodes_to_solve"] = nullptr;
    }
    t["resets"] = r.resets;
    t["train_compute_ns"] = r.train_compute_ns;
    t["overflow_count"] = r.overflow_count;
    t["teacher_min"] = r.teacher_min;
    t["teacher_max"] = r.teacher_max;
    t["ops"] = op_stats_json(r.op_stats);
    trials.push_back(std::move(t));
    compute_all.push_back(static_cast<double>(r.train_compute_ns));
  }
  j["results"] = std::move(trials);

  nlohmann::ordered_json agg;
  agg["solved_trials"] = solve_episodes.size();
  agg["median_episodes_to_solve_solved_only"] =
      solve_episodes.empty() ? nlohmann::ordered_json(nullptr)
                             : nlohmann::ordered_json(median(solve_episodes));
  agg["median_train_compute_ns_all"] = median(compute_all);
  agg["median_train_compute_ns_solved_only"] =
      compute_solved.empty() ? nlohmann::ordered_json(nullptr)
                             : nlohmann::ordered_json(median(compute_solved));
  j["aggregate"] = std::move(agg);
  return j;
}

// ---------------------------------------------------------------------------
// Microbenchmarks

namespace {

using Clock = std::chrono::steady_clock;

struct Series {
  std::vector<double> ns;
  void record(Clock::time_point a, Clock::time_point b) {
    ns.push_back(static_cast<double>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count()));
  }
  nlohmann::ordered_json stats() const {
    std::vector<double> v = ns;
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    nlohmann::ordered_json j;
    j["count"] = v.size();
    j["mean_ns"] = v.empty() ? 0.0 : sum / static_cast<double>(v.size());
    j["median_ns"] = v.empty() ? 0.0 : v[v.size() / 2];
    j["min_ns"] = v.empty() ? 0.0 : v.front();
    j["max_ns"] = v.empty() ? 0.0 : v.back();
    return j;
  }
};

// Synthetic encoded inputs with the observation ranges of the balancing
// task, so benchmark operands look like run-time operands.
Matrix synthetic_input(Rng& rng) {
  Matrix x(1, 5);
  x(0, 0) = rng.uniform(-2.4, 2.4);
  x(0, 1) = rng.uniform(-3.0, 3.0);
  x(0, 2) = rng.uniform(-0.21, 0.21);
  x(0, 3) = rng.uniform(-3.0, 3.0);
  x(0, 4) = rng.uniform() < 0.5 ? -0.5 : 0.5;
  return x;
}

Matrix synthetic_batch(std::size_t k, Rng& rng) {
  Matrix x(k, 5);
  for (std::size_t r = 0; r < k; ++r) {
    const Matrix row = synthetic_input(rng);
    std::copy(row.row(0).begin(), row.row(0).end(), x.row(r).begin());
  }
  return x;
}

nlohmann::ordered_json bench_oselm(Algo algo, std::size_t hidden, std::size_t reps,
                                   std::uint64_t seed) {
  const bool use_l2 = algo == Algo::oselm_l2 || algo == Algo::oselm_l2_lipschitz ||
                      algo == Algo::fixed;
  const bool use_lip = algo == Algo::oselm_lipschitz || algo == Algo::oselm_l2_lipschitz ||
                       algo == Algo::fixed;
  const double delta = use_l2 ? (algo == Algo::oselm_l2 ? 1.0 : 0.5) : 1e-8;
  Rng rng(seed);
  NetworkShape shape{5, hidden, 1};
  const ElmParams params = elm_init(shape, rng, use_lip);

  Series predict_init, train_init, predict_seq, train_seq;

  {
    OselmState cold(params);
    for (std::size_t r = 0; r < reps; ++r) {
      const Matrix x = synthetic_input(rng);
      const auto a = Clock::now();
      volatile double sink = cold.predict(x)(0, 0);
      const auto b = Clock::now();
      (void)sink;
      predict_init.record(a, b);
    }
  }

  // Initial solves on fresh states; batch size equals the hidden width.
  const std::size_t init_reps = std::max<std::size_t>(reps / 10, 100);
  for (std::size_t r = 0; r < init_reps; ++r) {
    OselmState st(params);
    const Matrix x0 = synthetic_batch(hidden, rng);
    const Matrix t0 = random_uniform(hidden, 1, rng, -1.0, 1.0);
    const auto a = Clock::now();
    st.init_train(x0, t0, delta);
    const auto b = Clock::now();
    train_init.record(a, b);
  }

  if (algo == Algo::fixed) {
    OselmState st(params);
    st.init_train(synthetic_batch(hidden, rng), random_uniform(hidden, 1, rng, -1.0, 1.0),
                  delta);
    OselmState target(params);
    target.sync_learned_from(st);
    FixedOselmState fx = FixedOselmState::from_float(st, target);
    std::vector<FixedQ20> x(5);
    for (std::size_t r = 0; r < reps; ++r) {
      const Matrix xf = synthetic_input(rng);
      for (std::size_t i = 0; i < 5; ++i) x[i] = fx_convert(xf(0, i));
      {
        const auto a = Clock::now();
        volatile std::int32_t sink = fx_predict(fx, x).raw;
        const auto b = Clock::now();
        (void)sink;
        predict_seq.record(a, b);
      }
      const FixedQ20 teacher = fx_convert(rng.uniform(-1.0, 1.0));
      {
        const auto a = Clock::now();
        fx_seq_train(fx, x, teacher);
        const auto b = Clock::now();
        train_seq.record(a, b);
      }
    }
  } else {
    OselmState st(params);
    st.init_train(synthetic_batch(hidden, rng), random_uniform(hidden, 1, rng, -1.0, 1.0),
                  delta);
    for (std::size_t r = 0; r < reps; ++r) {
      const Matrix x = synthetic_input(rng);
      {
        const auto a = Clock::now();
        volatile double sink = st.predict(x)(0, 0);
        const auto b = Clock::now();
        (void)sink;
        predict_seq.record(a, b);
      }
      Matrix t(1, 1);
      t(0, 0) = rng.uniform(-1.0, 1.0);
      {
        const auto a = Clock::now();
        st.seq_train(x, t);
        const auto b = Clock::now();
        train_seq.record(a, b);
      }
    }
  }

  nlohmann::ordered_json ops;
  ops["predict_init"] = predict_init.stats();
  ops["train_init"] = train_init.stats();
  ops["predict_seq"] = predict_seq.stats();
  ops["train_seq"] = train_seq.stats();
  return ops;
}

nlohmann::ordered_json bench_elm(std::size_t hidden, std::size_t reps, std::uint64_t seed) {
  Rng rng(seed);
  NetworkShape shape{5, hidden, 1};
  ElmParams params = elm_init(shape, rng, false);

  Series predict_init, train_init, predict_seq;
  for (std::size_t r = 0; r < reps; ++r) {
    const Matrix x = synthetic_input(rng);
    const auto a = Clock::now();
    volatile double sink = elm_predict(params, x)(0, 0);
    const auto b = Clock::now();
    (void)sink;
    predict_init.record(a, b);
  }
  const std::size_t fit_reps = std::max<std::size_t>(reps / 10, 100);
  const std::size_t batch = std::max<std::size_t>(kElmFitBatch, hidden);
  for (std::size_t r = 0; r < fit_reps; ++r) {
    const Matrix x = synthetic_batch(batch, rng);
    const Matrix t = random_uniform(batch, 1, rng, -1.0, 1.0);
    const auto a = Clock::now();
    params = elm_fit(std::move(params), x, t, 1e-8);
    const auto b = Clock::now();
    train_init.record(a, b);
  }
  for (std::size_t r = 0; r < reps; ++r) {
    const Matrix x = synthetic_input(rng);
    const auto a = Clock::now();
    volatile double sink = elm_predict(params, x)(0, 0);
    const auto b = Clock::now();
    (void)sink;
    predict_seq.record(a, b);
  }

  nlohmann::ordered_json ops;
  ops["predict_init"] = predict_init.stats();
  ops["train_init"] = train_init.stats();
  ops["predict_seq"] = predict_seq.stats();
  return ops;
}

nlohmann::ordered_json bench_dqn(std::size_t hidden, std::size_t reps, std::uint64_t seed) {
  Rng rng(seed);
  DqnConfig cfg;
  cfg.hidden = hidden;
  cfg.seed = seed;
  MlpParams online = mlp_init(cfg.state_dim, cfg.hidden, cfg.actions, rng);
  MlpParams target = online;
  AdamState adam(online, cfg.lr);
  ReplayBuffer buffer(cfg.capacity);
  for (std::size_t i = 0; i < cfg.capacity; ++i) {
    Experience e;
    const Matrix s = synthetic_batch(1, rng);
    const Matrix sn = synthetic_batch(1, rng);
    e.s.assign(s.row(0).begin(), s.row(0).begin() + 4);
    e.s_next.assign(sn.row(0).begin(), sn.row(0).begin() + 4);
    e.a = static_cast<int>(rng.uniform_index(cfg.actions));
    e.r = 1.0;
    e.d = rng.uniform() < 0.01 ? 1 : 0;
    buffer.push(std::move(e));
  }

  Series predict_1, predict_32, train_dqn, train_step_total;
  const Matrix one = synthetic_batch(1, rng);
  Matrix s1(1, 4);
  for (std::size_t i = 0; i < 4; ++i) s1(0, i) = one(0, i);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto a = Clock::now();
    volatile double sink = mlp_forward(online, s1)(0, 0);
    const auto b = Clock::now();
    (void)sink;
    predict_1.record(a, b);
  }
  Matrix s32(32, 4);
  for (std::size_t i = 0; i < 32; ++i) {
    const Matrix row = synthetic_batch(1, rng);
    for (std::size_t jj = 0; jj < 4; ++jj) s32(i, jj) = row(0, jj);
  }
  for (std::size_t r = 0; r < reps; ++r) {
    const auto a = Clock::now();
    volatile double sink = mlp_forward(online, s32)(0, 0);
    const auto b = Clock::now();
    (void)sink;
    predict_32.record(a, b);
  }
  // Gradient + optimizer work alone.
  for (std::size_t r = 0; r < reps; ++r) {
    const std::vector<std::size_t> idx = buffer.sample_indices(cfg.batch_size, rng);
    Matrix s(cfg.batch_size, 4), sn(cfg.batch_size, 4);
    std::vector<int> actions(cfg.batch_size);
    std::vector<double> targets(cfg.batch_size);
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      const Experience& e = buffer[idx[i]];
      std::copy(e.s.begin(), e.s.end(), s.row(i).begin());
      std::copy(e.s_next.begin(), e.s_next.end(), sn.row(i).begin());
      actions[i] = e.a;
    }
    const Matrix qn = mlp_forward(target, sn);
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      double best = qn(i, 0);
      for (std::size_t jj = 1; jj < qn.cols(); ++jj) best = std::max(best, qn(i, jj));
      const Experience& e = buffer[idx[i]];
      targets[i] = e.r + (e.d == 0 ? cfg.gamma * best : 0.0);
    }
    const auto a = Clock::now();
    const MlpGrads grads = dqn_loss_gradients(online, s, actions, targets);
    adam_step(online, adam, grads);
    const auto b = Clock::now();
    train_dqn.record(a, b);
  }
  // One whole train step, end to end.
  for (std::size_t r = 0; r < reps; ++r) {
    const auto a = Clock::now();
    dqn_train_step(online, target, adam, buffer, cfg, rng, nullptr);
    const auto b = Clock::now();
    train_step_total.record(a, b);
  }

  nlohmann::ordered_json ops;
  ops["predict_1"] = predict_1.stats();
  ops["predict_32"] = predict_32.stats();
  ops["train_DQN"] = train_dqn.stats();
  ops["train_step_total"] = train_step_total.stats();
  return ops;
}

}  // namespace

nlohmann::ordered_json benchmark_ops(Algo algo, std::size_t hidden, std::size_t reps,
                                     std::uint64_t seed) {
  if (hidden == 0) throw ConfigError("bench: hidden must be >= 1");
  reps = std::max<std::size_t>(reps, 1000);
  nlohmann::ordered_json j;
  j["algo"] = to_string(algo);
  j["hidden"] = hidden;
  j["reps"] = reps;
  j["seed"] = seed;
  switch (algo) {
    case Algo::dqn:
      j["ops"] = bench_dqn(hidden, reps, seed);
      break;
    case Algo::elm:
      j["ops"] = bench_elm(hidden, reps, seed);
      break;
    default:
      j["ops"] = bench_oselm(algo, hidden, reps, seed);
      break;
  }
  return j;
}

std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path.string());
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config: line " + std::to_string(lineno) + " has an empty key");
    }
    pairs.emplace_back(key, value);
  }
  return pairs;
}

}  // namespace oselmq
