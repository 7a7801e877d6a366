#pragma once

// Online experiment loop. Per frame t:
//   1. classify frame t with the current net (scored before any training on it)
//   2. push the sample into the replay buffer and the recent window
//   3. train on one new/replay batch
//   4. step the GVF bank on the transition t -> t+1 with frame t+1 as cumulants
// The GVF bank never reads labels and never sees the net, so its prediction
// trace is computed once per session and shared by every variant.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "gvfnet/common.hpp"
#include "gvfnet/gvf_totd.hpp"
#include "gvfnet/kanerva.hpp"
#include "gvfnet/policy_net.hpp"
#include "gvfnet/replay_buffer.hpp"
#include "gvfnet/signal_prep.hpp"

namespace gvfnet {

struct RunConfig {
  std::size_t prototypes = 5000;
  ResolutionLevels levels;
  std::uint64_t prototype_seed = 1;
  double gvf_gamma = 0.94;
  double gvf_lambda = 0.5;
  double gvf_alpha = 0.0;          // <= 0 selects 0.1 / (c1 + c2 + c3)
  double trace_tolerance = 1e-12;
  NetConfig net;                   // variant and init_seed are set per run
  std::size_t replay_capacity = 1000;
  BatchSpec batch;
  std::size_t train_every = 1;
  std::size_t train_delay = 0;     // frames before the net starts training
  bool train_net = true;           // false: score a fixed net without updating it
  std::size_t eval_window = 500;
  double final_fraction = 0.1;     // tail of the stream scored as end-of-training accuracy
  std::size_t return_window = 200; // truncation of the brute-force discounted return

  TdParams td() const {
    return {gvf_gamma, gvf_lambda, gvf_alpha > 0.0 ? gvf_alpha : 0.1 / static_cast<double>(levels.total())};
  }

  void validate() const {
    levels.validate(prototypes);
    td().validate();
    if (replay_capacity == 0) throw ValidationError("run config: replay_capacity must be positive");
    if (batch.recent == 0) throw ValidationError("run config: batch.recent must be positive");
    if (train_every == 0) throw ValidationError("run config: train_every must be positive");
    if (eval_window == 0) throw ValidationError("run config: eval_window must be positive");
    if (!(final_fraction > 0.0 && final_fraction <= 1.0))
      throw ValidationError("run config: final_fraction must lie in (0, 1]");
    if (return_window == 0) throw ValidationError("run config: return_window must be positive");
  }
};

/// GVF outputs aligned with frames: entry t is what the policy net sees with
/// frame t (zero at t = 0, before any transition).
struct GvfTrace {
  std::size_t n_steps = 0;
  std::size_t n_channels = 0;
  double gamma = 0.94;
  std::vector<double> raw;         // [t * n_channels + c]
  std::vector<double> normalized;  // clamp((1 - gamma) raw, 0, 1.5)

  double value(std::size_t t, std::size_t c) const { return raw[t * n_channels + c]; }
  std::span<const double> normalized_at(std::size_t t) const {
    return {normalized.data() + t * n_channels, n_channels};
  }
};

struct GvfRun {
  PrototypeSet prototypes;
  GvfBank bank;
  GvfTrace trace;
};

inline void check_session(const ProcessedSession& s) {
  if (s.size() < 2) throw ValidationError("session needs at least two frames");
  if (s.n_channels == 0 || s.values.size() != s.size() * s.n_channels)
    throw ValidationError("session frame/channel dimensions are inconsistent");
}

/// Streams the session through SKC and the GVF bank.
inline GvfRun run_gvf(const ProcessedSession& session, const RunConfig& cfg) {
  cfg.validate();
  check_session(session);
  const std::size_t n_ch = session.n_channels;
  GvfRun run{PrototypeSet::generate(cfg.prototypes, n_ch, cfg.prototype_seed, cfg.levels),
             GvfBank(n_ch, 3 * cfg.prototypes, cfg.td(), cfg.trace_tolerance), GvfTrace{}};
  auto& tr = run.trace;
  tr.n_steps = session.size();
  tr.n_channels = n_ch;
  tr.gamma = cfg.gvf_gamma;
  tr.raw.assign(tr.n_steps * n_ch, 0.0);
  tr.normalized.assign(tr.n_steps * n_ch, 0.0);

  SkcEncoder enc(run.prototypes, cfg.levels);
  FeatureVector x = enc.encode(session.frame(0));
  for (std::size_t t = 0; t + 1 < session.size(); ++t) {
    FeatureVector x_next = enc.encode(session.frame(t + 1));
    const auto v = run.bank.step(x, x_next, session.frame(t + 1));
    for (std::size_t c = 0; c < n_ch; ++c) {
      tr.raw[(t + 1) * n_ch + c] = v[c];
      tr.normalized[(t + 1) * n_ch + c] = normalize_prediction(v[c], tr.gamma);
    }
    x = std::move(x_next);
  }
  return run;
}

/// Mean squared error between (1 - gamma) V(t) and the truncated discounted
/// average (1 - gamma) sum_{k < window} gamma^k z(t+k+1), over t in
/// [begin, end) that have a full window of future frames.
inline std::vector<double> gvf_return_error(const ProcessedSession& session, const GvfTrace& trace,
                                            std::size_t window = 200, std::size_t begin = 0,
                                            std::size_t end = static_cast<std::size_t>(-1)) {
  const std::size_t n_ch = trace.n_channels;
  std::vector<double> err(n_ch, 0.0);
  const std::size_t last = session.size() > window ? session.size() - window : 0;  // exclusive
  end = std::min(end, last);
  if (begin >= end) return std::vector<double>(n_ch, std::nan(""));
  const double g = trace.gamma;
  std::vector<double> weights(window);
  for (std::size_t k = 0; k < window; ++k) weights[k] = std::pow(g, static_cast<double>(k));
  for (std::size_t c = 0; c < n_ch; ++c) {
    double acc = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
      double target = 0.0;
      for (std::size_t k = 0; k < window; ++k) target += weights[k] * session.at(t + k + 1, c);
      const double d = (1.0 - g) * (trace.value(t, c) - target);
      acc += d * d;
    }
    err[c] = acc / static_cast<double>(end - begin);
  }
  return err;
}

struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kTerrainCount>, kTerrainCount> counts{};  // [correct][predicted]

  void add(std::size_t correct, std::size_t predicted) { ++counts[correct][predicted]; }
  std::uint64_t row_sum(std::size_t r) const {
    std::uint64_t s = 0;
    for (auto v : counts[r]) s += v;
    return s;
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (std::size_t r = 0; r < kTerrainCount; ++r) s += row_sum(r);
    return s;
  }
  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t r = 0; r < kTerrainCount; ++r) s += counts[r][r];
    return s;
  }
  /// NaN for a terrain that never occurred.
  double accuracy(std::size_t r) const {
    const auto n = row_sum(r);
    return n ? static_cast<double>(counts[r][r]) / static_cast<double>(n) : std::nan("");
  }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    for (std::size_t r = 0; r < kTerrainCount; ++r)
      for (std::size_t c = 0; c < kTerrainCount; ++c) counts[r][c] += o.counts[r][c];
    return *this;
  }
};

struct VariantMetrics {
  NetVariant variant = NetVariant::Control;
  std::uint64_t seed = 0;
  std::size_t session = 0;
  std::vector<double> curve;         // windowed accuracy, floor(frames / window) points
  double final_accuracy = 0.0;       // last final_fraction of frames
  double overall_accuracy = 0.0;     // all frames
  double post_burn_in_accuracy = 0.0;// frames after the first evaluation window
  std::array<double, kTerrainCount> per_terrain{};
  ConfusionMatrix confusion;
  std::vector<std::uint8_t> predicted;  // per frame
};

struct VariantRun {
  VariantMetrics metrics;
  PolicyNet net;
};

/// Prequential run of one policy-net variant over a session. With `initial`
/// the run continues from that net (its variant and widths must match).
inline VariantRun run_variant(const ProcessedSession& session, const GvfTrace& trace, NetVariant variant,
                              std::uint64_t seed, const RunConfig& cfg, const PolicyNet* initial = nullptr) {
  cfg.validate();
  check_session(session);
  if (trace.n_steps != session.size() || trace.n_channels != session.n_channels)
    throw ValidationError("gvf trace does not match session dimensions");
  NetConfig ncfg = cfg.net;
  ncfg.variant = variant;
  ncfg.init_seed = seed;
  ncfg.n_actual = session.n_channels;
  ncfg.n_predictions = session.n_channels;
  if (initial) {
    const auto& ic = initial->config();
    if (ic.variant != variant || ic.n_actual != ncfg.n_actual ||
        (uses_predictions(variant) && ic.n_predictions != ncfg.n_predictions))
      throw ValidationError("initial net does not match the requested variant or session width");
  }
  VariantRun out{VariantMetrics{}, initial ? *initial : PolicyNet(ncfg)};
  auto& m = out.metrics;
  auto& net = out.net;
  m.variant = variant;
  m.seed = seed;

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xba7c4u};
  std::mt19937_64 rng(seq);
  ReplayBuffer buffer(cfg.replay_capacity);
  std::deque<Sample> recent;
  std::vector<const Sample*> recent_ptrs;

  const std::size_t n = session.size();
  const bool with_pred = uses_predictions(variant);
  m.predicted.resize(n);
  std::vector<std::uint8_t> correct(n);
  for (std::size_t t = 0; t < n; ++t) {
    Sample s;
    const auto frame = session.frame(t);
    s.actuals.assign(frame.begin(), frame.end());
    if (with_pred) {
      const auto p = trace.normalized_at(t);
      s.predictions.assign(p.begin(), p.end());
    }
    s.label = index_of(session.labels[t]);

    const auto cls = net.forward(s);
    m.predicted[t] = static_cast<std::uint8_t>(cls.label);
    correct[t] = cls.label == s.label;
    m.confusion.add(s.label, cls.label);

    buffer.push(s);
    recent.push_back(std::move(s));
    if (recent.size() > cfg.batch.recent) recent.pop_front();

    if (cfg.train_net && recent.size() >= cfg.batch.recent && t >= cfg.train_delay && t % cfg.train_every == 0) {
      recent_ptrs.clear();
      for (const auto& r : recent) recent_ptrs.push_back(&r);
      net.train_batch(assemble_batch(std::span<const Sample* const>(recent_ptrs), buffer, rng, cfg.batch));
    }
  }

  auto mean_range = [&](std::size_t a, std::size_t b) {
    if (a >= b) return std::nan("");
    std::size_t hits = 0;
    for (std::size_t t = a; t < b; ++t) hits += correct[t];
    return static_cast<double>(hits) / static_cast<double>(b - a);
  };
  for (std::size_t w = 0; w + 1 <= n / cfg.eval_window; ++w)
    m.curve.push_back(mean_range(w * cfg.eval_window, (w + 1) * cfg.eval_window));
  const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.final_fraction * static_cast<double>(n))));
  m.final_accuracy = mean_range(n - std::min(n, tail), n);
  m.overall_accuracy = mean_range(0, n);
  m.post_burn_in_accuracy = mean_range(std::min(n, cfg.eval_window), n);
  for (std::size_t r = 0; r < kTerrainCount; ++r) m.per_terrain[r] = m.confusion.accuracy(r);
  return out;
}

struct RunMetrics {
  std::vector<double> gvf_error;  // per channel, over the whole session
  std::vector<VariantMetrics> variants;
};

inline RunMetrics run_online(const ProcessedSession& session, const RunConfig& cfg,
                             const std::vector<NetVariant>& variants, std::uint64_t seed) {
  if (variants.empty()) throw ValidationError("run_online: at least one variant is required");
  const auto gvf = run_gvf(session, cfg);
  RunMetrics out;
  out.gvf_error = gvf_return_error(session, gvf.trace, cfg.return_window);
  for (auto v : variants) out.variants.push_back(run_variant(session, gvf.trace, v, seed, cfg).metrics);
  return out;
}

/// Runs fn(0..n-1) on up to `jobs` threads. Rethrows the first failure.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct Comparison {
  std::vector<VariantMetrics> runs;            // ordered by (session, seed, variant)
  std::vector<std::vector<double>> gvf_error;  // per session
};

/// Source of session i; called from worker threads, must be thread-safe.
using SessionSource = std::function<ProcessedSession(std::size_t)>;

/// Every variant over every (session, seed) pair. seeds_for(i) gives the net
/// seeds used with session i.
inline Comparison compare_variants(std::size_t n_sessions, const SessionSource& source,
                                   const std::function<std::vector<std::uint64_t>(std::size_t)>& seeds_for,
                                   const RunConfig& cfg, const std::vector<NetVariant>& variants,
                                   std::size_t jobs = 1) {
  cfg.validate();
  if (n_sessions == 0) throw ValidationError("compare: at least one session is required");
  if (variants.empty()) throw ValidationError("compare: at least one variant is required");
  std::vector<std::vector<VariantMetrics>> per_session(n_sessions);
  std::vector<std::vector<double>> errors(n_sessions);
  parallel_for(n_sessions, jobs, [&](std::size_t i) {
    const ProcessedSession session = source(i);
    const auto gvf = run_gvf(session, cfg);
    errors[i] = gvf_return_error(session, gvf.trace, cfg.return_window);
    for (auto seed : seeds_for(i))
      for (auto v : variants) {
        auto m = run_variant(session, gvf.trace, v, seed, cfg).metrics;
        m.session = i;
        m.predicted.clear();
        m.predicted.shrink_to_fit();
        per_session[i].push_back(std::move(m));
      }
  });
  Comparison out;
  for (auto& v : per_session)
    for (auto& m : v) out.runs.push_back(std::move(m));
  out.gvf_error = std::move(errors);
  return out;
}

} // namespace gvfnet
