#pragma once

// Seeded synthetic stand-in for multi-channel lower-limb gait recordings.
//
// Each channel is a quasi-periodic waveform with a terrain-specific harmonic
// profile. Terrains are laid out as contiguous segments. With noise_std == 0
// every channel is exactly periodic inside a segment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "gvfnet/common.hpp"

namespace gvfnet {

enum class ChannelKind : std::uint8_t { Emg, Goniometer, Pressure };

inline std::string_view channel_kind_name(ChannelKind k) {
  switch (k) {
    case ChannelKind::Emg: return "EMG";
    case ChannelKind::Goniometer: return "Goniometer";
    case ChannelKind::Pressure: return "Pressure";
  }
  return "?";
}

inline ChannelKind channel_kind_from_name(std::string_view s) {
  if (s == "EMG") return ChannelKind::Emg;
  if (s == "Goniometer") return ChannelKind::Goniometer;
  if (s == "Pressure") return ChannelKind::Pressure;
  throw ValidationError("unknown channel kind '" + std::string(s) + "'");
}

/// Montage for n channels: 14 EMG / 4 goniometer / 12 pressure at n = 30,
/// scaled proportionally otherwise.
inline std::vector<ChannelKind> default_channel_kinds(std::size_t n) {
  const auto emg = static_cast<std::size_t>(std::lround(static_cast<double>(n) * 14.0 / 30.0));
  const auto gon = std::min(n - emg, static_cast<std::size_t>(std::lround(static_cast<double>(n) * 4.0 / 30.0)));
  std::vector<ChannelKind> kinds(n, ChannelKind::Pressure);
  std::fill_n(kinds.begin(), emg, ChannelKind::Emg);
  std::fill_n(kinds.begin() + static_cast<std::ptrdiff_t>(emg), gon, ChannelKind::Goniometer);
  return kinds;
}

struct SessionConfig {
  std::uint64_t seed = 1;
  double raw_rate_hz = 1000.0;
  double target_rate_hz = 33.0;
  std::size_t n_channels = 30;
  std::size_t total_target_steps = 16500;
  double cycle_period_s = 1.0;
  std::size_t segment_min_steps = 400;
  std::size_t segment_max_steps = 1200;
  double noise_std = 0.05;
  // Cycle-to-cycle gain/offset variability, expressed as a multiple of noise_std.
  double cycle_jitter_gain = 16.0;
  // Scales how far terrain profiles stray from the shared base profile.
  double terrain_separation = 0.6;

  static constexpr std::size_t kMinTotalSteps = 14000;
  static constexpr std::size_t kMaxTotalSteps = 18000;
  static constexpr std::size_t kHarmonicsMax = 5;
  static constexpr double kCarrierLowHz = 20.0;
  static constexpr double kCarrierHighHz = 400.0;

  std::size_t decimation_factor() const {
    return static_cast<std::size_t>(std::lround(raw_rate_hz / target_rate_hz));
  }
  std::size_t cycle_samples() const {
    return static_cast<std::size_t>(std::lround(cycle_period_s * raw_rate_hz));
  }
  std::size_t raw_length() const { return total_target_steps * decimation_factor(); }
  double gait_cycles() const {
    return static_cast<double>(raw_length()) / static_cast<double>(cycle_samples());
  }
  double carrier_high_hz() const { return std::min(kCarrierHighHz, 0.4 * raw_rate_hz); }

  std::pair<std::size_t, std::size_t> segment_count_bounds() const {
    const std::size_t lo = std::max<std::size_t>(
        2 * kTerrainCount, (total_target_steps + segment_max_steps - 1) / segment_max_steps);
    const std::size_t hi = total_target_steps / segment_min_steps;
    return {lo, hi};
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("session config: " + m); };
    if (!(raw_rate_hz > 0.0)) fail("raw_rate_hz must be positive");
    if (!(target_rate_hz > 0.0)) fail("target_rate_hz must be positive");
    if (target_rate_hz > raw_rate_hz) fail("target_rate_hz exceeds raw_rate_hz");
    if (n_channels == 0) fail("n_channels must be positive");
    if (!(cycle_period_s > 0.0)) fail("cycle_period_s must be positive");
    if (!(noise_std >= 0.0)) fail("noise_std must be nonnegative");
    if (!(cycle_jitter_gain >= 0.0)) fail("cycle_jitter_gain must be nonnegative");
    if (!(terrain_separation >= 0.0)) fail("terrain_separation must be nonnegative");
    if (total_target_steps < kMinTotalSteps || total_target_steps > kMaxTotalSteps)
      fail("total_target_steps " + std::to_string(total_target_steps) + " outside [14000, 18000]");
    const double k = static_cast<double>(decimation_factor());
    if (k < 1.0 || std::abs(raw_rate_hz / k - target_rate_hz) > 0.05 * target_rate_hz)
      fail("target_rate_hz is not reachable from raw_rate_hz by an integer decimation factor");
    const double p = cycle_period_s * raw_rate_hz;
    if (std::abs(p - std::round(p)) > 1e-6 || cycle_samples() < 2)
      fail("cycle_period_s * raw_rate_hz must be an integer number of samples >= 2");
    const double highest = std::max(static_cast<double>(kHarmonicsMax) / cycle_period_s, carrier_high_hz());
    if (!(raw_rate_hz > 2.0 * highest)) fail("raw_rate_hz must exceed twice the highest synthesized frequency");
    if (carrier_high_hz() <= kCarrierLowHz) fail("raw_rate_hz too low for the EMG carrier band");
    if (segment_min_steps == 0 || segment_min_steps > segment_max_steps)
      fail("segment step range must satisfy 0 < min <= max");
    auto [lo, hi] = segment_count_bounds();
    if (lo > hi) fail("segment step range cannot tile total_target_steps with every terrain twice");
  }
};

struct Segment {
  TerrainLabel label;
  std::size_t steps;  // at the target rate
  bool operator==(const Segment&) const = default;
};

struct RawSession {
  SessionConfig config;
  std::vector<ChannelKind> channel_kinds;
  std::vector<std::vector<double>> channels;  // [channel][sample] at raw_rate_hz
  std::vector<TerrainLabel> labels;           // [sample]

  std::size_t size() const { return labels.size(); }
};

namespace detail {

inline std::mt19937_64 seeded_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

// How far each terrain's profile strays from the shared base profile. Stairs
// are far; ramps, turns and uneven ground stay close to even ground.
inline constexpr std::array<double, kTerrainCount> kTerrainSpread = {
  0.35, 0.45, 0.9, 0.9, 0.35, 0.35, 0.4,
};

struct ChannelProfile {
  double offset = 0.0;
  std::vector<double> amplitude;
  std::vector<double> phase;
};

} // namespace detail

/// Seeded terrain layout. Every terrain appears at least twice, no terrain
/// follows itself, segment lengths lie in the configured range and sum to
/// total_target_steps.
inline std::vector<Segment> terrain_schedule(const SessionConfig& config) {
  config.validate();
  auto rng = detail::seeded_stream(config.seed, 2);
  auto [lo, hi] = config.segment_count_bounds();
  const double mid = 0.5 * static_cast<double>(config.segment_min_steps + config.segment_max_steps);
  const auto n = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(static_cast<double>(config.total_target_steps) / mid)), lo, hi);

  std::vector<TerrainLabel> labels;
  for (int rep = 0; rep < 2; ++rep)
    labels.insert(labels.end(), kAllTerrains.begin(), kAllTerrains.end());
  std::uniform_int_distribution<int> pick_terrain(0, kTerrainCount - 1);
  while (labels.size() < n) labels.push_back(static_cast<TerrainLabel>(pick_terrain(rng)));

  auto has_repeat = [&] {
    return std::adjacent_find(labels.begin(), labels.end()) != labels.end();
  };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::shuffle(labels.begin(), labels.end(), rng);
    if (!has_repeat()) break;
  }

  std::uniform_int_distribution<std::size_t> pick_len(config.segment_min_steps, config.segment_max_steps);
  std::vector<std::size_t> lengths(n);
  for (auto& l : lengths) l = pick_len(rng);

  long long diff = static_cast<long long>(config.total_target_steps);
  for (auto l : lengths) diff -= static_cast<long long>(l);
  std::uniform_int_distribution<std::size_t> pick_seg(0, n - 1);
  for (int guard = 0; diff != 0 && guard < 100000; ++guard) {
    auto& l = lengths[pick_seg(rng)];
    const long long room = diff > 0 ? static_cast<long long>(config.segment_max_steps - l)
                                    : static_cast<long long>(l - config.segment_min_steps);
    const long long want = std::min(room, std::abs(diff));
    if (want <= 0) continue;
    const long long step = std::uniform_int_distribution<long long>(1, want)(rng);
    if (diff > 0) { l += static_cast<std::size_t>(step); diff -= step; }
    else          { l -= static_cast<std::size_t>(step); diff += step; }
  }
  // Deterministic sweep in the (practically unreachable) case the random walk stalled.
  for (auto& l : lengths) {
    if (diff > 0) {
      const auto add = std::min<long long>(diff, static_cast<long long>(config.segment_max_steps - l));
      l += static_cast<std::size_t>(add); diff -= add;
    } else if (diff < 0) {
      const auto sub = std::min<long long>(-diff, static_cast<long long>(l - config.segment_min_steps));
      l -= static_cast<std::size_t>(sub); diff += sub;
    }
  }

  std::vector<Segment> schedule(n);
  for (std::size_t i = 0; i < n; ++i) schedule[i] = {labels[i], lengths[i]};
  return schedule;
}

/// Pure function of the config (seed included).
inline RawSession generate_session(const SessionConfig& config) {
  config.validate();
  using detail::ChannelProfile;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  const std::size_t n_ch = config.n_channels;
  const std::size_t period = config.cycle_samples();
  const std::size_t k = config.decimation_factor();
  const std::size_t length = config.raw_length();

  RawSession out;
  out.config = config;
  out.channel_kinds = default_channel_kinds(n_ch);

  // Profiles: a base per channel, perturbed per terrain.
  auto prng = detail::seeded_stream(config.seed, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> harm_count(3, static_cast<int>(SessionConfig::kHarmonicsMax));

  // tables[terrain][channel] holds one period of the oscillatory part.
  std::vector<std::vector<std::vector<double>>> tables(kTerrainCount, std::vector<std::vector<double>>(n_ch));
  std::vector<std::vector<double>> offsets(kTerrainCount, std::vector<double>(n_ch));
  std::vector<std::vector<double>> carriers(n_ch);

  for (std::size_t c = 0; c < n_ch; ++c) {
    const ChannelKind kind = out.channel_kinds[c];
    ChannelProfile base;
    const int nh = harm_count(prng);
    switch (kind) {
      case ChannelKind::Emg: base.offset = 0.8 + 0.8 * unit(prng); break;
      case ChannelKind::Goniometer: base.offset = unit(prng) - 0.5; break;
      case ChannelKind::Pressure: base.offset = 0.6 * unit(prng) - 0.3; break;
    }
    for (int h = 1; h <= nh; ++h) {
      base.amplitude.push_back((0.3 + 0.7 * unit(prng)) / h);
      base.phase.push_back(two_pi * unit(prng));
    }
    for (std::size_t t = 0; t < kTerrainCount; ++t) {
      const double s = config.terrain_separation * detail::kTerrainSpread[t];
      ChannelProfile p = base;
      p.offset += s * 0.7 * gauss(prng);
      for (int h = 0; h < nh; ++h) {
        p.amplitude[h] *= std::exp(s * 0.5 * gauss(prng));
        p.phase[h] += s * 0.8 * gauss(prng);
      }
      offsets[t][c] = p.offset;
      auto& table = tables[t][c];
      table.resize(period);
      for (std::size_t i = 0; i < period; ++i) {
        const double x = two_pi * static_cast<double>(i) / static_cast<double>(period);
        double v = 0.0;
        for (int h = 0; h < nh; ++h) v += p.amplitude[h] * std::sin((h + 1) * x + p.phase[h]);
        table[i] = v;
      }
    }
    if (kind == ChannelKind::Emg) {
      // Broadband carrier built from harmonics of the cycle frequency so that
      // it repeats exactly once per cycle.
      const double f0 = config.raw_rate_hz / static_cast<double>(period);
      const auto lo_idx = static_cast<long>(std::ceil(SessionConfig::kCarrierLowHz / f0));
      const auto hi_idx = static_cast<long>(std::floor(config.carrier_high_hz() / f0));
      std::uniform_int_distribution<long> pick_idx(lo_idx, hi_idx);
      constexpr int n_tones = 12;
      std::vector<std::tuple<long, double, double>> tones;
      double power = 0.0;
      for (int j = 0; j < n_tones; ++j) {
        const double a = 0.5 + 0.5 * unit(prng);
        tones.emplace_back(pick_idx(prng), a, two_pi * unit(prng));
        power += 0.5 * a * a;
      }
      const double norm = 1.0 / std::sqrt(power);
      auto& car = carriers[c];
      car.resize(period);
      for (std::size_t i = 0; i < period; ++i) {
        double v = 0.0;
        for (auto [idx, a, ph] : tones)
          v += a * std::sin(two_pi * static_cast<double>(idx) * static_cast<double>(i) / static_cast<double>(period) + ph);
        car[i] = norm * v;
      }
    }
  }

  // Per-cycle gain and offset variability.
  const std::size_t n_cycles = (length + period - 1) / period;
  const double jitter = config.cycle_jitter_gain * config.noise_std;
  std::vector<double> cycle_gain(n_cycles * n_ch, 1.0), cycle_shift(n_cycles * n_ch, 0.0);
  if (jitter > 0.0) {
    auto jrng = detail::seeded_stream(config.seed, 3);
    for (std::size_t i = 0; i < n_cycles * n_ch; ++i) {
      cycle_gain[i] = 1.0 + jitter * gauss(jrng);
      cycle_shift[i] = 0.5 * jitter * gauss(jrng);
    }
  }

  const auto schedule = terrain_schedule(config);
  out.labels.resize(length);
  {
    std::size_t pos = 0;
    for (const auto& seg : schedule) {
      std::fill_n(out.labels.begin() + static_cast<std::ptrdiff_t>(pos), seg.steps * k, seg.label);
      pos += seg.steps * k;
    }
  }

  auto nrng = detail::seeded_stream(config.seed, 4);
  std::normal_distribution<double> noise(0.0, config.noise_std > 0.0 ? config.noise_std : 1.0);
  const bool noisy = config.noise_std > 0.0;

  out.channels.assign(n_ch, std::vector<double>(length));
  for (std::size_t c = 0; c < n_ch; ++c) {
    const ChannelKind kind = out.channel_kinds[c];
    auto& ch = out.channels[c];
    for (std::size_t n = 0; n < length; ++n) {
      const std::size_t t = index_of(out.labels[n]);
      const std::size_t phase = n % period;
      const std::size_t cyc = n / period;
      const double base = offsets[t][c] + cycle_shift[cyc * n_ch + c] + cycle_gain[cyc * n_ch + c] * tables[t][c][phase];
      const double eps = noisy ? noise(nrng) : 0.0;
      switch (kind) {
        case ChannelKind::Emg: ch[n] = std::max(0.0, base) * carriers[c][phase] + eps; break;
        case ChannelKind::Goniometer: ch[n] = base + eps; break;
        case ChannelKind::Pressure: ch[n] = std::max(0.0, base + eps); break;
      }
    }
  }
  return out;
}

} // namespace gvfnet
