#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "gvfnet/pipeline.hpp"
#include "gvfnet/signal_prep.hpp"

namespace testing_support {

/// Session cycling through `terrains` in blocks of `block` frames. Every
/// channel is a terrain-specific periodic waveform in [0, 1] plus optional
/// uniform noise.
inline gvfnet::ProcessedSession toy_session(std::size_t frames, std::size_t n_channels,
                                            std::vector<gvfnet::TerrainLabel> terrains, std::size_t block,
                                            double noise = 0.0, std::uint64_t seed = 1, double period = 33.0) {
  gvfnet::ProcessedSession s;
  s.n_channels = n_channels;
  s.rate_hz = 33.0;
  s.channel_kinds.assign(n_channels, gvfnet::ChannelKind::Goniometer);
  s.bounds.assign(n_channels, {0.0, 1.0});
  s.constant.assign(n_channels, false);
  s.values.resize(frames * n_channels);
  s.labels.resize(frames);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double w = 2.0 * std::numbers::pi / period;
  for (std::size_t t = 0; t < frames; ++t) {
    const auto label = terrains[(t / block) % terrains.size()];
    s.labels[t] = label;
    const double k = static_cast<double>(gvfnet::index_of(label));
    for (std::size_t c = 0; c < n_channels; ++c) {
      const double phase = 0.7 * static_cast<double>(c) + 1.3 * k;
      double v = 0.5 + 0.3 * std::sin(w * static_cast<double>(t) + phase) + 0.1 * std::cos(2.0 * phase + k);
      v += noise * u(rng);
      s.values[t * n_channels + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return s;
}

/// Small, fast pipeline settings for toy sessions.
inline gvfnet::RunConfig small_run_config() {
  gvfnet::RunConfig cfg;
  cfg.prototypes = 200;
  cfg.levels.counts = {50, 10, 5};
  cfg.eval_window = 200;
  cfg.return_window = 100;
  return cfg;
}

} // namespace testing_support
