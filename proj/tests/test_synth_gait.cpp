#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>

#include "gvfnet/signal_prep.hpp"
#include "gvfnet/synth_gait.hpp"
#include "oracles/nearest_centroid.hpp"

using namespace gvfnet;

TEST(TerrainLabel, StableEncoding) {
  EXPECT_EQ(kTerrainCount, 7u);
  for (std::size_t i = 0; i < kTerrainCount; ++i) {
    EXPECT_EQ(index_of(kAllTerrains[i]), i);
    EXPECT_EQ(terrain_from_index(static_cast<long>(i)), kAllTerrains[i]);
    EXPECT_EQ(terrain_from_name(kTerrainNames[i]), kAllTerrains[i]);
  }
  EXPECT_THROW(terrain_from_index(7), ValidationError);
  EXPECT_THROW(terrain_from_index(-1), ValidationError);
  EXPECT_FALSE(terrain_from_name("Stairs").has_value());
}

TEST(SessionConfig, RejectsInvalid) {
  auto bad = [](auto mutate) {
    SessionConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ValidationError);
  };
  bad([](SessionConfig& c) { c.total_target_steps = 100000; });
  bad([](SessionConfig& c) { c.total_target_steps = 13999; });
  bad([](SessionConfig& c) { c.raw_rate_hz = 9.0; });
  bad([](SessionConfig& c) { c.target_rate_hz = 0.0; });
  bad([](SessionConfig& c) { c.target_rate_hz = 2000.0; });
  bad([](SessionConfig& c) { c.target_rate_hz = 400.0; });
  bad([](SessionConfig& c) { c.cycle_period_s = 0.0005; });
  bad([](SessionConfig& c) { c.n_channels = 0; });
  bad([](SessionConfig& c) { c.noise_std = -0.1; });
  bad([](SessionConfig& c) { c.segment_min_steps = 1300; });
  bad([](SessionConfig& c) { c.segment_min_steps = 1200; });
  EXPECT_NO_THROW(SessionConfig{}.validate());
}

TEST(SessionConfig, DefaultsGiveAboutFiveHundredCycles) {
  SessionConfig c;
  c.total_target_steps = 16500;
  EXPECT_EQ(c.decimation_factor(), 30u);
  EXPECT_GE(c.gait_cycles(), 425.0);
  EXPECT_LE(c.gait_cycles(), 545.0);
  EXPECT_NEAR(c.gait_cycles(), 495.0, 1e-9);
}

TEST(TerrainSchedule, PostconditionsOverSeeds) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    SessionConfig c;
    c.seed = seed;
    const auto s = terrain_schedule(c);
    std::size_t total = 0;
    std::array<int, kTerrainCount> seen{};
    for (std::size_t i = 0; i < s.size(); ++i) {
      total += s[i].steps;
      ++seen[index_of(s[i].label)];
      EXPECT_GE(s[i].steps, c.segment_min_steps);
      EXPECT_LE(s[i].steps, c.segment_max_steps);
      if (i > 0) { EXPECT_NE(s[i].label, s[i - 1].label); }
    }
    EXPECT_EQ(total, c.total_target_steps);
    for (int n : seen) EXPECT_GE(n, 2);
  }
}

TEST(TerrainSchedule, DifferentSeedsDiffer) {
  for (std::uint64_t a = 1; a <= 5; ++a) {
    SessionConfig x, y;
    x.seed = a;
    y.seed = a + 100;
    EXPECT_NE(terrain_schedule(x), terrain_schedule(y));
  }
}

TEST(GenerateSession, DeterministicAndAligned) {
  SessionConfig c;
  c.seed = 11;
  c.total_target_steps = 14000;
  const auto a = generate_session(c);
  const auto b = generate_session(c);
  EXPECT_EQ(a.channels, b.channels);
  EXPECT_EQ(a.labels, b.labels);
  ASSERT_EQ(a.channels.size(), 30u);
  EXPECT_EQ(a.size(), c.raw_length());
  for (const auto& ch : a.channels) EXPECT_EQ(ch.size(), a.size());

  // 14 EMG, 4 goniometer, 12 pressure
  EXPECT_EQ(std::count(a.channel_kinds.begin(), a.channel_kinds.end(), ChannelKind::Emg), 14);
  EXPECT_EQ(std::count(a.channel_kinds.begin(), a.channel_kinds.end(), ChannelKind::Goniometer), 4);
  EXPECT_EQ(std::count(a.channel_kinds.begin(), a.channel_kinds.end(), ChannelKind::Pressure), 12);

  for (std::size_t c2 = 0; c2 < 30; ++c2)
    if (a.channel_kinds[c2] == ChannelKind::Pressure) {
      for (double v : a.channels[c2]) ASSERT_GE(v, 0.0);
    }
}

TEST(GenerateSession, LabelsFormTheScheduledSegments) {
  SessionConfig c;
  c.seed = 4;
  const auto raw = generate_session(c);
  const auto sched = terrain_schedule(c);
  const std::size_t k = c.decimation_factor();
  std::size_t pos = 0;
  for (const auto& seg : sched) {
    for (std::size_t i = 0; i < seg.steps * k; ++i) ASSERT_EQ(raw.labels[pos + i], seg.label);
    pos += seg.steps * k;
  }
  EXPECT_EQ(pos, raw.size());
}

TEST(GenerateSession, NoiselessIsPeriodicWithinSegments) {
  SessionConfig c;
  c.seed = 3;
  c.noise_std = 0.0;
  const auto raw = generate_session(c);
  const std::size_t p = c.cycle_samples();
  std::size_t checked = 0;
  for (std::size_t i = 0; i + p < raw.size(); ++i) {
    if (raw.labels[i] != raw.labels[i + p]) continue;
    // Only compare pairs lying within one contiguous segment.
    bool same_segment = true;
    for (std::size_t j = i; j <= i + p && same_segment; j += p / 4) same_segment = raw.labels[j] == raw.labels[i];
    if (!same_segment) continue;
    for (std::size_t ch = 0; ch < raw.channels.size(); ++ch)
      ASSERT_EQ(raw.channels[ch][i], raw.channels[ch][i + p]) << "channel " << ch << " sample " << i;
    ++checked;
  }
  EXPECT_GT(checked, raw.size() / 2);
}

TEST(GenerateSession, NearestCentroidBeatsFortyPercentOnHeldOutSegments) {
  // Centroids come from the first segment of each terrain; every later
  // segment is held out.
  const auto s = preprocess(generate_session(SessionConfig{}));
  std::array<std::size_t, kTerrainCount> first_segment;
  first_segment.fill(SIZE_MAX);
  std::vector<double> fit_values, test_values;
  std::vector<std::size_t> fit_labels, test_labels;
  std::size_t segment = 0;
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (t > 0 && s.labels[t] != s.labels[t - 1]) ++segment;
    const std::size_t l = index_of(s.labels[t]);
    if (first_segment[l] == SIZE_MAX) first_segment[l] = segment;
    const bool fit = first_segment[l] == segment;
    auto& values = fit ? fit_values : test_values;
    values.insert(values.end(), s.values.begin() + static_cast<std::ptrdiff_t>(t * s.n_channels),
                  s.values.begin() + static_cast<std::ptrdiff_t>((t + 1) * s.n_channels));
    (fit ? fit_labels : test_labels).push_back(l);
  }
  oracle::NearestCentroid<kTerrainCount> nc;
  nc.fit(fit_values, fit_labels, s.n_channels);
  const double acc = nc.accuracy(test_values, test_labels);
  EXPECT_GT(acc, 0.40);
  EXPECT_LT(acc, 0.99);
}
