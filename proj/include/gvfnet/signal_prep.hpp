#pragma once

// Butterworth design (bilinear transform with prewarping), causal biquad
// filtering, decimation and session-wide min-max normalization.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gvfnet/common.hpp"
#include "gvfnet/synth_gait.hpp"

namespace gvfnet {

/// Second-order section with a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(std::complex<double> z) const {
    const auto zi = 1.0 / z;
    return (b0 + zi * (b1 + zi * b2)) / (1.0 + zi * (a1 + zi * a2));
  }

  /// Roots of z^2 + a1 z + a2.
  std::array<std::complex<double>, 2> poles() const {
    const std::complex<double> disc = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2));
    return {(-a1 + disc) / 2.0, (-a1 - disc) / 2.0};
  }
};

using SosCascade = std::vector<Biquad>;

enum class FilterKind { BandPass, LowPass };

struct FilterSpec {
  FilterKind kind = FilterKind::LowPass;
  unsigned order = 2;
  double low_cut_hz = 0.0;   // BandPass only
  double high_cut_hz = 5.0;  // LowPass cutoff, or BandPass upper edge
  double sample_rate_hz = 1000.0;
  // BandPass: true means `order` is the total order (order/2 poles per edge);
  // false means each edge gets the full `order`.
  bool strict_order = true;

  static FilterSpec lowpass(unsigned order, double cutoff_hz, double fs) {
    return {FilterKind::LowPass, order, 0.0, cutoff_hz, fs, true};
  }
  static FilterSpec bandpass(unsigned order, double low_hz, double high_hz, double fs, bool strict = true) {
    return {FilterKind::BandPass, order, low_hz, high_hz, fs, strict};
  }

  unsigned edge_order() const {
    return kind == FilterKind::BandPass && strict_order ? order / 2 : order;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("filter spec: " + m); };
    if (!(sample_rate_hz > 0.0)) fail("sample_rate_hz must be positive");
    if (order == 0) fail("order must be positive");
    const double nyq = sample_rate_hz / 2.0;
    if (!(high_cut_hz > 0.0) || !(high_cut_hz < nyq)) fail("cutoff must lie in (0, Nyquist)");
    if (kind == FilterKind::BandPass) {
      if (!(low_cut_hz > 0.0) || !(low_cut_hz < nyq)) fail("low cutoff must lie in (0, Nyquist)");
      if (!(low_cut_hz < high_cut_hz)) fail("low cutoff must be below high cutoff");
      if (strict_order && order % 2 != 0) fail("strict bandpass order must be even");
    }
  }
};

namespace detail {

// Butterworth lowpass or highpass of the given order as biquads (plus one
// first-order section stored as a biquad when the order is odd).
inline SosCascade butterworth_edge(unsigned order, double cutoff_hz, double fs, bool highpass) {
  const double k = 2.0 * fs;
  const double wc = k * std::tan(std::numbers::pi * cutoff_hz / fs);  // prewarped
  SosCascade out;
  for (unsigned i = 0; i < order / 2; ++i) {
    // Analog pair s^2 + d s + wc^2, then s = k (z-1)/(z+1) and multiply
    // through by (z+1)^2 to read off the z^2, z^1, z^0 coefficients.
    const double theta = std::numbers::pi * (2.0 * i + 1.0) / (2.0 * order);
    const double d = 2.0 * std::sin(theta) * wc;
    const double a0 = k * k + d * k + wc * wc;
    const double a1 = 2.0 * wc * wc - 2.0 * k * k;
    const double a2 = k * k - d * k + wc * wc;
    Biquad q;
    if (highpass) {
      q.b0 = k * k / a0; q.b1 = -2.0 * k * k / a0; q.b2 = k * k / a0;
    } else {
      q.b0 = wc * wc / a0; q.b1 = 2.0 * wc * wc / a0; q.b2 = wc * wc / a0;
    }
    q.a1 = a1 / a0;
    q.a2 = a2 / a0;
    out.push_back(q);
  }
  if (order % 2 == 1) {
    const double a0 = k + wc;
    Biquad q;
    if (highpass) { q.b0 = k / a0; q.b1 = -k / a0; }
    else          { q.b0 = wc / a0; q.b1 = wc / a0; }
    q.a1 = (wc - k) / a0;
    out.push_back(q);
  }
  return out;
}

} // namespace detail

inline SosCascade design_butterworth(const FilterSpec& spec) {
  spec.validate();
  if (spec.kind == FilterKind::LowPass)
    return detail::butterworth_edge(spec.order, spec.high_cut_hz, spec.sample_rate_hz, false);
  auto cascade = detail::butterworth_edge(spec.edge_order(), spec.low_cut_hz, spec.sample_rate_hz, true);
  auto lp = detail::butterworth_edge(spec.edge_order(), spec.high_cut_hz, spec.sample_rate_hz, false);
  cascade.insert(cascade.end(), lp.begin(), lp.end());
  return cascade;
}

inline std::complex<double> frequency_response(const SosCascade& sections, double freq_hz, double fs) {
  const auto z = std::polar(1.0, 2.0 * std::numbers::pi * freq_hz / fs);
  std::complex<double> h = 1.0;
  for (const auto& s : sections) h *= s.response(z);
  return h;
}

inline double magnitude(const SosCascade& sections, double freq_hz, double fs) {
  return std::abs(frequency_response(sections, freq_hz, fs));
}

/// Per-section delay-line state for direct form II transposed.
struct SosState {
  std::vector<std::array<double, 2>> s;

  explicit SosState(std::size_t n_sections = 0) : s(n_sections, {0.0, 0.0}) {}

  /// Steady state for a constant input x0 held forever.
  static SosState steady(const SosCascade& sections, double x0) {
    SosState st(sections.size());
    double x = x0;
    for (std::size_t i = 0; i < sections.size(); ++i) {
      const auto& q = sections[i];
      const double gain = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
      const double y = gain * x;
      st.s[i][1] = q.b2 * x - q.a2 * y;
      st.s[i][0] = q.b1 * x - q.a1 * y + st.s[i][1];
      x = y;
    }
    return st;
  }
};

inline std::vector<double> filter_forward(const SosCascade& sections, std::span<const double> signal,
                                          SosState state) {
  std::vector<double> out(signal.begin(), signal.end());
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& q = sections[i];
    double s1 = state.s[i][0], s2 = state.s[i][1];
    for (double& v : out) {
      const double x = v;
      const double y = q.b0 * x + s1;
      s1 = q.b1 * x - q.a1 * y + s2;
      s2 = q.b2 * x - q.a2 * y;
      v = y;
    }
  }
  return out;
}

/// Causal filtering from zero initial state.
inline std::vector<double> filter_forward(const SosCascade& sections, std::span<const double> signal) {
  return filter_forward(sections, signal, SosState(sections.size()));
}

struct PrepConfig {
  double target_rate_hz = 33.0;
  unsigned emg_order = 4;
  double emg_low_hz = 10.0;
  double emg_high_hz = 450.0;
  bool emg_strict_order = true;
  unsigned envelope_order = 2;
  double envelope_cutoff_hz = 5.0;
  unsigned lowpass_order = 2;
  double lowpass_cutoff_hz = 5.0;
  // Start lowpass stages at the steady state of their first input sample
  // instead of zero, so the start-up transient does not set the channel range.
  bool prime_lowpass = true;
};

struct ProcessedSession {
  std::size_t n_channels = 0;
  double rate_hz = 0.0;
  std::vector<ChannelKind> channel_kinds;
  std::vector<double> values;  // row-major [frame][channel], each in [0, 1]
  std::vector<TerrainLabel> labels;
  std::vector<std::pair<double, double>> bounds;  // per-channel (min, max) before normalization
  std::vector<bool> constant;                     // channel had max == min

  std::size_t size() const { return labels.size(); }
  std::span<const double> frame(std::size_t i) const {
    return {values.data() + i * n_channels, n_channels};
  }
  double at(std::size_t frame_index, std::size_t channel) const {
    return values[frame_index * n_channels + channel];
  }
};

/// Min-max normalize one channel in place. Returns false for a constant
/// channel, which is set to 0.5.
inline bool normalize_min_max(std::vector<double>& v, std::pair<double, double>& bounds) {
  if (v.empty()) { bounds = {0.0, 0.0}; return false; }
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  bounds = {lo, hi};
  if (!(hi > lo)) {
    std::fill(v.begin(), v.end(), 0.5);
    return false;
  }
  const double range = hi - lo;
  for (double& x : v) x = std::clamp((x - lo) / range, 0.0, 1.0);
  return true;
}

inline ProcessedSession preprocess(const RawSession& raw, const PrepConfig& cfg = {}) {
  const double fs = raw.config.raw_rate_hz;
  if (!(cfg.target_rate_hz > 0.0) || cfg.target_rate_hz > fs)
    throw ValidationError("preprocess: target rate must lie in (0, raw rate]");
  const auto k = static_cast<std::size_t>(std::lround(fs / cfg.target_rate_hz));
  if (k == 0 || std::abs(fs / static_cast<double>(k) - cfg.target_rate_hz) > 0.05 * cfg.target_rate_hz)
    throw ValidationError("preprocess: raw rate is not an integer multiple of the target rate");
  if (raw.channels.size() != raw.channel_kinds.size())
    throw ValidationError("preprocess: channel kinds do not match channel count");
  for (const auto& ch : raw.channels)
    if (ch.size() != raw.labels.size()) throw ValidationError("preprocess: channel/label length mismatch");

  const auto bandpass = design_butterworth(
      FilterSpec::bandpass(cfg.emg_order, cfg.emg_low_hz, cfg.emg_high_hz, fs, cfg.emg_strict_order));
  const auto envelope = design_butterworth(FilterSpec::lowpass(cfg.envelope_order, cfg.envelope_cutoff_hz, fs));
  const auto smooth = design_butterworth(FilterSpec::lowpass(cfg.lowpass_order, cfg.lowpass_cutoff_hz, fs));

  auto lowpass = [&](const SosCascade& sos, const std::vector<double>& x) {
    if (cfg.prime_lowpass && !x.empty()) return filter_forward(sos, x, SosState::steady(sos, x.front()));
    return filter_forward(sos, x);
  };

  const std::size_t n_ch = raw.channels.size();
  const std::size_t n_out = (raw.size() + k - 1) / k;

  ProcessedSession out;
  out.n_channels = n_ch;
  out.rate_hz = fs / static_cast<double>(k);
  out.channel_kinds = raw.channel_kinds;
  out.values.resize(n_out * n_ch);
  out.labels.resize(n_out);
  out.bounds.resize(n_ch);
  out.constant.resize(n_ch);
  for (std::size_t j = 0; j < n_out; ++j) out.labels[j] = raw.labels[j * k];

  std::vector<double> decimated(n_out);
  for (std::size_t c = 0; c < n_ch; ++c) {
    std::vector<double> y;
    if (raw.channel_kinds[c] == ChannelKind::Emg) {
      y = filter_forward(bandpass, raw.channels[c]);
      for (double& v : y) v = std::abs(v);
      y = lowpass(envelope, y);
    } else {
      y = lowpass(smooth, raw.channels[c]);
    }
    for (std::size_t j = 0; j < n_out; ++j) decimated[j] = y[j * k];
    out.constant[c] = !normalize_min_max(decimated, out.bounds[c]);
    for (std::size_t j = 0; j < n_out; ++j) out.values[j * n_ch + c] = decimated[j];
  }
  return out;
}

} // namespace gvfnet
