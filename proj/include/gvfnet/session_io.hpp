#pragma once

// Session files: a columnar CSV (step,label,ch00..chNN) next to a plain-text
// key=value metadata file with the same stem and a ".meta" extension.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gvfnet/common.hpp"
#include "gvfnet/signal_prep.hpp"
#include "gvfnet/synth_gait.hpp"

namespace gvfnet {

/// Thrown when a file cannot be opened, written or renamed.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

/// Shortest representation that reads back to the same double.
inline void append_number(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

inline void append_number(std::string& out, std::uint64_t v) {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

inline std::string format_number(double v) {
  std::string s;
  append_number(s, v);
  return s;
}

/// Writes `content` to a sibling temporary file, then renames it over `path`.
inline void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    os.flush();
    if (!os) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string());
  }
}

inline std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return std::move(ss).str();
}

inline fs::path meta_path_for(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".meta");
  return p;
}

/// Ordered key=value store; keys keep insertion order on output.
class Metadata {
public:
  void set(std::string key, std::string value) {
    if (!index_.contains(key)) order_.push_back(key);
    index_[std::move(key)] = std::move(value);
  }
  void set(std::string key, double v) { set(std::move(key), format_number(v)); }
  void set(std::string key, std::size_t v) { set(std::move(key), std::to_string(v)); }

  bool contains(const std::string& key) const { return index_.contains(key); }

  const std::string& get(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw ParseError("metadata key '" + key + "' is missing", line_of(key));
    return it->second;
  }

  double get_double(const std::string& key) const {
    const auto& s = get(key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
      throw ParseError("metadata key '" + key + "' is not a number", line_of(key));
    return v;
  }

  std::uint64_t get_uint(const std::string& key) const {
    const auto& s = get(key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
      throw ParseError("metadata key '" + key + "' is not a nonnegative integer", line_of(key));
    return v;
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::string_view s = get(key);
    while (!s.empty()) {
      const auto comma = s.find(',');
      out.emplace_back(s.substr(0, comma));
      if (comma == std::string_view::npos) break;
      s.remove_prefix(comma + 1);
    }
    return out;
  }

  std::size_t line_of(const std::string& key) const {
    auto it = lines_.find(key);
    return it == lines_.end() ? 0 : it->second;
  }

  std::string serialize() const {
    std::string out;
    for (const auto& k : order_) out += k + "=" + index_.at(k) + "\n";
    return out;
  }

  static Metadata parse(std::string_view text) {
    Metadata m;
    std::size_t line = 0;
    while (!text.empty()) {
      ++line;
      const auto nl = text.find('\n');
      std::string_view row = text.substr(0, nl);
      text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
      if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
      if (row.empty() || row.front() == '#') continue;
      const auto eq = row.find('=');
      if (eq == std::string_view::npos || eq == 0) throw ParseError("metadata line is not key=value", line);
      std::string key(row.substr(0, eq));
      if (m.contains(key)) throw ParseError("duplicate metadata key '" + key + "'", line);
      m.lines_[key] = line;
      m.set(std::move(key), std::string(row.substr(eq + 1)));
    }
    return m;
  }

private:
  std::vector<std::string> order_;
  std::map<std::string, std::string> index_;
  std::map<std::string, std::size_t> lines_;
};

template <class T, class F>
std::string join(const std::vector<T>& v, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt(v[i]);
  }
  return out;
}

inline std::string channel_column(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ch%02zu", c);
  return buf;
}

inline std::string session_header(std::size_t n_channels) {
  std::string h = "step,label";
  for (std::size_t c = 0; c < n_channels; ++c) h += "," + channel_column(c);
  return h + "\n";
}

namespace detail {

inline constexpr std::string_view kRawFormat = "gvfnet-raw";
inline constexpr std::string_view kProcessedFormat = "gvfnet-processed";
inline constexpr std::size_t kSessionFileVersion = 1;

/// Row-major table of session rows: labels plus n_channels values per row.
struct SessionTable {
  std::size_t n_channels = 0;
  std::vector<TerrainLabel> labels;
  std::vector<double> values;
};

inline std::string encode_table(const SessionTable& t) {
  std::string out = session_header(t.n_channels);
  out.reserve(out.size() + t.labels.size() * (t.n_channels * 20 + 12));
  for (std::size_t i = 0; i < t.labels.size(); ++i) {
    append_number(out, static_cast<std::uint64_t>(i));
    out += ',';
    append_number(out, static_cast<std::uint64_t>(index_of(t.labels[i])));
    for (std::size_t c = 0; c < t.n_channels; ++c) {
      out += ',';
      append_number(out, t.values[i * t.n_channels + c]);
    }
    out += '\n';
  }
  return out;
}

/// Parses the CSV body; `unit_range` additionally requires values in [0, 1].
inline SessionTable decode_table(std::string_view text, std::size_t n_channels, std::size_t expected_rows,
                                 bool unit_range) {
  SessionTable t;
  t.n_channels = n_channels;
  t.labels.reserve(expected_rows);
  t.values.reserve(expected_rows * n_channels);

  const auto header = session_header(n_channels);
  const auto first_nl = text.find('\n');
  std::string_view first = text.substr(0, first_nl);
  if (!first.empty() && first.back() == '\r') first.remove_suffix(1);
  if (first != std::string_view(header).substr(0, header.size() - 1))
    throw ParseError("unexpected CSV header", 1);
  text.remove_prefix(first_nl == std::string_view::npos ? text.size() : first_nl + 1);

  std::size_t line = 1;
  while (!text.empty()) {
    ++line;
    const auto nl = text.find('\n');
    std::string_view row = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.empty()) {
      if (text.empty()) break;
      throw ParseError("empty row", line);
    }

    const char* p = row.data();
    const char* end = row.data() + row.size();
    auto expect_comma = [&] {
      if (p == end || *p != ',') throw ParseError("wrong number of columns", line);
      ++p;
    };
    std::uint64_t step = 0, label = 0;
    auto r1 = std::from_chars(p, end, step);
    if (r1.ec != std::errc{}) throw ParseError("step is not an integer", line);
    p = r1.ptr;
    if (step != t.labels.size()) throw ParseError("step " + std::to_string(step) + " out of sequence", line);
    expect_comma();
    auto r2 = std::from_chars(p, end, label);
    if (r2.ec != std::errc{}) throw ParseError("label is not an integer", line);
    if (label >= kTerrainCount) throw ParseError("label " + std::to_string(label) + " outside 0..6", line);
    p = r2.ptr;
    t.labels.push_back(static_cast<TerrainLabel>(label));
    for (std::size_t c = 0; c < n_channels; ++c) {
      expect_comma();
      double v = 0.0;
      auto r = std::from_chars(p, end, v);
      if (r.ec != std::errc{} || !std::isfinite(v))
        throw ParseError("column " + channel_column(c) + " is not a finite number", line);
      if (unit_range && !(v >= 0.0 && v <= 1.0))
        throw ParseError("column " + channel_column(c) + " outside [0, 1]", line);
      p = r.ptr;
      t.values.push_back(v);
    }
    if (p != end) throw ParseError("wrong number of columns", line);
  }
  if (t.labels.size() != expected_rows)
    throw ParseError("expected " + std::to_string(expected_rows) + " rows, found " +
                         std::to_string(t.labels.size()), line);
  return t;
}

inline std::vector<ChannelKind> parse_kinds(const Metadata& m, std::size_t n_channels) {
  std::vector<ChannelKind> kinds;
  for (const auto& s : m.get_list("channel_kinds")) {
    try {
      kinds.push_back(channel_kind_from_name(s));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), m.line_of("channel_kinds"));
    }
  }
  if (kinds.size() != n_channels) throw ParseError("channel_kinds count mismatch", m.line_of("channel_kinds"));
  return kinds;
}

inline void check_format(const Metadata& m, std::string_view format) {
  if (m.get("format") != format)
    throw ParseError("metadata format is '" + m.get("format") + "', expected '" + std::string(format) + "'",
                     m.line_of("format"));
  if (m.get_uint("version") != kSessionFileVersion)
    throw ParseError("unsupported session file version", m.line_of("version"));
}

inline std::string kinds_list(const std::vector<ChannelKind>& kinds) {
  return join(kinds, [](ChannelKind k) { return std::string(channel_kind_name(k)); });
}

} // namespace detail

inline Metadata raw_metadata(const RawSession& s) {
  const auto& c = s.config;
  Metadata m;
  m.set("format", std::string(detail::kRawFormat));
  m.set("version", detail::kSessionFileVersion);
  m.set("seed", std::to_string(c.seed));
  m.set("raw_rate_hz", c.raw_rate_hz);
  m.set("target_rate_hz", c.target_rate_hz);
  m.set("n_channels", c.n_channels);
  m.set("total_target_steps", c.total_target_steps);
  m.set("cycle_period_s", c.cycle_period_s);
  m.set("segment_min_steps", c.segment_min_steps);
  m.set("segment_max_steps", c.segment_max_steps);
  m.set("noise_std", c.noise_std);
  m.set("cycle_jitter_gain", c.cycle_jitter_gain);
  m.set("terrain_separation", c.terrain_separation);
  m.set("samples", s.size());
  m.set("channel_kinds", detail::kinds_list(s.channel_kinds));
  return m;
}

inline void write_raw_session(const RawSession& s, const fs::path& csv) {
  detail::SessionTable t;
  t.n_channels = s.channels.size();
  t.labels = s.labels;
  t.values.resize(s.size() * t.n_channels);
  for (std::size_t c = 0; c < t.n_channels; ++c)
    for (std::size_t i = 0; i < s.size(); ++i) t.values[i * t.n_channels + c] = s.channels[c][i];
  write_file_atomic(csv, detail::encode_table(t));
  write_file_atomic(meta_path_for(csv), raw_metadata(s).serialize());
}

/// ParseError line numbers refer to the CSV, or to the .meta file when the
/// message names a metadata key.
inline RawSession read_raw_session(const fs::path& csv) {
  const auto m = Metadata::parse(read_file(meta_path_for(csv)));
  detail::check_format(m, detail::kRawFormat);
  RawSession s;
  auto& c = s.config;
  c.seed = m.get_uint("seed");
  c.raw_rate_hz = m.get_double("raw_rate_hz");
  c.target_rate_hz = m.get_double("target_rate_hz");
  c.n_channels = m.get_uint("n_channels");
  c.total_target_steps = m.get_uint("total_target_steps");
  c.cycle_period_s = m.get_double("cycle_period_s");
  c.segment_min_steps = m.get_uint("segment_min_steps");
  c.segment_max_steps = m.get_uint("segment_max_steps");
  c.noise_std = m.get_double("noise_std");
  c.cycle_jitter_gain = m.get_double("cycle_jitter_gain");
  c.terrain_separation = m.get_double("terrain_separation");
  if (c.n_channels == 0 || c.n_channels > 1000) throw ParseError("n_channels out of range", m.line_of("n_channels"));
  s.channel_kinds = detail::parse_kinds(m, c.n_channels);
  const auto rows = m.get_uint("samples");
  auto t = detail::decode_table(read_file(csv), c.n_channels, rows, false);
  s.labels = std::move(t.labels);
  s.channels.assign(c.n_channels, std::vector<double>(rows));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t ch = 0; ch < c.n_channels; ++ch) s.channels[ch][i] = t.values[i * c.n_channels + ch];
  return s;
}

inline Metadata processed_metadata(const ProcessedSession& s, std::uint64_t source_seed) {
  Metadata m;
  m.set("format", std::string(detail::kProcessedFormat));
  m.set("version", detail::kSessionFileVersion);
  m.set("source_seed", std::to_string(source_seed));
  m.set("rate_hz", s.rate_hz);
  m.set("n_channels", s.n_channels);
  m.set("frames", s.size());
  m.set("channel_kinds", detail::kinds_list(s.channel_kinds));
  m.set("bound_min", join(s.bounds, [](const auto& b) { return format_number(b.first); }));
  m.set("bound_max", join(s.bounds, [](const auto& b) { return format_number(b.second); }));
  std::vector<int> flags(s.constant.begin(), s.constant.end());
  m.set("constant", join(flags, [](int f) { return std::to_string(f); }));
  return m;
}

inline void write_processed_session(const ProcessedSession& s, const fs::path& csv, std::uint64_t source_seed) {
  write_file_atomic(csv, detail::encode_table({s.n_channels, s.labels, s.values}));
  write_file_atomic(meta_path_for(csv), processed_metadata(s, source_seed).serialize());
}

struct LoadedSession {
  ProcessedSession session;
  std::uint64_t source_seed = 0;
};

inline LoadedSession read_processed_session(const fs::path& csv) {
  const auto m = Metadata::parse(read_file(meta_path_for(csv)));
  detail::check_format(m, detail::kProcessedFormat);
  LoadedSession out;
  out.source_seed = m.get_uint("source_seed");
  auto& s = out.session;
  s.n_channels = m.get_uint("n_channels");
  if (s.n_channels == 0 || s.n_channels > 1000) throw ParseError("n_channels out of range", m.line_of("n_channels"));
  s.rate_hz = m.get_double("rate_hz");
  s.channel_kinds = detail::parse_kinds(m, s.n_channels);

  auto numbers = [&](const std::string& key) {
    std::vector<double> v;
    for (const auto& item : m.get_list(key)) {
      double x = 0.0;
      auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
      if (ec != std::errc{} || p != item.data() + item.size()) throw ParseError("bad number in " + key, m.line_of(key));
      v.push_back(x);
    }
    if (v.size() != s.n_channels) throw ParseError(key + " count mismatch", m.line_of(key));
    return v;
  };
  const auto lo = numbers("bound_min");
  const auto hi = numbers("bound_max");
  const auto flags = numbers("constant");
  for (std::size_t c = 0; c < s.n_channels; ++c) {
    s.bounds.emplace_back(lo[c], hi[c]);
    s.constant.push_back(flags[c] != 0.0);
  }

  auto t = detail::decode_table(read_file(csv), s.n_channels, m.get_uint("frames"), true);
  s.labels = std::move(t.labels);
  s.values = std::move(t.values);
  return out;
}

} // namespace gvfnet
