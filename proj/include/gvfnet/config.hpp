#pragma once

// Plain-text experiment configuration. Lines are `key = value`; a `[section]`
// line prefixes the following keys with "section.". `#` starts a comment.
// Every key must be known; repeating a key is an error.
//
//   [synth]
//   seed = 7
//   noise_std = 0.05
//   [net]
//   encoder_sizes = 24, 16

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gvfnet/common.hpp"
#include "gvfnet/pipeline.hpp"
#include "gvfnet/session_io.hpp"
#include "gvfnet/signal_prep.hpp"
#include "gvfnet/synth_gait.hpp"

namespace gvfnet {

struct ExperimentConfig {
  SessionConfig synth;
  PrepConfig prep;
  RunConfig run;
  std::uint64_t seed = 1;   // base seed for sessions and nets
  std::size_t seeds = 10;   // seeded runs in compare

  void validate() const {
    synth.validate();
    run.validate();
    if (seeds == 0) throw ValidationError("experiment.seeds must be positive");
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_scalar(std::string_view s, std::size_t line, const std::string& key) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw ParseError("config key '" + key + "': cannot parse '" + std::string(s) + "'", line);
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) throw ParseError("config key '" + key + "' must be finite", line);
  return v;
}

inline bool parse_bool(std::string_view s, std::size_t line, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ParseError("config key '" + key + "': expected true or false", line);
}

inline std::vector<std::size_t> parse_sizes(std::string_view s, std::size_t line, const std::string& key) {
  std::vector<std::size_t> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(parse_scalar<std::size_t>(trim(s.substr(0, comma)), line, key));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

inline std::string format_value(double v) { return format_number(v); }
inline std::string format_value(std::size_t v) { return std::to_string(v); }
inline std::string format_value(unsigned v) { return std::to_string(v); }
inline std::string format_value(bool v) { return v ? "true" : "false"; }
inline std::string format_value(const std::vector<std::size_t>& v) {
  return join(v, [](std::size_t x) { return std::to_string(x); });
}

template <class T>
T parse_value(std::string_view v, std::size_t line, const std::string& key) {
  if constexpr (std::is_same_v<T, bool>) return parse_bool(v, line, key);
  else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) return parse_sizes(v, line, key);
  else return parse_scalar<T>(v, line, key);
}

struct KeyHandler {
  std::function<void(ExperimentConfig&, std::string_view, std::size_t, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

/// Handler for a field reached through `ref`, which maps a config to the field.
template <class Ref>
KeyHandler bind(Ref ref) {
  using T = std::remove_reference_t<decltype(ref(std::declval<ExperimentConfig&>()))>;
  return {[ref](ExperimentConfig& c, std::string_view v, std::size_t l, const std::string& k) {
            ref(c) = parse_value<T>(v, l, k);
          },
          [ref](const ExperimentConfig& c) {
            ExperimentConfig copy = c;
            return format_value(ref(copy));
          }};
}

#define GVFNET_KEY(name, member) {name, bind([](ExperimentConfig& c) -> auto& { return c.member; })}

inline const std::map<std::string, KeyHandler>& config_keys() {
  static const std::map<std::string, KeyHandler> keys = {
    GVFNET_KEY("experiment.seed", seed),
    GVFNET_KEY("experiment.seeds", seeds),

    GVFNET_KEY("synth.seed", synth.seed),
    GVFNET_KEY("synth.raw_rate_hz", synth.raw_rate_hz),
    GVFNET_KEY("synth.target_rate_hz", synth.target_rate_hz),
    GVFNET_KEY("synth.n_channels", synth.n_channels),
    GVFNET_KEY("synth.total_target_steps", synth.total_target_steps),
    GVFNET_KEY("synth.cycle_period_s", synth.cycle_period_s),
    GVFNET_KEY("synth.segment_min_steps", synth.segment_min_steps),
    GVFNET_KEY("synth.segment_max_steps", synth.segment_max_steps),
    GVFNET_KEY("synth.noise_std", synth.noise_std),
    GVFNET_KEY("synth.cycle_jitter_gain", synth.cycle_jitter_gain),
    GVFNET_KEY("synth.terrain_separation", synth.terrain_separation),

    GVFNET_KEY("prep.target_rate_hz", prep.target_rate_hz),
    GVFNET_KEY("prep.emg_order", prep.emg_order),
    GVFNET_KEY("prep.emg_low_hz", prep.emg_low_hz),
    GVFNET_KEY("prep.emg_high_hz", prep.emg_high_hz),
    GVFNET_KEY("prep.emg_strict_order", prep.emg_strict_order),
    GVFNET_KEY("prep.envelope_order", prep.envelope_order),
    GVFNET_KEY("prep.envelope_cutoff_hz", prep.envelope_cutoff_hz),
    GVFNET_KEY("prep.lowpass_order", prep.lowpass_order),
    GVFNET_KEY("prep.lowpass_cutoff_hz", prep.lowpass_cutoff_hz),
    GVFNET_KEY("prep.prime_lowpass", prep.prime_lowpass),

    GVFNET_KEY("skc.prototypes", run.prototypes),
    GVFNET_KEY("skc.c1", run.levels.counts[0]),
    GVFNET_KEY("skc.c2", run.levels.counts[1]),
    GVFNET_KEY("skc.c3", run.levels.counts[2]),
    GVFNET_KEY("skc.seed", run.prototype_seed),

    GVFNET_KEY("gvf.gamma", run.gvf_gamma),
    GVFNET_KEY("gvf.lambda", run.gvf_lambda),
    GVFNET_KEY("gvf.alpha", run.gvf_alpha),
    GVFNET_KEY("gvf.trace_tolerance", run.trace_tolerance),
    GVFNET_KEY("gvf.return_window", run.return_window),

    GVFNET_KEY("net.encoder_sizes", run.net.encoder_sizes),
    GVFNET_KEY("net.head_sizes", run.net.head_sizes),
    GVFNET_KEY("net.learning_rate", run.net.learning_rate),
    GVFNET_KEY("net.beta1", run.net.beta1),
    GVFNET_KEY("net.beta2", run.net.beta2),
    GVFNET_KEY("net.epsilon", run.net.epsilon),
    {"net.optimizer",
     {[](ExperimentConfig& c, std::string_view v, std::size_t l, const std::string& k) {
        if (v == "adam") c.run.net.optimizer = OptimizerKind::Adam;
        else if (v == "sgd") c.run.net.optimizer = OptimizerKind::Sgd;
        else throw ParseError("config key '" + k + "': expected adam or sgd", l);
      },
      [](const ExperimentConfig& c) -> std::string {
        return c.run.net.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
      }}},

    GVFNET_KEY("run.replay_capacity", run.replay_capacity),
    GVFNET_KEY("run.batch_recent", run.batch.recent),
    GVFNET_KEY("run.batch_replay", run.batch.replay),
    GVFNET_KEY("run.train_every", run.train_every),
    GVFNET_KEY("run.train_delay", run.train_delay),
    GVFNET_KEY("run.train_net", run.train_net),
    GVFNET_KEY("run.eval_window", run.eval_window),
    GVFNET_KEY("run.final_fraction", run.final_fraction),
  };
  return keys;
}

#undef GVFNET_KEY

} // namespace detail

/// Applies the settings in `text` on top of `base`.
inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {}) {
  const auto& keys = detail::config_keys();
  std::map<std::string, std::size_t> seen;
  std::string section;
  std::size_t line = 0;
  while (!text.empty()) {
    ++line;
    const auto nl = text.find('\n');
    std::string_view row = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = row.find('#'); hash != std::string_view::npos) row = row.substr(0, hash);
    row = detail::trim(row);
    if (row.empty()) continue;
    if (row.front() == '[') {
      if (row.back() != ']' || row.size() < 3) throw ParseError("malformed section header", line);
      section = std::string(detail::trim(row.substr(1, row.size() - 2)));
      continue;
    }
    const auto eq = row.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line);
    std::string key(detail::trim(row.substr(0, eq)));
    if (key.empty()) throw ParseError("empty key", line);
    if (!section.empty()) key = section + "." + key;
    auto it = keys.find(key);
    if (it == keys.end()) throw ParseError("unknown config key '" + key + "'", line);
    if (auto [pos, fresh] = seen.emplace(key, line); !fresh)
      throw ParseError("config key '" + key + "' repeated (first on line " + std::to_string(pos->second) + ")", line);
    it->second.set(base, detail::trim(row.substr(eq + 1)), line, key);
  }
  return base;
}

/// Every key with its current value, one per line, in sorted order; parses
/// back to the same configuration.
inline std::string dump_config(const ExperimentConfig& c) {
  std::string out;
  for (const auto& [k, h] : detail::config_keys()) out += k + " = " + h.get(c) + "\n";
  return out;
}

/// Every accepted key, sorted.
inline std::vector<std::string> config_key_names() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::config_keys()) out.push_back(k);
  return out;
}

} // namespace gvfnet
