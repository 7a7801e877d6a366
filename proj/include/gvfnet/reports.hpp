#pragma once

// CSV and text artifacts of training and comparison runs. Every writer
// returns the file contents, so output bytes depend only on the inputs.

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "gvfnet/common.hpp"
#include "gvfnet/pipeline.hpp"
#include "gvfnet/session_io.hpp"
#include "gvfnet/stats.hpp"

namespace gvfnet {

/// One run's scalar results; the input of the statistics stage.
struct AccuracyRecord {
  NetVariant variant = NetVariant::Control;
  std::uint64_t seed = 0;
  std::size_t session = 0;
  double final_accuracy = 0.0;
  double overall_accuracy = 0.0;
  double post_burn_in_accuracy = 0.0;
  std::array<double, kTerrainCount> per_terrain{};
};

inline AccuracyRecord to_record(const VariantMetrics& m) {
  return {m.variant, m.seed, m.session, m.final_accuracy, m.overall_accuracy, m.post_burn_in_accuracy, m.per_terrain};
}

inline std::vector<AccuracyRecord> to_records(const std::vector<VariantMetrics>& runs) {
  std::vector<AccuracyRecord> out;
  for (const auto& m : runs) out.push_back(to_record(m));
  return out;
}

namespace detail {

inline std::string terrain_columns() {
  std::string s;
  for (auto name : kTerrainNames) (s += ',') += name;
  return s;
}

inline std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

} // namespace detail

inline std::string convergence_csv(const std::vector<VariantMetrics>& runs, std::size_t window) {
  std::string out = "step,variant,seed,windowed_accuracy,session\n";
  for (const auto& m : runs)
    for (std::size_t w = 0; w < m.curve.size(); ++w) {
      out += std::to_string((w + 1) * window) + "," + std::string(variant_name(m.variant)) + "," +
             std::to_string(m.seed) + ",";
      append_number(out, m.curve[w]);
      out += "," + std::to_string(m.session) + "\n";
    }
  return out;
}

/// Rows are the correct terrain, columns the predicted one.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "correct" + detail::terrain_columns() + "\n";
  for (std::size_t r = 0; r < kTerrainCount; ++r) {
    out += kTerrainNames[r];
    for (std::size_t c = 0; c < kTerrainCount; ++c) out += "," + std::to_string(cm.counts[r][c]);
    out += "\n";
  }
  return out;
}

inline std::string per_terrain_csv(const std::vector<AccuracyRecord>& runs) {
  std::string out = "variant,seed,session" + detail::terrain_columns() + "\n";
  for (const auto& r : runs) {
    out += std::string(variant_name(r.variant)) + "," + std::to_string(r.seed) + "," + std::to_string(r.session);
    for (double a : r.per_terrain) {
      out += ',';
      append_number(out, a);
    }
    out += "\n";
  }
  return out;
}

inline std::string accuracy_csv(const std::vector<AccuracyRecord>& runs) {
  std::string out = "variant,seed,session,final_accuracy,overall_accuracy,post_burn_in_accuracy\n";
  for (const auto& r : runs) {
    out += std::string(variant_name(r.variant)) + "," + std::to_string(r.seed) + "," + std::to_string(r.session);
    for (double a : {r.final_accuracy, r.overall_accuracy, r.post_burn_in_accuracy}) {
      out += ',';
      append_number(out, a);
    }
    out += "\n";
  }
  return out;
}

/// errors[session][channel]
inline std::string gvf_error_csv(const std::vector<std::vector<double>>& errors,
                                 const std::vector<ChannelKind>& kinds) {
  std::string out = "session,channel,kind,mse\n";
  for (std::size_t s = 0; s < errors.size(); ++s)
    for (std::size_t c = 0; c < errors[s].size(); ++c) {
      out += std::to_string(s) + "," + channel_column(c) + "," +
             (c < kinds.size() ? std::string(channel_kind_name(kinds[c])) : std::string("?")) + ",";
      append_number(out, errors[s][c]);
      out += "\n";
    }
  return out;
}

/// Trace of one GVF next to its brute-force target, both on the cumulant's scale.
inline std::string gvf_probe_csv(const ProcessedSession& session, const GvfTrace& trace, std::size_t channel,
                                 std::size_t window) {
  std::string out = "step,ch,V,V_normalized,cumulant,return\n";
  const double g = trace.gamma;
  const std::size_t n = session.size();
  for (std::size_t t = 0; t < n; ++t) {
    out += std::to_string(t) + "," + std::to_string(channel) + ",";
    append_number(out, trace.value(t, channel));
    out += ',';
    append_number(out, trace.normalized[t * trace.n_channels + channel]);
    out += ',';
    append_number(out, session.at(t, channel));
    out += ',';
    if (t + window < n) {
      double target = 0.0, gk = 1.0;
      for (std::size_t k = 0; k < window; ++k, gk *= g) target += gk * session.at(t + k + 1, channel);
      append_number(out, (1.0 - g) * target);
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------- statistics

inline constexpr std::string_view kOverallMetric = "final_accuracy";

/// Observations per variant for one metric ("final_accuracy" or a terrain
/// name), in canonical variant order, skipping variants with no runs. NaN
/// per-terrain entries (terrain absent from a session) are dropped.
inline stats::GroupedSamples group_by_variant(const std::vector<AccuracyRecord>& runs, std::string_view metric) {
  const auto terrain = terrain_from_name(metric);
  if (!terrain && metric != kOverallMetric) throw ValidationError("unknown metric '" + std::string(metric) + "'");
  stats::GroupedSamples g;
  for (auto v : kAllVariants) {
    stats::Group grp{std::string(variant_name(v)), {}};
    bool any = false;
    for (const auto& r : runs) {
      if (r.variant != v) continue;
      any = true;
      const double x = terrain ? r.per_terrain[index_of(*terrain)] : r.final_accuracy;
      if (!std::isnan(x)) grp.values.push_back(x);
    }
    if (any) g.push_back(std::move(grp));
  }
  return g;
}

inline std::vector<std::string> report_metrics() {
  std::vector<std::string> m{std::string(kOverallMetric)};
  for (auto n : kTerrainNames) m.emplace_back(n);
  return m;
}

struct MetricTest {
  std::string metric;
  stats::GroupedSamples groups;
  std::optional<stats::TestReport> report;  // empty when a group has no observations
};

inline std::vector<MetricTest> run_tests(const std::vector<AccuracyRecord>& runs, double alpha = 0.05) {
  std::vector<MetricTest> out;
  for (const auto& metric : report_metrics()) {
    MetricTest t{metric, group_by_variant(runs, metric), std::nullopt};
    bool testable = t.groups.size() >= 2;
    for (const auto& g : t.groups) testable = testable && !g.values.empty();
    if (testable) t.report = stats::compare_groups(t.groups, alpha);
    out.push_back(std::move(t));
  }
  return out;
}

inline std::string stats_report_csv(const std::vector<MetricTest>& tests) {
  std::string out = "metric,test,pair,statistic,raw_p,adjusted_p,significant\n";
  auto num = [&](double v) {
    append_number(out, v);
  };
  for (const auto& t : tests) {
    if (!t.report) continue;
    const auto& kw = t.report->omnibus;
    out += t.metric + ",kruskal_wallis,all,";
    num(kw.h);
    out += ',';
    num(kw.p);
    out += ',';
    num(kw.p);
    out += kw.p < 0.05 ? ",1\n" : ",0\n";
    for (const auto& pr : t.report->pairwise) {
      out += t.metric + ",dunn," + t.groups[pr.first].name + " vs " + t.groups[pr.second].name + ",";
      num(pr.z);
      out += ',';
      num(pr.p_raw);
      out += ',';
      num(pr.p_adjusted);
      out += pr.significant ? ",1\n" : ",0\n";
    }
  }
  return out;
}

namespace detail {

/// Adjusted p of the (control, variant) pair, if both were tested.
inline std::optional<double> p_vs_control(const MetricTest& t, std::string_view variant) {
  if (!t.report) return std::nullopt;
  for (const auto& pr : t.report->pairwise) {
    const auto& a = t.groups[pr.first].name;
    const auto& b = t.groups[pr.second].name;
    if ((a == variant_name(NetVariant::Control) && b == variant) ||
        (b == variant_name(NetVariant::Control) && a == variant))
      return pr.p_adjusted;
  }
  return std::nullopt;
}

inline const MetricTest& find_metric(const std::vector<MetricTest>& tests, std::string_view metric) {
  for (const auto& t : tests)
    if (t.metric == metric) return t;
  throw ValidationError("no test for metric '" + std::string(metric) + "'");
}

} // namespace detail

/// One row per (variant, terrain).
inline std::string summary_csv(const std::vector<MetricTest>& tests) {
  std::string out = "variant,terrain,n,mean,sd,p_vs_control,stars\n";
  const auto& overall = detail::find_metric(tests, kOverallMetric);
  for (const auto& grp : overall.groups)
    for (auto name : kTerrainNames) {
      const auto& t = detail::find_metric(tests, name);
      const stats::Group* g = nullptr;
      for (const auto& x : t.groups)
        if (x.name == grp.name) g = &x;
      const auto& vals = g ? g->values : std::vector<double>{};
      out += grp.name + "," + std::string(name) + "," + std::to_string(vals.size()) + ",";
      append_number(out, vals.empty() ? std::nan("") : stats::mean(vals));
      out += ',';
      append_number(out, vals.empty() ? std::nan("") : stats::stddev(vals));
      out += ',';
      const auto p = grp.name == variant_name(NetVariant::Control) ? std::nullopt : detail::p_vs_control(t, grp.name);
      if (p) append_number(out, *p);
      out += "," + (p ? stats::stars(*p) : std::string()) + "\n";
    }
  return out;
}

/// Table of mean accuracies in percent, starred against the control net.
inline std::string summary_text(const std::vector<MetricTest>& tests) {
  std::string out = "Mean accuracy (%) per terrain and end-of-training overall; stars mark the\n"
                    "Holm-Sidak adjusted Dunn test against control.\n\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-12s", "variant");
  out += buf;
  for (auto name : kTerrainNames) {
    std::snprintf(buf, sizeof buf, " %14.*s", static_cast<int>(name.size()), name.data());
    out += buf;
  }
  std::snprintf(buf, sizeof buf, " %14s\n", "Overall");
  out += buf;

  const auto& overall = detail::find_metric(tests, kOverallMetric);
  for (const auto& grp : overall.groups) {
    std::snprintf(buf, sizeof buf, "%-12s", grp.name.c_str());
    out += buf;
    auto cell = [&](const MetricTest& t) {
      const stats::Group* g = nullptr;
      for (const auto& x : t.groups)
        if (x.name == grp.name) g = &x;
      std::string s = "n/a";
      if (g && !g->values.empty()) {
        s = detail::fixed(100.0 * stats::mean(g->values), 1) + "+-" + detail::fixed(100.0 * stats::stddev(g->values), 1);
        if (const auto p = detail::p_vs_control(t, grp.name)) s += stats::stars(*p);
      }
      std::snprintf(buf, sizeof buf, " %14s", s.c_str());
      out += buf;
    };
    for (auto name : kTerrainNames) cell(detail::find_metric(tests, name));
    cell(overall);
    out += "\n";
  }

  out += "\n";
  if (overall.report) {
    const auto& kw = overall.report->omnibus;
    out += "Kruskal-Wallis on end-of-training accuracy: H = " + detail::fixed(kw.h, 4) + ", df = " +
           std::to_string(kw.dof) + ", p = " + format_number(kw.p) + " " + stats::stars(kw.p) + "\n";
    for (const auto& pr : overall.report->pairwise)
      out += "  Dunn " + overall.groups[pr.first].name + " vs " + overall.groups[pr.second].name +
             ": z = " + detail::fixed(pr.z, 4) + ", adjusted p = " + format_number(pr.p_adjusted) + " " +
             stats::stars(pr.p_adjusted) + "\n";
  }
  out += "\n*: p<0.05, **: p<0.01, ***: p<0.001\n";
  return out;
}

// --------------------------------------------------------------- CSV readers

namespace detail {

inline std::vector<std::string_view> split(std::string_view row, char sep = ',') {
  std::vector<std::string_view> out;
  while (true) {
    const auto p = row.find(sep);
    out.push_back(row.substr(0, p));
    if (p == std::string_view::npos) break;
    row.remove_prefix(p + 1);
  }
  return out;
}

/// Calls fn(fields, line) for each data row after checking the header.
template <class F>
void for_each_row(std::string_view text, std::string_view header, F&& fn) {
  std::size_t line = 0;
  while (!text.empty()) {
    ++line;
    const auto nl = text.find('\n');
    std::string_view row = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (line == 1) {
      if (row != header) throw ParseError("unexpected CSV header", 1);
      continue;
    }
    if (row.empty()) continue;
    fn(split(row), line);
  }
  if (line == 0) throw ParseError("empty file", 1);
}

inline double field_double(std::string_view s, std::size_t line) {
  if (s == "nan") return std::nan("");
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("not a number: '" + std::string(s) + "'", line);
  return v;
}

inline std::uint64_t field_uint(std::string_view s, std::size_t line) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw ParseError("not an integer: '" + std::string(s) + "'", line);
  return v;
}

inline NetVariant field_variant(std::string_view s, std::size_t line) {
  try {
    return variant_from_name(s);
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line);
  }
}

} // namespace detail

/// Joins accuracy.csv and per_terrain.csv rows on (variant, seed, session).
inline std::vector<AccuracyRecord> read_records(std::string_view accuracy_text, std::string_view per_terrain_text) {
  std::vector<AccuracyRecord> out;
  std::map<std::tuple<int, std::uint64_t, std::size_t>, std::size_t> index;
  detail::for_each_row(accuracy_text,
                       "variant,seed,session,final_accuracy,overall_accuracy,post_burn_in_accuracy",
                       [&](const auto& f, std::size_t line) {
                         if (f.size() != 6) throw ParseError("accuracy.csv: expected 6 columns", line);
                         AccuracyRecord r;
                         r.variant = detail::field_variant(f[0], line);
                         r.seed = detail::field_uint(f[1], line);
                         r.session = detail::field_uint(f[2], line);
                         r.final_accuracy = detail::field_double(f[3], line);
                         r.overall_accuracy = detail::field_double(f[4], line);
                         r.post_burn_in_accuracy = detail::field_double(f[5], line);
                         r.per_terrain.fill(std::nan(""));
                         const auto key = std::make_tuple(static_cast<int>(r.variant), r.seed, r.session);
                         if (!index.emplace(key, out.size()).second)
                           throw ParseError("accuracy.csv: duplicate run", line);
                         out.push_back(r);
                       });
  const std::string header = "variant,seed,session" + detail::terrain_columns();
  detail::for_each_row(per_terrain_text, header, [&](const auto& f, std::size_t line) {
    if (f.size() != 3 + kTerrainCount) throw ParseError("per_terrain.csv: expected 10 columns", line);
    const auto key = std::make_tuple(static_cast<int>(detail::field_variant(f[0], line)),
                                     detail::field_uint(f[1], line), detail::field_uint(f[2], line));
    auto it = index.find(key);
    if (it == index.end()) throw ParseError("per_terrain.csv: run missing from accuracy.csv", line);
    for (std::size_t t = 0; t < kTerrainCount; ++t) out[it->second].per_terrain[t] = detail::field_double(f[3 + t], line);
  });
  return out;
}

} // namespace gvfnet
