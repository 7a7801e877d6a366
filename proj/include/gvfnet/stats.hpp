#pragma once

// Kruskal-Wallis omnibus test and Dunn's pairwise post-hoc test with the
// Holm-Sidak step-down correction. Ties get average ranks.

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gvfnet/common.hpp"

namespace gvfnet::stats {

struct Group {
  std::string name;
  std::vector<double> values;
};

using GroupedSamples = std::vector<Group>;

struct RankSummary {
  std::size_t total = 0;               // N
  std::vector<double> mean_rank;       // per group
  std::vector<std::size_t> group_size; // per group
  double tie_sum = 0.0;                // sum over tie blocks of t^3 - t
};

inline void check_groups(const GroupedSamples& g) {
  if (g.size() < 2) throw ValidationError("stats: at least two groups are required");
  for (const auto& grp : g) {
    if (grp.values.empty()) throw ValidationError("stats: group '" + grp.name + "' is empty");
    for (double v : grp.values)
      if (!std::isfinite(v)) throw ValidationError("stats: non-finite observation in group '" + grp.name + "'");
  }
}

/// Joint ranking of all observations, 1-based, ties averaged.
inline RankSummary rank_groups(const GroupedSamples& g) {
  check_groups(g);
  struct Obs { double v; std::size_t group; };
  std::vector<Obs> all;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (double v : g[i].values) all.push_back({v, i});
  std::stable_sort(all.begin(), all.end(), [](const Obs& a, const Obs& b) { return a.v < b.v; });

  RankSummary r;
  r.total = all.size();
  r.mean_rank.assign(g.size(), 0.0);
  r.group_size.assign(g.size(), 0);
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double t = static_cast<double>(j - i);
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      r.mean_rank[all[k].group] += avg;
      ++r.group_size[all[k].group];
    }
    r.tie_sum += t * t * t - t;
    i = j;
  }
  for (std::size_t i = 0; i < g.size(); ++i) r.mean_rank[i] /= static_cast<double>(r.group_size[i]);
  return r;
}

/// Upper tail of the chi-square distribution.
inline double chi_square_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

/// Two-sided p-value of a standard normal statistic.
inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

struct KruskalWallis {
  double h = 0.0;
  double p = 1.0;
  std::size_t dof = 0;
  bool small_sample = false;  // N < 5: the chi-square approximation is unreliable
};

inline KruskalWallis kruskal_wallis(const GroupedSamples& g) {
  const auto r = rank_groups(g);
  const double n = static_cast<double>(r.total);
  double h = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = r.mean_rank[i] - (n + 1.0) / 2.0;
    h += static_cast<double>(r.group_size[i]) * d * d;
  }
  h *= 12.0 / (n * (n + 1.0));
  const double correction = 1.0 - r.tie_sum / (n * n * n - n);
  KruskalWallis out;
  out.dof = g.size() - 1;
  out.small_sample = r.total < 5;
  // All observations tied: no rank information at all.
  out.h = correction > 0.0 ? h / correction : 0.0;
  out.p = chi_square_sf(out.h, static_cast<double>(out.dof));
  return out;
}

struct PairwiseResult {
  std::size_t first = 0, second = 0;  // group indices
  double z = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  bool significant = false;
};

/// Holm-Sidak step-down adjustment, returned in the input order.
inline std::vector<double> holm_sidak(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double pk = p[order[k]];
    const double a = 1.0 - std::pow(1.0 - pk, static_cast<double>(m - k));
    running = std::min(1.0, std::max(running, a));
    adj[order[k]] = std::max(running, pk);
  }
  return adj;
}

/// All pairs (i < j) in lexicographic order.
inline std::vector<PairwiseResult> dunn_holm_sidak(const GroupedSamples& g, double alpha = 0.05) {
  const auto r = rank_groups(g);
  const double n = static_cast<double>(r.total);
  const double base = n * (n + 1.0) / 12.0 - r.tie_sum / (12.0 * (n - 1.0));
  std::vector<PairwiseResult> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      PairwiseResult pr;
      pr.first = i;
      pr.second = j;
      const double se = std::sqrt(base * (1.0 / static_cast<double>(r.group_size[i]) +
                                          1.0 / static_cast<double>(r.group_size[j])));
      const double diff = r.mean_rank[i] - r.mean_rank[j];
      pr.z = se > 0.0 ? diff / se : 0.0;
      pr.p_raw = normal_two_sided_p(pr.z);
      out.push_back(pr);
    }
  std::vector<double> raw;
  for (const auto& pr : out) raw.push_back(pr.p_raw);
  const auto adj = holm_sidak(raw);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].p_adjusted = adj[k];
    out[k].significant = adj[k] < alpha;
  }
  return out;
}

struct TestReport {
  KruskalWallis omnibus;
  std::vector<PairwiseResult> pairwise;
};

inline TestReport compare_groups(const GroupedSamples& g, double alpha = 0.05) {
  return {kruskal_wallis(g), dunn_holm_sidak(g, alpha)};
}

/// "*", "**", "***" at 0.05 / 0.01 / 0.001; empty otherwise.
inline std::string stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

inline double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

} // namespace gvfnet::stats
