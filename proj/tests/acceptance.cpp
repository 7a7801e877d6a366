// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails. argv[1] is a scratch directory for CLI runs.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "gvfnet/gvf_totd.hpp"
#include "gvfnet/kanerva.hpp"
#include "gvfnet/pipeline.hpp"
#include "gvfnet/policy_net.hpp"
#include "gvfnet/replay_buffer.hpp"
#include "gvfnet/reports.hpp"
#include "gvfnet/signal_prep.hpp"
#include "gvfnet/stats.hpp"
#include "oracles/finite_diff.hpp"
#include "oracles/lambda_return.hpp"
#include "oracles/skc_full_sort.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace gvfnet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %2d  %-28s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ------------------------------------------------------------------------

void totd_equivalence() {
  const auto t0 = Clock::now();
  const std::size_t d = 20, T = 1000;
  const double gamma = 0.94, alpha = 0.01;
  const double lambdas[] = {0.0, 0.5, 0.9};
  double worst = 0.0;
  for (int problem = 0; problem < 50; ++problem) {
    const double lambda = lambdas[problem % 3];
    std::mt19937_64 rng(1000 + problem);
    std::bernoulli_distribution bit(0.3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> phi;
    std::vector<FeatureVector> x;
    std::vector<double> z;
    for (std::size_t t = 0; t <= T; ++t) {
      std::vector<double> row(d, 0.0);
      FeatureVector fv{d, {}};
      for (std::size_t i = 0; i < d; ++i)
        if (bit(rng)) {
          row[i] = 1.0;
          fv.active.push_back(static_cast<std::uint32_t>(i));
        }
      phi.push_back(row);
      x.push_back(fv);
      if (t < T) z.push_back(u(rng));
    }
    const auto theta = oracle::online_lambda_return(phi, z, gamma, lambda, alpha);
    GvfBank bank(1, d, {gamma, lambda, alpha});
    GvfLearner learner({0, {gamma, lambda, alpha}}, d);
    for (std::size_t t = 0; t < T; ++t) {
      bank.step(x[t], x[t + 1], std::span<const double>(&z[t], 1));
      learner.step(x[t], x[t + 1], z[t]);
    }
    for (std::size_t i = 0; i < d; ++i) {
      worst = std::max(worst, std::abs(bank.weight(i, 0) - theta.back()[i]));
      worst = std::max(worst, std::abs(learner.weights()[i] - theta.back()[i]));
    }
  }
  const double secs = seconds_since(t0);
  report(1, "TOTD forward-view equivalence", worst <= 1e-8 && secs < 10.0,
         fmt("max |w - oracle| = %.3g over 50 problems (tol 1e-8), %.2f s (limit 10 s)", worst, secs));
}

void skc_equivalence() {
  const auto t0 = Clock::now();
  const ResolutionLevels levels{{50, 10, 5}};
  const auto protos = PrototypeSet::generate(200, 30, 17, levels);
  const std::vector<double> coords(protos.coordinates().begin(), protos.coordinates().end());
  SkcEncoder enc(protos, levels);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0, wrong_count = 0, not_nested = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> s(30);
    for (double& v : s) v = u(rng);
    const auto fv = enc.encode(s);
    mismatches += fv.active != oracle::skc_encode(coords, 200, 30, s, {50, 10, 5});
    wrong_count += fv.count() != 65;
    std::array<std::set<std::uint32_t>, 3> blocks;
    for (auto a : fv.active) blocks[a / 200].insert(a % 200);
    for (int m = 1; m < 3; ++m)
      for (auto i : blocks[m]) not_nested += !blocks[m - 1].count(i);
  }
  const double secs = seconds_since(t0);
  report(2, "SKC oracle equivalence", mismatches == 0 && wrong_count == 0 && not_nested == 0 && secs < 1.0,
         fmt("100 states: %d mismatches, %d with != 65 bits, %d nesting violations, %.3f s (limit 1 s)", mismatches,
             wrong_count, not_nested, secs));
}

void horizon_arithmetic() {
  const double h = horizon(0.94);
  report(3, "Horizon arithmetic", std::abs(h - 16.67) <= 0.01, fmt("horizon(0.94) = %.4f (target 16.67 +- 0.01)", h));
}

void gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t point = 0; point < 20; ++point) {
    NetConfig c;
    c.variant = NetVariant::Control;
    c.n_actual = 10;
    c.n_classes = 7;
    c.encoder_sizes = {5};
    c.head_sizes = {};
    c.init_seed = 500 + point;
    PolicyNet net(c);
    std::mt19937_64 rng(500 + point);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Sample s;
    s.actuals.resize(10);
    for (double& v : s.actuals) v = u(rng);
    s.label = point % 7;
    const Batch batch{&s};
    std::vector<double> grad;
    net.gradient(batch, grad);
    const auto numeric = oracle::central_difference(
        [&](const std::vector<double>& p) {
          PolicyNet copy = net;
          copy.set_parameters(p);
          return copy.loss(batch);
        },
        net.parameters(), 1e-5);
    worst = std::max(worst, oracle::max_relative_error(grad, numeric));
  }
  const double secs = seconds_since(t0);
  report(4, "Gradient correctness", worst < 1e-4 && secs < 5.0,
         fmt("10->5->7 net, 20 points: max relative error %.3g (limit 1e-4), %.3f s (limit 5 s)", worst, secs));
}

void replay_semantics() {
  ReplayBuffer buf(1000);
  for (std::size_t i = 0; i < 1500; ++i) buf.push({{static_cast<double>(i)}, {}, i % 7});
  std::vector<Sample> recent;
  for (std::size_t i = 0; i < 16; ++i) recent.push_back({{-1.0 - static_cast<double>(i)}, {}, 0});
  std::vector<const Sample*> ptrs;
  for (const auto& s : recent) ptrs.push_back(&s);
  std::mt19937_64 rng(1);
  const auto batch = assemble_batch(std::span<const Sample* const>(ptrs), buf, rng);
  std::size_t from_recent = 0, from_buffer = 0;
  for (auto* s : batch) (s->actuals[0] < 0.0 ? from_recent : from_buffer)++;
  const bool pass = buf.size() == 1000 && batch.size() == 32 && from_recent == 16 && from_buffer == 16;
  report(5, "Replay semantics", pass,
         fmt("size after 1500 pushes = %zu; batch %zu = %zu recent + %zu replay", buf.size(), batch.size(), from_recent,
             from_buffer));
}

void filter_spec() {
  const auto lp = design_butterworth(FilterSpec::lowpass(2, 5.0, 1000.0));
  const double db = 20.0 * std::log10(magnitude(lp, 5.0, 1000.0));
  const double half_power_db = 20.0 * std::log10(std::sqrt(0.5));
  const auto bp = design_butterworth(FilterSpec::bandpass(4, 10.0, 450.0, 1000.0));
  const double dc = magnitude(bp, 0.0, 1000.0);
  report(6, "Filter spec", std::abs(db - half_power_db) <= 0.01 && dc < 1e-9,
         fmt("lowpass |H(5 Hz)| = %.5f dB (half-power %.5f dB, tol 0.01); bandpass DC gain %.3g (limit 1e-9)", db,
             half_power_db, dc));
}

void gvf_anticipation() {
  const auto t0 = Clock::now();
  const std::size_t frames = 6000, n_ch = 30;
  const auto session = testing_support::toy_session(frames, n_ch, {TerrainLabel::EvenGround}, frames, 0.0, 1, 33.0);
  RunConfig cfg;  // defaults: K = 5000, levels (500, 100, 25), gamma 0.94, lambda 0.5
  const auto gvf = run_gvf(session, cfg);

  const int max_lag = 16;  // within half a period
  std::size_t leading = 0, halved = 0;
  int worst_lag = -max_lag;
  double worst_ratio = 0.0, worst_first = 0.0, worst_last = 0.0;
  const std::size_t from = frames / 2;
  for (std::size_t c = 0; c < n_ch; ++c) {
    int best_lag = 0;
    double best = -2.0;
    for (int lag = -max_lag; lag <= max_lag; ++lag) {
      // corr(p[t + lag], z[t]) over the second half of the stream
      double sp = 0, sz = 0, spp = 0, szz = 0, spz = 0;
      std::size_t n = 0;
      for (std::size_t t = from; t + max_lag < frames; ++t) {
        const double p = gvf.trace.normalized[(t + lag) * n_ch + c];
        const double z = session.at(t, c);
        sp += p; sz += z; spp += p * p; szz += z * z; spz += p * z;
        ++n;
      }
      const double nn = static_cast<double>(n);
      const double cov = spz / nn - sp * sz / (nn * nn);
      const double var = (spp / nn - sp * sp / (nn * nn)) * (szz / nn - sz * sz / (nn * nn));
      const double r = var > 0.0 ? cov / std::sqrt(var) : 0.0;
      if (r > best) {
        best = r;
        best_lag = lag;
      }
    }
    leading += best_lag < 0;
    worst_lag = std::max(worst_lag, best_lag);

    const std::size_t q = frames / 4;
    const double first = gvf_return_error(session, gvf.trace, cfg.return_window, 0, q)[c];
    const double last = gvf_return_error(session, gvf.trace, cfg.return_window, 3 * q, frames)[c];
    const double ratio = last / first;
    halved += ratio <= 0.5;
    if (ratio >= worst_ratio) {
      worst_ratio = ratio;
      worst_first = first;
      worst_last = last;
    }
  }
  const double secs = seconds_since(t0);
  report(8, "GVF anticipation", leading == n_ch && halved == n_ch && secs < 30.0,
         fmt("%zu/%zu channels peak at negative lag (latest peak %d); %zu/%zu return errors fell >= 50%% "
             "(worst channel %.3g -> %.3g, ratio %.3g); %.1f s (limit 30 s)",
             leading, n_ch, worst_lag, halved, n_ch, worst_first, worst_last, worst_ratio, secs));
}

void stats_correctness() {
  const auto kw = stats::kruskal_wallis({{"a", {1, 2, 3}}, {"b", {4, 5, 6}}});
  const auto adj = stats::holm_sidak({0.01, 0.04, 0.30});
  const double want[3] = {1.0 - std::pow(0.99, 3), std::max(1.0 - std::pow(0.99, 3), 1.0 - 0.96 * 0.96), 0.30};
  double err = 0.0;
  for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(adj[i] - want[i]));
  report(9, "Stats correctness", std::abs(kw.h - 3.857) <= 0.001 && err <= 1e-6,
         fmt("H = %.5f (3.857 +- 0.001); Holm-Sidak (%.6f, %.6f, %.6f), max error %.2g (tol 1e-6)", kw.h, adj[0], adj[1],
             adj[2], err));
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GVFNET_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool directional_reproduction(const fs::path& work) {
  const auto a = work / "compare_a";
  fs::remove_all(a);
  fs::create_directories(work);

  const auto t0 = Clock::now();
  const int code_a = run_cli("compare --seeds 10 --out " + a.string(), work / "compare_a.log");
  const double secs = seconds_since(t0);
  if (code_a != 0) {
    report(7, "Directional reproduction", false, fmt("compare exited with %d; see %s", code_a,
                                                     (work / "compare_a.log").c_str()));
    return false;
  }

  const auto records = read_records(slurp(a / "accuracy.csv"), slurp(a / "per_terrain.csv"));
  const auto groups = group_by_variant(records, kOverallMetric);
  double means[3] = {0, 0, 0};
  std::size_t n = 0;
  for (std::size_t i = 0; i < groups.size() && i < 3; ++i) means[i] = stats::mean(groups[i].values);
  if (!groups.empty()) n = groups[0].values.size();
  const auto kw = stats::kruskal_wallis(groups);
  const bool ordered = groups.size() == 3 && means[1] > means[0] && means[2] > means[0];
  report(7, "Directional reproduction", ordered && kw.p < 0.05 && n == 10 && secs < 900.0,
         fmt("mean final accuracy control %.4f, input-gvf %.4f, latent-gvf %.4f over %zu sessions; "
             "Kruskal-Wallis H = %.3f, p = %.4g (limit 0.05); %.0f s (limit 900 s)",
             means[0], means[1], means[2], n, kw.h, kw.p, secs));
  return true;
}

void determinism(const fs::path& work, bool first_run_ok) {
  if (!first_run_ok) {
    report(10, "Determinism", false, "first compare run failed");
    return;
  }
  const auto a = work / "compare_a", b = work / "compare_b";
  fs::remove_all(b);
  const int code_b = run_cli("compare --seeds 10 --jobs 2 --out " + b.string(), work / "compare_b.log");
  std::size_t compared = 0, differing = 0;
  std::string diff_names;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    ++compared;
    const auto other = b / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
      ++differing;
      diff_names += " " + entry.path().filename().string();
    }
  }
  report(10, "Determinism", code_b == 0 && compared > 0 && differing == 0,
         fmt("second compare (--jobs 2) exit %d; %zu CSV files compared, %zu differ%s", code_b, compared, differing,
             diff_names.c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "gvfnet_acceptance";
  totd_equivalence();
  skc_equivalence();
  horizon_arithmetic();
  gradient_check();
  replay_semantics();
  filter_spec();
  const bool compared = directional_reproduction(work);
  gvf_anticipation();
  stats_correctness();
  determinism(work, compared);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
