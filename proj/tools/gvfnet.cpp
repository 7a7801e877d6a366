// Command-line driver: synthetic data generation, preprocessing, single
// runs, variant comparisons and statistics.
//
// Exit codes: 0 success, 1 usage error, 2 invalid configuration or
// unwritable/missing path, 3 corrupt input file.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gvfnet/config.hpp"
#include "gvfnet/pipeline.hpp"
#include "gvfnet/reports.hpp"
#include "gvfnet/session_io.hpp"

namespace fs = std::filesystem;
using namespace gvfnet;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kInvalid = 2, kCorrupt = 3 };

/// An input file that failed to parse; maps to exit code 3.
struct CorruptInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_seed = true) {
  cmd->add_option("--config", c.config_path, "Experiment config file (key = value, [section] headers)")
      ->check(CLI::ExistingFile);
  if (needs_seed) cmd->add_option("--seed", c.seed, "Base seed; overrides experiment.seed");
  cmd->add_flag("-v,--verbose", c.verbose, "Progress messages on stderr");
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config_path.empty()) {
    try {
      cfg = parse_config(read_file(c.config_path));
    } catch (const ParseError& e) {
      throw ValidationError("config " + c.config_path + ": " + e.what());
    }
  }
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
  return fs::path(dir);
}

ProcessedSession load_session(const std::string& path) {
  if (!fs::exists(path)) throw IoError("session file not found: " + path);
  try {
    return read_processed_session(path).session;
  } catch (const ParseError& e) {
    throw CorruptInput(path + ": " + e.what());
  }
}

template <class T>
std::string serialize(const T& obj) {
  std::ostringstream os(std::ios::binary);
  obj.save(os);
  return std::move(os).str();
}

void log(const Common& c, const std::string& msg) {
  if (c.verbose) std::cerr << msg << '\n';
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg, const std::string& extra) {
  write_file_atomic(dir / "config_used.txt", "# effective configuration\n" + extra + dump_config(cfg));
}

// ------------------------------------------------------------------- gen

struct GenArgs {
  Common common;
  std::optional<std::size_t> steps;
  bool prep = false;
};

int cmd_gen(const GenArgs& a) {
  auto cfg = load_config(a.common);
  cfg.synth.seed = a.common.seed.value_or(cfg.synth.seed);
  if (a.steps) cfg.synth.total_target_steps = *a.steps;
  cfg.synth.validate();
  const auto dir = prepare_out_dir(a.common.out);

  const auto schedule = terrain_schedule(cfg.synth);
  const auto raw = generate_session(cfg.synth);
  const auto seed = std::to_string(cfg.synth.seed);
  fs::path file;
  std::size_t frames = 0;
  if (a.prep) {
    const auto s = preprocess(raw, cfg.prep);
    file = dir / ("session_" + seed + ".csv");
    write_processed_session(s, file, cfg.synth.seed);
    frames = s.size();
  } else {
    file = dir / ("raw_" + seed + ".csv");
    write_raw_session(raw, file);
    frames = cfg.synth.total_target_steps;
  }

  std::array<std::size_t, kTerrainCount> segments{};
  for (const auto& s : schedule) ++segments[index_of(s.label)];
  std::printf("%s: %zu steps, %.1f gait cycles, %zu segments;", file.filename().c_str(), frames,
              cfg.synth.gait_cycles(), schedule.size());
  for (std::size_t t = 0; t < kTerrainCount; ++t) std::printf(" %s=%zu", kTerrainNames[t].data(), segments[t]);
  std::printf("\n");
  return kOk;
}

// ------------------------------------------------------------------- prep

struct PrepArgs {
  Common common;
  std::string in;
};

int cmd_prep(const PrepArgs& a) {
  const auto cfg = load_config(a.common);
  if (!fs::exists(a.in)) throw IoError("raw session not found: " + a.in);
  RawSession raw;
  try {
    raw = read_raw_session(a.in);
  } catch (const ParseError& e) {
    throw CorruptInput(a.in + ": " + e.what());
  }
  const auto dir = prepare_out_dir(a.common.out);
  const auto s = preprocess(raw, cfg.prep);
  const auto file = dir / ("session_" + std::to_string(raw.config.seed) + ".csv");
  write_processed_session(s, file, raw.config.seed);
  std::size_t flat = 0;
  for (bool c : s.constant) flat += c;
  std::printf("%s: %zu frames at %.3f Hz, %zu channels (%zu constant)\n", file.filename().c_str(), s.size(),
              s.rate_hz, s.n_channels, flat);
  return kOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string session;
  std::string variant;
  std::string init;
  bool eval_only = false;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = load_config(a.common);
  if (a.eval_only) cfg.run.train_net = false;
  cfg.validate();
  const auto variant = variant_from_name(a.variant);
  const auto session = load_session(a.session);
  std::optional<PolicyNet> initial;
  if (!a.init.empty()) {
    std::istringstream is(read_file(a.init), std::ios::binary);
    try {
      initial = PolicyNet::load(is);
    } catch (const ValidationError& e) {
      throw CorruptInput(a.init + ": " + e.what());
    }
  }
  const auto dir = prepare_out_dir(a.common.out);

  log(a.common, "encoding session and learning GVFs");
  const auto gvf = run_gvf(session, cfg.run);
  const auto error = gvf_return_error(session, gvf.trace, cfg.run.return_window);
  log(a.common, "running " + a.variant);
  auto run = run_variant(session, gvf.trace, variant, cfg.seed, cfg.run, initial ? &*initial : nullptr);
  const auto records = std::vector<AccuracyRecord>{to_record(run.metrics)};

  write_file_atomic(dir / "convergence.csv", convergence_csv({run.metrics}, cfg.run.eval_window));
  write_file_atomic(dir / ("confusion_" + a.variant + ".csv"), confusion_csv(run.metrics.confusion));
  write_file_atomic(dir / "per_terrain.csv", per_terrain_csv(records));
  write_file_atomic(dir / "accuracy.csv", accuracy_csv(records));
  write_file_atomic(dir / "gvf_error.csv", gvf_error_csv({error}, session.channel_kinds));
  write_file_atomic(dir / ("policy_" + a.variant + ".ckpt"), serialize(run.net));
  write_file_atomic(dir / "gvf_bank.ckpt", serialize(gvf.bank));
  {
    std::ostringstream os(std::ios::binary);
    save_prototypes(gvf.prototypes, os);
    write_file_atomic(dir / "prototypes.bin", std::move(os).str());
  }
  write_manifest(dir, cfg, "# train " + a.variant + " on " + fs::path(a.session).filename().string() + "\n");

  const auto& m = run.metrics;
  std::printf("%s seed %llu: final %.4f, overall %.4f, %zu frames\n", a.variant.c_str(),
              static_cast<unsigned long long>(cfg.seed), m.final_accuracy, m.overall_accuracy, session.size());
  return kOk;
}

// ------------------------------------------------------------------- compare

struct CompareArgs {
  Common common;
  std::vector<std::string> sessions;
  std::optional<std::size_t> seeds;
  std::size_t jobs = 1;
};

void write_stats(const fs::path& dir, const std::vector<AccuracyRecord>& records) {
  const auto tests = run_tests(records);
  write_file_atomic(dir / "stats_report.csv", stats_report_csv(tests));
  write_file_atomic(dir / "summary.csv", summary_csv(tests));
  const auto text = summary_text(tests);
  write_file_atomic(dir / "summary.txt", text);
  std::fputs(text.c_str(), stdout);
}

int cmd_compare(const CompareArgs& a) {
  auto cfg = load_config(a.common);
  if (a.seeds) cfg.seeds = *a.seeds;
  cfg.validate();
  if (cfg.seeds < 3) throw ValidationError("compare needs at least 3 seeds");
  const auto dir = prepare_out_dir(a.common.out);

  std::vector<ProcessedSession> loaded;
  for (const auto& p : a.sessions) loaded.push_back(load_session(p));
  const bool synthetic = loaded.empty();
  const std::size_t n_sessions = synthetic ? cfg.seeds : loaded.size();
  const std::uint64_t base = cfg.seed;

  // Synthetic mode: run r uses session seed base + r and net seed base + r.
  // File mode: each session is run with net seeds base .. base + seeds - 1.
  SessionSource source = [&](std::size_t i) {
    if (!synthetic) return loaded[i];
    SessionConfig sc = cfg.synth;
    sc.seed = base + i;
    return preprocess(generate_session(sc), cfg.prep);
  };
  auto seeds_for = [&](std::size_t i) {
    std::vector<std::uint64_t> s;
    if (synthetic) {
      s.push_back(base + i);
    } else {
      for (std::size_t k = 0; k < cfg.seeds; ++k) s.push_back(base + k);
    }
    return s;
  };
  log(a.common, "comparing over " + std::to_string(n_sessions) + " session(s)");
  const auto cmp = compare_variants(n_sessions, source, seeds_for, cfg.run,
                                    std::vector<NetVariant>(kAllVariants.begin(), kAllVariants.end()), a.jobs);

  const auto records = to_records(cmp.runs);
  write_file_atomic(dir / "convergence.csv", convergence_csv(cmp.runs, cfg.run.eval_window));
  for (auto v : kAllVariants) {
    ConfusionMatrix total;
    for (const auto& m : cmp.runs)
      if (m.variant == v) total += m.confusion;
    write_file_atomic(dir / ("confusion_" + std::string(variant_name(v)) + ".csv"), confusion_csv(total));
  }
  write_file_atomic(dir / "per_terrain.csv", per_terrain_csv(records));
  write_file_atomic(dir / "accuracy.csv", accuracy_csv(records));
  write_file_atomic(dir / "gvf_error.csv",
                    gvf_error_csv(cmp.gvf_error, synthetic ? default_channel_kinds(cfg.synth.n_channels)
                                                           : loaded.front().channel_kinds));
  std::string extra = "# compare, " + std::string(synthetic ? "synthetic sessions" : "session files:");
  for (const auto& p : a.sessions) extra += " " + fs::path(p).filename().string();
  write_manifest(dir, cfg, extra + "\n");
  write_stats(dir, records);
  return kOk;
}

// ------------------------------------------------------------------- stats

struct StatsArgs {
  Common common;
  std::string in;
};

int cmd_stats(const StatsArgs& a) {
  const fs::path in(a.in);
  std::vector<AccuracyRecord> records;
  try {
    records = read_records(read_file(in / "accuracy.csv"), read_file(in / "per_terrain.csv"));
  } catch (const ParseError& e) {
    throw CorruptInput(a.in + ": " + e.what());
  }
  write_stats(prepare_out_dir(a.common.out.empty() ? a.in : a.common.out), records);
  return kOk;
}

// ------------------------------------------------------------------- gvf-probe

struct ProbeArgs {
  Common common;
  std::string session;
  std::size_t channel = 0;
};

int cmd_probe(const ProbeArgs& a) {
  auto cfg = load_config(a.common);
  cfg.run.validate();
  const auto session = load_session(a.session);
  if (a.channel >= session.n_channels)
    throw ValidationError("--channel " + std::to_string(a.channel) + " out of range (session has " +
                          std::to_string(session.n_channels) + ")");
  const auto dir = prepare_out_dir(a.common.out);
  const auto gvf = run_gvf(session, cfg.run);
  char name[32];
  std::snprintf(name, sizeof name, "gvf_probe_ch%02zu.csv", a.channel);
  write_file_atomic(dir / name, gvf_probe_csv(session, gvf.trace, a.channel, cfg.run.return_window));

  const std::size_t q = session.size() / 4;
  const auto first = gvf_return_error(session, gvf.trace, cfg.run.return_window, 0, q);
  const auto last = gvf_return_error(session, gvf.trace, cfg.run.return_window, 3 * q, session.size());
  std::printf("%s: return error first quartile %.6g, last quartile %.6g\n", name, first[a.channel],
              last[a.channel]);
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Terrain classification with GVF predictive features"};
  app.require_subcommand(1);
  app.fallthrough(false);
  app.failure_message(CLI::FailureMessage::help);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic gait session");
  add_common(g, gen.common);
  g->add_option("--out", gen.common.out, "Output directory")->required();
  g->add_option("--steps", gen.steps, "Frames at the target rate (14000..18000)");
  g->add_flag("--prep", gen.prep, "Write the preprocessed session instead of the raw one");

  PrepArgs prep;
  auto* p = app.add_subcommand("prep", "Filter, decimate and normalize a raw session");
  add_common(p, prep.common, false);
  p->add_option("--in", prep.in, "Raw session CSV")->required();
  p->add_option("--out", prep.common.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Run one policy-net variant online over a session");
  add_common(t, train.common);
  t->add_option("--session", train.session, "Preprocessed session CSV")->required();
  t->add_option("--variant", train.variant, "Net variant")
      ->required()
      ->check(CLI::IsMember({"control", "input-gvf", "latent-gvf"}));
  t->add_option("--out", train.common.out, "Output directory")->required();
  t->add_option("--init", train.init, "Policy checkpoint to continue from")->check(CLI::ExistingFile);
  t->add_flag("--eval-only", train.eval_only, "Score the net without training it");

  CompareArgs compare;
  auto* c = app.add_subcommand("compare", "Run all variants over seeds and sessions, then test");
  add_common(c, compare.common);
  c->add_option("--session", compare.sessions, "Preprocessed session CSV (repeatable); synthetic if omitted");
  c->add_option("--seeds", compare.seeds, "Seeded runs (sessions when synthetic, net seeds per file otherwise)");
  c->add_option("--jobs", compare.jobs, "Worker threads")->check(CLI::PositiveNumber);
  c->add_option("--out", compare.common.out, "Output directory")->required();

  StatsArgs st;
  auto* s = app.add_subcommand("stats", "Kruskal-Wallis and Dunn tests on saved accuracy CSVs");
  s->add_option("--in", st.in, "Directory holding accuracy.csv and per_terrain.csv")->required();
  s->add_option("--out", st.common.out, "Output directory (default: --in)");

  ProbeArgs probe;
  auto* pr = app.add_subcommand("gvf-probe", "Dump one GVF's prediction trace next to its brute-force return");
  add_common(pr, probe.common, false);
  pr->add_option("--session", probe.session, "Preprocessed session CSV")->required();
  pr->add_option("--channel", probe.channel, "Channel index");
  pr->add_option("--out", probe.common.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*p) return cmd_prep(prep);
    if (*t) return cmd_train(train);
    if (*c) return cmd_compare(compare);
    if (*s) return cmd_stats(st);
    if (*pr) return cmd_probe(probe);
  } catch (const CorruptInput& e) {
    std::fprintf(stderr, "error: corrupt input: %s\n", e.what());
    return kCorrupt;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  }
  return kUsage;
}
