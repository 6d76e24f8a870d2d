#pragma once

// Run directories on disk and the batch commands that fill them.
//
// <workspace>/<run-id>/
//   manifest.json        id, condition, seed, config hash, status, timestamps
//   config.json          effective configuration
//   checkpoint.json      resumable evolution state
//   fitness.csv          best/mean fitness per generation
//   best_genotypes.csv   champion genes per generation
//   best_genotype.json   champion of the last generation
//   traces.bin           the champion's four trials
//   playback.bin         partner recording (interactive runs)
//   report.csv           ghost-test runs only

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fnmatch.h>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dyad/analysis.hpp"
#include "dyad/archive.hpp"
#include "dyad/evolution.hpp"
#include "dyad/experiments.hpp"
#include "dyad/run_config.hpp"

namespace dyad::workspace {

namespace fs = std::filesystem;
using nlohmann::json;
using run::ConfigError;
using run::fmt17;

inline constexpr const char* kWorkspaceEnv = "DYAD_WORKSPACE";
inline constexpr int kManifestVersion = 1;
inline constexpr int kGenotypeVersion = 1;

// Missing inputs or unknown runs; reported as usage errors by the CLI.
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline fs::path resolve_root(const std::optional<fs::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kWorkspaceEnv); env && *env) return env;
  return "workspace";
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Manifest {
  std::string run_id;
  std::string condition;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string status = "running";  // running | complete | failed
  std::string created;
  std::string updated;
  json outputs = json::object();
  json config = json::object();
  json extra = json::object();
};

inline json to_json(const Manifest& m) {
  return json{{"format_version", kManifestVersion}, {"run_id", m.run_id}, {"condition", m.condition},
              {"seed", m.seed}, {"config_hash", m.config_hash}, {"status", m.status},
              {"created", m.created}, {"updated", m.updated}, {"outputs", m.outputs},
              {"config", m.config}, {"extra", m.extra}};
}

inline Manifest read_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) throw NotFound("no manifest in " + dir.string());
  const json j = json::parse(run::read_text(path));
  Manifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.condition = j.at("condition").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.status = j.at("status").get<std::string>();
  m.created = j.value("created", "");
  m.updated = j.value("updated", "");
  m.outputs = j.value("outputs", json::object());
  m.config = j.value("config", json::object());
  m.extra = j.value("extra", json::object());
  return m;
}

inline void write_manifest(const fs::path& dir, Manifest m) {
  m.updated = utc_timestamp();
  if (m.created.empty()) m.created = m.updated;
  run::write_text(dir / "manifest.json", to_json(m).dump(2) + "\n");
}

struct GenotypeFile {
  std::string config_hash;
  std::size_t agents = 1;
  std::size_t generation = 0;
  std::uint64_t seed = 0;
  genome::Genotype genotype;
};

inline void write_genotype(const fs::path& path, const GenotypeFile& g) {
  json j{{"format_version", kGenotypeVersion}, {"kind", "dyad-genotype"},
         {"config_hash", g.config_hash},       {"agents", g.agents},
         {"generation", g.generation},         {"seed", g.seed},
         {"genes", g.genotype.genes}};
  run::write_text(path, j.dump() + "\n");
}

inline GenotypeFile read_genotype(const fs::path& path) {
  if (!fs::exists(path)) throw NotFound("genotype file not found: " + path.string());
  try {
    const json j = json::parse(run::read_text(path));
    if (j.at("kind") != "dyad-genotype" || j.at("format_version") != kGenotypeVersion) {
      throw ConfigError("not a version-1 genotype file: " + path.string());
    }
    GenotypeFile g;
    g.config_hash = j.at("config_hash").get<std::string>();
    g.agents = j.at("agents").get<std::size_t>();
    g.generation = j.at("generation").get<std::size_t>();
    g.seed = j.at("seed").get<std::uint64_t>();
    g.genotype.genes = j.at("genes").get<std::vector<double>>();
    if (g.genotype.size() != g.agents * genome::kGenesPerAgent<experiments::kNeurons>) {
      throw ConfigError("genotype length does not match its agent count: " + path.string());
    }
    return g;
  } catch (const json::exception& e) {
    throw ConfigError("malformed genotype file " + path.string() + ": " + e.what());
  }
}

inline std::string best_genotypes_csv(const std::vector<genome::Genotype>& best, std::string_view hash) {
  std::ostringstream os;
  os << "# dyad champions per generation format_version=1 config_hash=" << hash << "\n";
  os << "generation";
  const std::size_t genes = best.empty() ? 0 : best.front().size();
  for (std::size_t i = 0; i < genes; ++i) os << ",g" << i;
  os << '\n';
  for (std::size_t gen = 0; gen < best.size(); ++gen) {
    os << gen;
    for (double v : best[gen].genes) os << ',' << fmt17(v);
    os << '\n';
  }
  return os.str();
}

inline std::string default_run_id(const run::RunConfig& c, std::string_view hash) {
  return std::string(experiments::to_string(c.condition)) + "-s" + std::to_string(c.seed) + "-" +
         std::string(hash.substr(0, 8));
}

struct EvolveOptions {
  std::optional<std::size_t> stop_after;  // stop once this many generations are done
  bool resume = false;
};

struct EvolveOutcome {
  std::string run_id;
  fs::path dir;
  bool complete = false;
  evolution::EvolutionState state;
};

struct PreparedRun {
  run::RunConfig config;
  std::string hash;
  experiments::EvaluationSetup setup;
};

inline PreparedRun prepare(const run::RunConfig& config) {
  run::validate(config);
  PreparedRun p{config, {}, {}};
  std::string playback_bytes;
  p.setup.condition = config.condition;
  p.setup.trial = run::trial_spec(config);
  p.setup.burn_in = config.burn_in;
  if (config.condition == experiments::Condition::GhostEvolution) {
    if (!fs::exists(config.playback)) throw NotFound("playback archive not found: " + config.playback);
    playback_bytes = run::read_text(config.playback);
    auto file = archive::read_playback(config.playback);
    for (const auto& t : file.playback.trials) {
      if (t.frames.size() != config.duration_steps) {
        throw ConfigError("playback trials hold " + std::to_string(t.frames.size()) +
                          " steps but duration_steps is " + std::to_string(config.duration_steps));
      }
    }
    p.setup.playback = std::make_shared<const experiments::Playback>(std::move(file.playback));
    experiments::check_setup(p.setup);
  }
  p.hash = run::config_hash(config, playback_bytes);
  return p;
}

inline void write_progress(const fs::path& dir, const PreparedRun& p, const evolution::EvolutionState& st) {
  run::Checkpoint cp{p.hash, p.config.seed, experiments::agents_per_genotype(p.config.condition), st};
  run::write_text(dir / "checkpoint.json", run::checkpoint_json(cp));
  run::write_text(dir / "fitness.csv", run::fitness_csv(st.history, p.hash));
}

/// Evolves one run into <root>/<run-id>. With `resume`, continues from the
/// directory's checkpoint using its stored configuration.
inline EvolveOutcome evolve_run(run::RunConfig config, const fs::path& root, const EvolveOptions& opts = {},
                                std::ostream& log = std::clog) {
  fs::path dir;
  Manifest manifest;
  evolution::EvolutionState state;
  bool have_state = false;

  if (opts.resume) {
    if (config.run_id.empty()) throw ConfigError("resume needs a run id");
    dir = root / config.run_id;
    if (!fs::exists(dir / "config.json")) throw NotFound("no run '" + config.run_id + "' under " + root.string());
    const unsigned parallelism = config.parallelism;
    config = run::load_config(dir / "config.json");
    config.parallelism = parallelism;
  }
  const PreparedRun prepared = prepare(config);
  if (config.run_id.empty()) config.run_id = default_run_id(config, prepared.hash);
  if (!opts.resume) dir = root / config.run_id;
  fs::create_directories(dir);

  if (opts.resume && fs::exists(dir / "checkpoint.json")) {
    auto cp = run::parse_checkpoint(run::read_text(dir / "checkpoint.json"));
    if (cp.config_hash != prepared.hash) throw ConfigError("checkpoint belongs to a different configuration");
    state = std::move(cp.state);
    have_state = true;
    manifest = read_manifest(dir);
    log << "resuming " << config.run_id << " at generation " << state.generation << "\n";
  }

  const auto settings = run::evolution_settings(config);
  if (!have_state) state = evolution::initial_state(settings);

  manifest.run_id = config.run_id;
  manifest.condition = std::string(experiments::to_string(config.condition));
  manifest.seed = config.seed;
  manifest.config_hash = prepared.hash;
  manifest.status = "running";
  manifest.config = run::to_json(config);
  manifest.outputs = {{"config", "config.json"}, {"checkpoint", "checkpoint.json"}, {"fitness", "fitness.csv"}};
  run::write_text(dir / "config.json", run::to_json(config).dump(2) + "\n");
  write_manifest(dir, manifest);

  const auto& setup = prepared.setup;
  auto fitness = [&setup](const genome::Genotype& g) { return experiments::evaluate(g, setup).fitness; };
  auto on_generation = [&](const evolution::EvolutionState& st) {
    const auto& last = st.history.back();
    log << config.run_id << " gen " << last.generation << " best " << fmt17(last.best) << " mean "
        << fmt17(last.mean) << "\n";
    const bool stop = opts.stop_after && st.generation >= *opts.stop_after && !st.finished(settings);
    if (stop || st.generation % config.checkpoint_interval == 0 || st.finished(settings)) {
      write_progress(dir, prepared, st);
    }
    return !stop;
  };

  try {
    state = evolution::evolve(settings, fitness, std::move(state), on_generation);
  } catch (...) {
    manifest.status = "failed";
    write_manifest(dir, manifest);
    throw;
  }

  EvolveOutcome out{config.run_id, dir, state.finished(settings), {}};
  if (!out.complete) {
    log << config.run_id << " stopped at generation " << state.generation << "; resume with --resume "
        << config.run_id << "\n";
    out.state = std::move(state);
    return out;
  }

  const auto& champion = state.champion();
  const std::size_t agents = experiments::agents_per_genotype(config.condition);
  write_genotype(dir / "best_genotype.json",
                 {prepared.hash, agents, state.history.back().generation, config.seed, champion});
  run::write_text(dir / "best_genotypes.csv", best_genotypes_csv(state.best_per_generation, prepared.hash));
  const auto traces = experiments::record_trials(champion, setup);
  archive::write_traces(dir / "traces.bin", {config.run_id, prepared.hash, traces});
  manifest.outputs["best_genotype"] = "best_genotype.json";
  manifest.outputs["best_genotypes"] = "best_genotypes.csv";
  manifest.outputs["traces"] = "traces.bin";
  if (config.condition == experiments::Condition::Interactive) {
    const auto playback = experiments::extract_playback(traces, 1, config.run_id,
                                                        static_cast<std::int64_t>(state.history.back().generation));
    archive::write_playback(dir / "playback.bin", {prepared.hash, playback});
    manifest.outputs["playback"] = "playback.bin";
  }
  manifest.status = "complete";
  manifest.extra = {{"final_best_fitness", state.history.back().best},
                    {"generations_completed", state.generation}};
  write_manifest(dir, manifest);
  out.state = std::move(state);
  return out;
}

struct GhostTestInputs {
  std::optional<std::string> run_id;  // or explicit files below
  std::optional<fs::path> genotype;
  std::optional<fs::path> playback;
  std::optional<fs::path> config;  // trial settings when not using a run
  std::uint64_t seed = 1;
  std::string out_id;  // empty = derived
};

struct GhostTestOutcome {
  std::string run_id;
  fs::path dir;
  experiments::GhostTestReport report;
};

inline std::string ghost_report_csv(const experiments::GhostTestReport& r, std::string_view hash) {
  std::ostringstream os;
  os << "# dyad ghost-test report format_version=1 config_hash=" << hash << "\n";
  os << "trial,recorded_angle,test_angle,live_entropy,pooled_live_entropy\n";
  for (const auto& t : r.trials) {
    os << t.trial_index << ',' << fmt17(t.recorded_angle) << ',' << fmt17(t.test_angle) << ','
       << fmt17(t.live_entropy) << ',' << fmt17(r.pooled_entropy) << '\n';
  }
  return os.str();
}

/// Tests the live agent (first gene block) of an evolved pair against the
/// recorded partner, from placements different to the recorded ones.
inline GhostTestOutcome ghost_test_run(const GhostTestInputs& in, const fs::path& root) {
  run::RunConfig config;
  fs::path genotype_path, playback_path;
  std::string source = "external";
  if (in.run_id) {
    const fs::path src = root / *in.run_id;
    if (!fs::exists(src / "config.json")) throw NotFound("no run '" + *in.run_id + "' under " + root.string());
    config = run::load_config(src / "config.json");
    genotype_path = src / "best_genotype.json";
    playback_path = src / "playback.bin";
    source = *in.run_id;
  } else {
    if (!in.genotype || !in.playback) throw ConfigError("ghost-test needs --run or both --genotype and --playback");
    if (in.config) config = run::load_config(*in.config);
    genotype_path = *in.genotype;
    playback_path = *in.playback;
  }
  if (!fs::exists(playback_path)) throw NotFound("playback archive not found: " + playback_path.string());
  const auto genotype = read_genotype(genotype_path);
  const auto playback = archive::read_playback(playback_path);

  const auto agents = genome::decode<experiments::kNeurons>(genotype.genotype);
  auto spec = run::trial_spec(config);
  if (!playback.playback.trials.empty()) spec.duration_steps = playback.playback.trials.front().frames.size();
  genome::Rng rng(in.seed);
  auto report = experiments::ghost_test(agents.at(0), playback.playback, spec, rng, config.burn_in);

  GhostTestOutcome out;
  out.run_id = in.out_id.empty() ? source + "-ghost-s" + std::to_string(in.seed) : in.out_id;
  out.dir = root / out.run_id;
  fs::create_directories(out.dir);
  const std::string hash = genotype.config_hash;
  run::write_text(out.dir / "report.csv", ghost_report_csv(report, hash));
  archive::write_traces(out.dir / "traces.bin", {out.run_id, hash, report.traces});

  Manifest m;
  m.run_id = out.run_id;
  m.condition = std::string(experiments::to_string(experiments::Condition::GhostTest));
  m.seed = in.seed;
  m.config_hash = hash;
  m.status = "complete";
  m.outputs = {{"report", "report.csv"}, {"traces", "traces.bin"}};
  m.config = run::to_json(config);
  m.extra = {{"source_run", source},
             {"genotype", genotype_path.string()},
             {"playback", playback_path.string()},
             {"pooled_live_entropy", report.pooled_entropy}};
  write_manifest(out.dir, m);
  out.report = std::move(report);
  return out;
}

inline std::string metrics_csv(std::span<const analysis::MetricRow> rows) {
  std::ostringstream os;
  os << "# dyad metrics format_version=1\n";
  os << "run_id,config_hash,condition,trial,agent,neural_entropy,heading_sampen,distance_entropy,dtw\n";
  for (const auto& r : rows) {
    os << r.run_id << ',' << r.config_hash << ',' << r.condition << ',' << r.trial << ',' << r.agent << ','
       << fmt17(r.neural_entropy) << ',' << fmt17(r.heading_sampen) << ',' << fmt17(r.distance_entropy) << ','
       << fmt17(r.dtw) << '\n';
  }
  return os.str();
}

inline std::string summary_csv(std::span<const analysis::SummaryRow> rows, std::string_view hashes) {
  std::ostringstream os;
  os << "# dyad summary format_version=1 sd=population config_hashes=" << hashes << "\n";
  os << "condition,rows";
  for (const auto& [name, field] : analysis::metric_columns()) {
    os << ',' << name << "_n," << name << "_mean," << name << "_median," << name << "_sd";
  }
  os << '\n';
  for (const auto& r : rows) {
    os << r.condition << ',' << r.rows;
    for (const auto& m : r.metrics) {
      os << ',' << m.stats.n << ',' << fmt17(m.stats.mean) << ',' << fmt17(m.stats.median) << ','
         << fmt17(m.stats.sd);
    }
    os << '\n';
  }
  return os.str();
}

struct AnalyzeOutcome {
  std::vector<std::string> runs;
  std::vector<analysis::MetricRow> rows;
  std::vector<analysis::SummaryRow> summary;
  fs::path metrics_path, summary_path;
};

/// Metrics for every run directory whose name matches one of `patterns`
/// (shell globs) and that holds a trace archive.
inline AnalyzeOutcome analyze(const fs::path& root, const std::vector<std::string>& patterns,
                              const fs::path& out_dir, const analysis::AnalysisSettings& settings = {}) {
  if (!fs::is_directory(root)) throw NotFound("workspace not found: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_directory() || !fs::exists(e.path() / "traces.bin") || !fs::exists(e.path() / "manifest.json")) continue;
    const std::string name = e.path().filename().string();
    for (const auto& p : patterns) {
      if (fnmatch(p.c_str(), name.c_str(), 0) == 0) {
        dirs.push_back(e.path());
        break;
      }
    }
  }
  if (dirs.empty()) throw NotFound("no completed runs match the selection under " + root.string());
  std::sort(dirs.begin(), dirs.end());

  AnalyzeOutcome out;
  std::set<std::string> hashes;
  for (const auto& d : dirs) {
    const auto m = read_manifest(d);
    const auto traces = archive::read_traces(d / "traces.bin");
    auto rows = analysis::compute_metrics(m.run_id, m.config_hash, traces.traces, settings);
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    out.runs.push_back(m.run_id);
    hashes.insert(m.config_hash);
  }
  out.summary = analysis::summarize(out.rows);

  std::string joined;
  for (const auto& h : hashes) joined += (joined.empty() ? "" : ";") + h;
  fs::create_directories(out_dir);
  out.metrics_path = out_dir / "metrics.csv";
  out.summary_path = out_dir / "summary.csv";
  run::write_text(out.metrics_path, metrics_csv(out.rows));
  run::write_text(out.summary_path, summary_csv(out.summary, joined));
  return out;
}

enum class ExportWhat { Trajectories, Neural, All };

inline ExportWhat parse_export_what(std::string_view s) {
  if (s == "trajectories") return ExportWhat::Trajectories;
  if (s == "neural") return ExportWhat::Neural;
  if (s == "all") return ExportWhat::All;
  throw ConfigError("export: --what must be trajectories, neural or all");
}

/// Per-step CSV of one trial. Column sets per mode:
///   all:          step,time,agent,x,y,heading,n1,n2,n3,emission
///   trajectories: step,time,agent,x,y,heading,emission
///   neural:       step,time,agent,n1,n2,n3
inline std::string export_trial_csv(const archive::TraceFile& file, std::size_t trial, ExportWhat what) {
  const experiments::TrialTrace* trace = nullptr;
  for (const auto& t : file.traces) {
    if (t.trial_index == trial) trace = &t;
  }
  if (!trace) throw NotFound("run " + file.run_id + " has no trial " + std::to_string(trial));
  const bool pose = what != ExportWhat::Neural;
  const bool neural = what != ExportWhat::Trajectories;
  std::ostringstream os;
  os << "# dyad trial export format_version=1 run_id=" << file.run_id << " config_hash=" << file.config_hash
     << " trial=" << trial << "\n";
  os << "step,time,agent";
  if (pose) os << ",x,y,heading";
  if (neural) os << ",n1,n2,n3";
  if (pose) os << ",emission";
  os << '\n';
  for (std::size_t a = 0; a < trace->agents.size(); ++a) {
    const auto& steps = trace->agents[a].steps;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const auto& s = steps[t];
      os << t << ',' << fmt17(static_cast<double>(t + 1) * trace->spec.dt) << ',' << a;
      if (pose) os << ',' << fmt17(s.center.x) << ',' << fmt17(s.center.y) << ',' << fmt17(s.heading);
      if (neural) os << ',' << fmt17(s.neural[0]) << ',' << fmt17(s.neural[1]) << ',' << fmt17(s.neural[2]);
      if (pose) os << ',' << fmt17(s.emission);
      os << '\n';
    }
  }
  return os.str();
}

inline archive::TraceFile load_run_traces(const fs::path& root, const std::string& run_id) {
  const auto path = root / run_id / "traces.bin";
  if (!fs::exists(path)) throw NotFound("no trace archive for run '" + run_id + "' under " + root.string());
  return archive::read_traces(path);
}

inline fs::path extract_playback_file(const fs::path& root, const std::string& run_id, std::size_t agent,
                                      std::optional<fs::path> out) {
  const auto traces = load_run_traces(root, run_id);
  const auto m = read_manifest(root / run_id);
  if (traces.traces.size() != experiments::kTrials) throw ConfigError("run does not hold four recorded trials");
  for (const auto& t : traces.traces) {
    if (agent >= t.agents.size()) throw NotFound("run '" + run_id + "' has no agent " + std::to_string(agent));
  }
  const std::int64_t generation = m.extra.value("generations_completed", std::int64_t{0}) - 1;
  const auto playback = experiments::extract_playback(traces.traces, agent, run_id, generation);
  const fs::path path = out ? *out : root / run_id / "playback.bin";
  archive::write_playback(path, {traces.config_hash, playback});
  return path;
}

}  // namespace dyad::workspace
