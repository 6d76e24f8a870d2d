// dyad: evolve, ghost-test, analyze and export dyadic-agent runs.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dyad/workspace.hpp"

namespace fs = std::filesystem;
namespace ws = dyad::workspace;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct EvolveFlags {
  std::optional<fs::path> config;
  std::optional<std::string> condition;
  std::optional<std::size_t> population, generations, steps, burn_in, checkpoint_interval, stop_after;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt, distance;
  std::optional<unsigned> parallelism;
  std::optional<std::string> playback, plateau, run_id, resume;
};

dyad::run::RunConfig build_config(const EvolveFlags& f) {
  dyad::run::RunConfig c;
  if (f.config) c = dyad::run::load_config(*f.config);
  if (f.condition) {
    try {
      c.condition = dyad::experiments::parse_condition(*f.condition);
    } catch (const std::invalid_argument& e) {
      throw dyad::run::ConfigError(std::string("--condition: ") + e.what());
    }
  }
  if (f.population) c.population = *f.population;
  if (f.generations) c.generations = *f.generations;
  if (f.seed) c.seed = *f.seed;
  if (f.dt) c.dt = *f.dt;
  if (f.steps) c.duration_steps = *f.steps;
  if (f.distance) c.initial_distance = *f.distance;
  if (f.burn_in) c.burn_in = *f.burn_in;
  if (f.plateau) c.plateau = dyad::run::parse_plateau(*f.plateau);
  if (f.checkpoint_interval) c.checkpoint_interval = *f.checkpoint_interval;
  if (f.parallelism) c.parallelism = *f.parallelism;
  if (f.playback) c.playback = *f.playback;
  if (f.run_id) c.run_id = *f.run_id;
  if (f.resume) c.run_id = *f.resume;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolution and analysis of acoustically coupled agent pairs"};
  app.require_subcommand(1);
  std::optional<fs::path> workspace_flag;
  app.add_option("-w,--workspace", workspace_flag, "Workspace root (default $DYAD_WORKSPACE or ./workspace)");

  EvolveFlags ev;
  auto* evolve = app.add_subcommand("evolve", "Evolve a population under one coupling condition");
  evolve->add_option("--config", ev.config, "JSON run configuration")->check(CLI::ExistingFile);
  evolve->add_option("--condition", ev.condition, "interactive | ghost-evolution | isolated");
  evolve->add_option("--pop", ev.population, "Population size");
  evolve->add_option("--gens", ev.generations, "Generations");
  evolve->add_option("--seed", ev.seed, "Master seed");
  evolve->add_option("--dt", ev.dt, "Integration step");
  evolve->add_option("--steps", ev.steps, "Steps per trial");
  evolve->add_option("--distance", ev.distance, "Initial distance between agents");
  evolve->add_option("--burn-in", ev.burn_in, "Steps per trial left out of the entropy histogram");
  evolve->add_option("--plateau", ev.plateau, "emitter-sensor | center-center");
  evolve->add_option("--playback", ev.playback, "Playback archive (ghost-evolution)");
  evolve->add_option("--parallelism", ev.parallelism, "Evaluation threads (0 = all cores)");
  evolve->add_option("--checkpoint-interval", ev.checkpoint_interval, "Generations between checkpoints");
  evolve->add_option("--run-id", ev.run_id, "Run directory name");
  evolve->add_option("--resume", ev.resume, "Continue the named run from its checkpoint");
  evolve->add_option("--stop-after", ev.stop_after, "Checkpoint and stop after this many generations");

  ws::GhostTestInputs gt;
  std::optional<std::string> gt_run;
  std::optional<fs::path> gt_genotype, gt_playback, gt_config;
  auto* ghost = app.add_subcommand("ghost-test", "Test an evolved pair's live agent against its recorded partner");
  ghost->add_option("--run", gt_run, "Interactive run to test");
  ghost->add_option("--genotype", gt_genotype, "Genotype file (instead of --run)");
  ghost->add_option("--playback", gt_playback, "Playback archive (instead of --run)");
  ghost->add_option("--config", gt_config, "Trial settings when not using --run");
  ghost->add_option("--seed", gt.seed, "Seed for the placement draw")->capture_default_str();
  ghost->add_option("--out-id", gt.out_id, "Output run directory name");

  std::vector<std::string> patterns{"*"};
  std::optional<fs::path> analyze_out;
  dyad::analysis::AnalysisSettings analysis_settings;
  auto* analyze = app.add_subcommand("analyze", "Metric tables for completed runs");
  analyze->add_option("patterns", patterns, "Run-name globs")->capture_default_str();
  analyze->add_option("--out", analyze_out, "Output directory (default <workspace>/analysis)");
  analyze->add_option("--stride", analysis_settings.heading_stride, "Heading subsampling stride for SampEn")
      ->capture_default_str();
  analyze->add_option("--sampen-m", analysis_settings.sampen_m, "SampEn embedding length")->capture_default_str();
  analyze->add_option("--sampen-r", analysis_settings.sampen_r_factor, "SampEn tolerance as a fraction of SD")
      ->capture_default_str();
  analyze->add_option("--distance-bins", analysis_settings.distance_bins, "Histogram bins for inter-agent distance")->capture_default_str();
  analyze->add_option("--distance-cap", analysis_settings.distance_cap, "Distances at or above this land in the last bin")->capture_default_str();

  std::string export_run, export_what = "all";
  std::size_t export_trial = 0;
  std::optional<fs::path> export_out;
  auto* exp = app.add_subcommand("export", "Per-step CSV of one recorded trial");
  exp->add_option("--run", export_run, "Run id")->required();
  exp->add_option("--trial", export_trial, "Trial index 0-3")->capture_default_str();
  exp->add_option("--what", export_what, "trajectories | neural | all")->capture_default_str();
  exp->add_option("--out", export_out, "Output file (default stdout)");

  std::string extract_run;
  std::size_t extract_agent = 1;
  std::optional<fs::path> extract_out;
  auto* extract = app.add_subcommand("extract-playback", "Write a playback archive from a run's recorded trials");
  extract->add_option("--run", extract_run, "Run id")->required();
  extract->add_option("--agent", extract_agent, "Agent to record")->capture_default_str();
  extract->add_option("--out", extract_out, "Output path (default <run>/playback.bin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    const fs::path root = ws::resolve_root(workspace_flag);
    if (*evolve) {
      ws::EvolveOptions opts;
      opts.stop_after = ev.stop_after;
      opts.resume = ev.resume.has_value();
      const auto out = ws::evolve_run(build_config(ev), root, opts, std::clog);
      std::cout << out.dir.string() << "\n";
    } else if (*ghost) {
      gt.run_id = gt_run;
      gt.genotype = gt_genotype;
      gt.playback = gt_playback;
      gt.config = gt_config;
      const auto out = ws::ghost_test_run(gt, root);
      for (const auto& t : out.report.trials) {
        std::clog << "trial " << t.trial_index << " angle " << t.recorded_angle << " -> " << t.test_angle
                  << " live entropy " << t.live_entropy << "\n";
      }
      std::clog << "pooled live entropy " << out.report.pooled_entropy << "\n";
      std::cout << out.dir.string() << "\n";
    } else if (*analyze) {
      const auto out = ws::analyze(root, patterns, analyze_out.value_or(root / "analysis"), analysis_settings);
      std::clog << "analyzed " << out.runs.size() << " runs, " << out.rows.size() << " rows\n";
      std::cout << out.metrics_path.string() << "\n" << out.summary_path.string() << "\n";
    } else if (*exp) {
      const auto csv = ws::export_trial_csv(ws::load_run_traces(root, export_run), export_trial,
                                            ws::parse_export_what(export_what));
      if (export_out) {
        dyad::run::write_text(*export_out, csv);
      } else {
        std::cout << csv;
      }
    } else if (*extract) {
      std::cout << ws::extract_playback_file(root, extract_run, extract_agent, extract_out).string() << "\n";
    }
  } catch (const dyad::run::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ws::NotFound& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
