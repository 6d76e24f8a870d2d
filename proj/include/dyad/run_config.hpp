#pragma once

// Run configuration (structured JSON with strict key checking), the
// configuration hash that binds outputs to it, and checkpoint files.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

#include "dyad/evolution.hpp"
#include "dyad/experiments.hpp"

namespace dyad::run {

using nlohmann::json;

inline constexpr int kConfigVersion = 1;
inline constexpr int kCheckpointVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  experiments::Condition condition = experiments::Condition::Interactive;
  std::size_t population = 96;
  std::size_t generations = 2000;
  std::uint64_t seed = 1;
  double dt = 0.01;
  std::size_t duration_steps = 10000;
  double initial_distance = 20.0;
  std::size_t burn_in = 0;
  physics::PlateauMode plateau = physics::PlateauMode::EmitterToSensor;
  double elite_fraction = 0.04;
  double mutation_variance = 0.1;
  double crossover_probability = 0.1;
  std::size_t checkpoint_interval = 10;
  unsigned parallelism = 0;  // 0 = all cores
  std::string playback;      // ghost-evolution only
  std::string run_id;        // empty = derived from condition, seed and hash
};

inline std::string_view to_string(physics::PlateauMode m) {
  return m == physics::PlateauMode::EmitterToSensor ? "emitter-sensor" : "center-center";
}

inline physics::PlateauMode parse_plateau(std::string_view s) {
  if (s == "emitter-sensor") return physics::PlateauMode::EmitterToSensor;
  if (s == "center-center") return physics::PlateauMode::CenterToCenter;
  throw ConfigError("plateau must be \"emitter-sensor\" or \"center-center\", got \"" + std::string(s) + "\"");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << text;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// 1-based line of the first occurrence of "key" in `text`, 0 if absent.
inline std::size_t line_of_key(std::string_view text, std::string_view key) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  const auto pos = text.find(quoted);
  if (pos == std::string_view::npos) return 0;
  std::size_t line = 1;
  for (std::size_t i = 0; i < pos; ++i) line += text[i] == '\n';
  return line;
}

inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.condition == experiments::Condition::GhostTest) fail("condition ghost-test is run with the ghost-test command, not evolved");
  if (c.population < 2) fail("population must be at least 2");
  if (c.generations == 0) fail("generations must be at least 1");
  if (!(c.dt > 0.0)) fail("dt must be positive");
  if (c.duration_steps == 0) fail("duration_steps must be at least 1");
  if (!(c.initial_distance > 0.0)) fail("initial_distance must be positive");
  if (c.burn_in >= c.duration_steps) fail("burn_in must be shorter than duration_steps");
  if (!(c.elite_fraction > 0.0 && c.elite_fraction <= 1.0)) fail("elite_fraction must be in (0, 1]");
  if (!(c.mutation_variance >= 0.0)) fail("mutation_variance must be non-negative");
  if (!(c.crossover_probability >= 0.0 && c.crossover_probability <= 1.0)) fail("crossover_probability must be in [0, 1]");
  if (c.checkpoint_interval == 0) fail("checkpoint_interval must be at least 1");
  if (c.condition == experiments::Condition::GhostEvolution && c.playback.empty()) {
    fail("ghost-evolution needs a playback archive (key \"playback\")");
  }
}

/// Applies the keys present in `j` on top of `base`. Unknown keys, wrong
/// types and bad values raise ConfigError naming the key and, when `text`
/// is given, its line.
inline RunConfig apply_json(RunConfig base, const json& j, std::string_view text = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  auto where = [&](const std::string& key) {
    const auto line = line_of_key(text, key);
    return line ? "line " + std::to_string(line) + ": " : std::string{};
  };
  static const std::set<std::string> known = {
      "format_version", "condition", "population", "generations", "seed", "dt", "duration_steps",
      "initial_distance", "burn_in", "plateau", "elite_fraction", "mutation_variance",
      "crossover_probability", "checkpoint_interval", "parallelism", "playback", "run_id"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(where(key) + "unknown key \"" + key + "\"");
  }
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      using T = std::remove_reference_t<decltype(field)>;
      const auto& v = j.at(key);
      if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("expected a string");
        field = v.template get<std::string>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("expected a number");
        field = v.template get<T>();
      } else {
        if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
        field = v.template get<T>();
      }
    } catch (const ConfigError& e) {
      throw ConfigError(where(key) + "\"" + key + "\": " + e.what());
    }
  };
  if (j.contains("format_version")) {
    if (!j.at("format_version").is_number_integer() || j.at("format_version").get<int>() != kConfigVersion) {
      throw ConfigError(where("format_version") + "unsupported format_version (expected " +
                        std::to_string(kConfigVersion) + ")");
    }
  }
  std::string condition, plateau;
  get("condition", condition);
  get("plateau", plateau);
  try {
    if (!condition.empty()) base.condition = experiments::parse_condition(condition);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where("condition") + e.what());
  }
  try {
    if (!plateau.empty()) base.plateau = parse_plateau(plateau);
  } catch (const ConfigError& e) {
    throw ConfigError(where("plateau") + e.what());
  }
  get("population", base.population);
  get("generations", base.generations);
  get("seed", base.seed);
  get("dt", base.dt);
  get("duration_steps", base.duration_steps);
  get("initial_distance", base.initial_distance);
  get("burn_in", base.burn_in);
  get("elite_fraction", base.elite_fraction);
  get("mutation_variance", base.mutation_variance);
  get("crossover_probability", base.crossover_probability);
  get("checkpoint_interval", base.checkpoint_interval);
  get("parallelism", base.parallelism);
  get("playback", base.playback);
  get("run_id", base.run_id);
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return apply_json(std::move(base), j, text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline json to_json(const RunConfig& c) {
  return json{{"format_version", kConfigVersion},
              {"condition", experiments::to_string(c.condition)},
              {"population", c.population},
              {"generations", c.generations},
              {"seed", c.seed},
              {"dt", c.dt},
              {"duration_steps", c.duration_steps},
              {"initial_distance", c.initial_distance},
              {"burn_in", c.burn_in},
              {"plateau", to_string(c.plateau)},
              {"elite_fraction", c.elite_fraction},
              {"mutation_variance", c.mutation_variance},
              {"crossover_probability", c.crossover_probability},
              {"checkpoint_interval", c.checkpoint_interval},
              {"parallelism", c.parallelism},
              {"playback", c.playback},
              {"run_id", c.run_id}};
}

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Hash over every setting that can change results. Parallelism, checkpoint
/// cadence, ids and paths are excluded; a playback is represented by a
/// digest of its bytes.
inline std::string config_hash(const RunConfig& c, std::string_view playback_bytes = {}) {
  json j = to_json(c);
  for (const char* k : {"parallelism", "checkpoint_interval", "run_id", "playback"}) j.erase(k);
  if (c.condition == experiments::Condition::GhostEvolution) j["playback_digest"] = hex64(fnv1a(playback_bytes));
  return hex64(fnv1a(j.dump()));
}

inline experiments::TrialSpec trial_spec(const RunConfig& c) {
  experiments::TrialSpec s;
  s.initial_distance = c.initial_distance;
  s.duration_steps = c.duration_steps;
  s.dt = c.dt;
  s.plateau = c.plateau;
  return s;
}

inline evolution::EvolutionSettings evolution_settings(const RunConfig& c) {
  evolution::EvolutionSettings s;
  s.population = c.population;
  s.generations = c.generations;
  s.seed = c.seed;
  s.genotype_length = experiments::genotype_length(c.condition);
  s.ga = {c.elite_fraction, c.mutation_variance, c.crossover_probability};
  s.parallelism = c.parallelism;
  return s;
}

// %.17g: enough digits for any double to read back unchanged.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fitness_csv(const std::vector<evolution::GenerationStats>& history, std::string_view hash) {
  std::ostringstream os;
  os << "# dyad fitness history format_version=1 config_hash=" << hash << "\n";
  os << "generation,best,mean,best_index\n";
  for (const auto& h : history) {
    os << h.generation << ',' << fmt17(h.best) << ',' << fmt17(h.mean) << ',' << h.best_index << '\n';
  }
  return os.str();
}

struct Checkpoint {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t agents_per_genotype = 1;
  evolution::EvolutionState state;
};

inline json genotypes_to_json(const std::vector<genome::Genotype>& gs) {
  json arr = json::array();
  for (const auto& g : gs) arr.push_back(g.genes);
  return arr;
}

inline std::vector<genome::Genotype> genotypes_from_json(const json& arr) {
  std::vector<genome::Genotype> gs;
  for (const auto& g : arr) gs.push_back({g.get<std::vector<double>>()});
  return gs;
}

inline std::string checkpoint_json(const Checkpoint& c) {
  json hist = json::array();
  for (const auto& h : c.state.history) {
    hist.push_back({{"generation", h.generation}, {"best", h.best}, {"mean", h.mean}, {"best_index", h.best_index}});
  }
  json j{{"format_version", kCheckpointVersion},
         {"kind", "dyad-checkpoint"},
         {"config_hash", c.config_hash},
         {"seed", c.seed},
         {"agents_per_genotype", c.agents_per_genotype},
         {"generation", c.state.generation},
         {"rng_state", c.state.rng.state()},
         {"population", genotypes_to_json(c.state.population)},
         {"fitness", c.state.fitness},
         {"history", hist},
         {"best_per_generation", genotypes_to_json(c.state.best_per_generation)}};
  return j.dump() + "\n";
}

inline Checkpoint parse_checkpoint(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("kind") != "dyad-checkpoint") throw ConfigError("not a checkpoint file");
    if (j.at("format_version") != kCheckpointVersion) throw ConfigError("unsupported checkpoint format_version");
    Checkpoint c;
    c.config_hash = j.at("config_hash").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.agents_per_genotype = j.at("agents_per_genotype").get<std::size_t>();
    c.state.generation = j.at("generation").get<std::size_t>();
    c.state.rng.restore(j.at("rng_state").get<std::string>());
    c.state.population = genotypes_from_json(j.at("population"));
    c.state.fitness = j.at("fitness").get<std::vector<double>>();
    for (const auto& h : j.at("history")) {
      c.state.history.push_back({h.at("generation").get<std::size_t>(), h.at("best").get<double>(),
                                 h.at("mean").get<double>(), h.at("best_index").get<std::size_t>()});
    }
    c.state.best_per_generation = genotypes_from_json(j.at("best_per_generation"));
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace dyad::run
