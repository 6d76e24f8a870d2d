#pragma once

// Genotype layout, decoding into controller parameters, and the generational
// GA: truncation elitism, Gaussian mutation, then per-gene swap crossover.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dyad/neural.hpp"

namespace dyad::genome {

inline constexpr double kGeneMin = -1.0;
inline constexpr double kGeneMax = 1.0;

template <std::size_t N>
inline constexpr std::size_t kGenesPerAgent = 6 + N * N + 5 * N;

static_assert(kGenesPerAgent<3> == 30);

struct Genotype {
  std::vector<double> genes;

  std::size_t size() const { return genes.size(); }
  friend bool operator==(const Genotype&, const Genotype&) = default;
};

enum class ParamKind {
  SensorGain,
  SensorBias,
  TimeConstant,
  NeuronBias,
  RecurrentWeight,
  SensorWeight,
  ActuatorWeight,
  ActuatorGain,
  ActuatorBias,
};

struct ParamRange {
  ParamKind kind;
  double low;
  double high;
};

inline constexpr double kBiasLimit = 3.0;
inline constexpr double kWeightLimit = 8.0;

// Positional gene layout for one agent:
//   [0] sensor gain, [1] sensor bias, [2] time constant, [3] neuron bias,
//   [4, 4+N*N) recurrent weights w[to][from] row-major,
//   then 2N sensor weights w[neuron][sensor], then 3N actuator weights
//   w[neuron][actuator], then actuator gain and actuator bias.
template <std::size_t N>
using ScalingSpec = std::array<ParamRange, kGenesPerAgent<N>>;

template <std::size_t N>
constexpr ScalingSpec<N> default_scaling() {
  ScalingSpec<N> spec{};
  std::size_t k = 0;
  spec[k++] = {ParamKind::SensorGain, 1.0, 5.0};
  spec[k++] = {ParamKind::SensorBias, -kBiasLimit, kBiasLimit};
  spec[k++] = {ParamKind::TimeConstant, 1.0, 2.0};
  spec[k++] = {ParamKind::NeuronBias, -kBiasLimit, kBiasLimit};
  for (std::size_t i = 0; i < N * N; ++i) spec[k++] = {ParamKind::RecurrentWeight, -kWeightLimit, kWeightLimit};
  for (std::size_t i = 0; i < N * neural::kSensors; ++i) spec[k++] = {ParamKind::SensorWeight, -kWeightLimit, kWeightLimit};
  for (std::size_t i = 0; i < N * neural::kActuators; ++i) spec[k++] = {ParamKind::ActuatorWeight, -kWeightLimit, kWeightLimit};
  spec[k++] = {ParamKind::ActuatorGain, 1.0, 5.0};
  spec[k++] = {ParamKind::ActuatorBias, -kBiasLimit, kBiasLimit};
  return spec;
}

inline double scale_gene(double gene, const ParamRange& range) {
  return range.low + (gene + 1.0) / 2.0 * (range.high - range.low);
}

/// Decodes one agent's block of genes.
template <std::size_t N = 3>
neural::AgentParams<N> decode_agent(std::span<const double> block,
                                    const ScalingSpec<N>& spec = default_scaling<N>()) {
  if (block.size() != kGenesPerAgent<N>) {
    throw std::invalid_argument("decode_agent: expected " + std::to_string(kGenesPerAgent<N>) +
                                " genes, got " + std::to_string(block.size()));
  }
  std::size_t k = 0;
  auto next = [&] {
    const double v = scale_gene(block[k], spec[k]);
    ++k;
    return v;
  };
  neural::AgentParams<N> p;
  p.sensor.gain = next();
  p.sensor.bias = next();
  p.ctrnn.tau = next();
  p.ctrnn.bias = next();
  for (auto& row : p.ctrnn.weights)
    for (auto& w : row) w = next();
  for (auto& row : p.ctrnn.sensor_weights)
    for (auto& w : row) w = next();
  for (auto& row : p.actuator.weights)
    for (auto& w : row) w = next();
  p.actuator.gain = next();
  p.actuator.bias = next();
  return p;
}

/// Decodes every 30-gene block of a genotype, in order.
template <std::size_t N = 3>
std::vector<neural::AgentParams<N>> decode(const Genotype& g,
                                           const ScalingSpec<N>& spec = default_scaling<N>()) {
  constexpr std::size_t block = kGenesPerAgent<N>;
  if (g.size() == 0 || g.size() % block != 0) {
    throw std::invalid_argument("decode: genotype length " + std::to_string(g.size()) +
                                " is not a positive multiple of " + std::to_string(block));
  }
  std::vector<neural::AgentParams<N>> agents;
  agents.reserve(g.size() / block);
  for (std::size_t off = 0; off < g.size(); off += block) {
    agents.push_back(decode_agent<N>(std::span<const double>(g.genes).subspan(off, block), spec));
  }
  return agents;
}

// Anything the GA operators can draw from. Tests substitute scripted sources.
template <class R>
concept RandomSource = requires(R& r, double s, std::size_t n) {
  { r.gaussian(s) } -> std::convertible_to<double>;
  { r.uniform() } -> std::convertible_to<double>;
  { r.index(n) } -> std::convertible_to<std::size_t>;
};

class Rng {
 public:
  Rng() { reseed(0); }
  explicit Rng(std::uint64_t seed) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    engine_.seed(seq);
  }

  // Independent stream keyed by (seed, a, b).
  static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    Rng r;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    r.engine_.seed(seq);
    return r;
  }

  double gaussian(double stddev) { return std::normal_distribution<double>(0.0, stddev)(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  // Distributions are constructed per draw, so the engine is the whole state.
  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void restore(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (!is) throw std::invalid_argument("Rng::restore: malformed engine state");
  }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::mt19937_64 engine_;
};

static_assert(RandomSource<Rng>);

struct GaSettings {
  double elite_fraction = 0.04;
  double mutation_variance = 0.1;
  double crossover_probability = 0.1;
};

// ceil(fraction * P), at least one, tolerant of 0.04 * 25 landing a hair above 1.
inline std::size_t elite_count(std::size_t population, double fraction = 0.04) {
  if (population == 0) throw std::invalid_argument("elite_count: empty population");
  const double x = fraction * static_cast<double>(population);
  const double nearest = std::round(x);
  const double count = std::abs(x - nearest) < 1e-9 ? nearest : std::ceil(x);
  return std::clamp<std::size_t>(static_cast<std::size_t>(count), 1, population);
}

template <RandomSource R>
Genotype random_genotype(std::size_t length, R& rng) {
  Genotype g;
  g.genes.resize(length);
  for (auto& x : g.genes) x = kGeneMin + (kGeneMax - kGeneMin) * rng.uniform();
  return g;
}

template <RandomSource R>
Genotype mutate(Genotype g, R& rng, double variance = 0.1) {
  const double stddev = std::sqrt(variance);
  for (auto& x : g.genes) x = std::clamp(x + rng.gaussian(stddev), kGeneMin, kGeneMax);
  return g;
}

template <RandomSource R>
std::pair<Genotype, Genotype> crossover(Genotype a, Genotype b, R& rng, double probability = 0.1) {
  if (a.size() != b.size()) throw std::invalid_argument("crossover: genotype lengths differ");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (rng.uniform() < probability) std::swap(a.genes[i], b.genes[i]);
  }
  return {std::move(a), std::move(b)};
}

// Indices sorted by descending fitness; ties keep population order, NaN sorts last.
inline std::vector<std::size_t> rank_by_fitness(std::span<const double> fitness) {
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    return std::isnan(fitness[i]) ? -std::numeric_limits<double>::infinity() : fitness[i];
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  return order;
}

/// Elites are copied verbatim at the front of the new population; the rest
/// comes from uniformly drawn elite parent pairs, mutated, then crossed over.
template <RandomSource R>
std::vector<Genotype> next_generation(const std::vector<Genotype>& population,
                                      std::span<const double> fitness, R& rng,
                                      const GaSettings& settings = {}) {
  if (population.empty()) throw std::invalid_argument("next_generation: empty population");
  if (population.size() != fitness.size()) {
    throw std::invalid_argument("next_generation: population and fitness sizes differ");
  }
  const std::size_t pop = population.size();
  const std::size_t elites = elite_count(pop, settings.elite_fraction);
  const auto order = rank_by_fitness(fitness);

  std::vector<Genotype> next;
  next.reserve(pop);
  for (std::size_t e = 0; e < elites; ++e) next.push_back(population[order[e]]);

  while (next.size() < pop) {
    const Genotype& mum = population[order[rng.index(elites)]];
    const Genotype& dad = population[order[rng.index(elites)]];
    auto [first, second] = crossover(mutate(mum, rng, settings.mutation_variance),
                                     mutate(dad, rng, settings.mutation_variance), rng,
                                     settings.crossover_probability);
    next.push_back(std::move(first));
    if (next.size() < pop) next.push_back(std::move(second));
  }
  return next;
}

}  // namespace dyad::genome
