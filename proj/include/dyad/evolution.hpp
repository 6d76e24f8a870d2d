#pragma once

// Generational loop: evaluate, record, breed. Evaluations within a
// generation run on a small thread pool; the GA itself draws from a single
// master stream, so results do not depend on the degree of parallelism.

#include <algorithm>
#include <atomic>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "dyad/genome.hpp"

namespace dyad::evolution {

using genome::Genotype;

template <class F>
concept FitnessFunction = requires(const F& f, const Genotype& g) {
  { f(g) } -> std::convertible_to<double>;
};

struct EvolutionSettings {
  std::size_t population = 96;
  std::size_t generations = 2000;
  std::uint64_t seed = 1;
  std::size_t genotype_length = 30;
  genome::GaSettings ga;
  unsigned parallelism = 1;  // 0 = hardware concurrency
};

struct GenerationStats {
  std::size_t generation = 0;
  double best = 0.0;
  double mean = 0.0;
  std::size_t best_index = 0;

  friend bool operator==(const GenerationStats&, const GenerationStats&) = default;
};

// Everything needed to continue a run. After generation g has been
// evaluated, `generation` is g + 1 and `population` is its offspring (or,
// after the last generation, the evaluated population itself).
struct EvolutionState {
  std::size_t generation = 0;
  std::vector<Genotype> population;
  std::vector<double> fitness;  // of the most recently evaluated population
  genome::Rng rng;
  std::vector<GenerationStats> history;
  std::vector<Genotype> best_per_generation;

  bool finished(const EvolutionSettings& s) const { return generation >= s.generations; }
  // Champion of the most recently evaluated generation.
  const Genotype& champion() const { return best_per_generation.back(); }
};

inline EvolutionState initial_state(const EvolutionSettings& s) {
  if (s.population < 2) throw std::invalid_argument("evolution: population must hold at least two genotypes");
  EvolutionState st;
  st.rng.reseed(s.seed);
  st.population.reserve(s.population);
  for (std::size_t i = 0; i < s.population; ++i) {
    st.population.push_back(genome::random_genotype(s.genotype_length, st.rng));
  }
  return st;
}

inline unsigned resolve_parallelism(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

template <FitnessFunction F>
std::vector<double> evaluate_population(const std::vector<Genotype>& population, const F& fitness,
                                        unsigned parallelism) {
  std::vector<double> out(population.size());
  const unsigned workers =
      std::min<unsigned>(resolve_parallelism(parallelism), static_cast<unsigned>(population.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < population.size(); ++i) out[i] = fitness(population[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < population.size(); i = next++) {
          try {
            out[i] = fitness(population[i]);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline GenerationStats summarize_generation(std::size_t generation, const std::vector<double>& fitness) {
  const auto order = genome::rank_by_fitness(fitness);
  double sum = 0.0;
  for (double f : fitness) sum += f;
  return {generation, fitness[order.front()], sum / static_cast<double>(fitness.size()), order.front()};
}

/// Runs until the configured generation count or until `on_generation`
/// returns false. Returns the state to resume from.
template <FitnessFunction F>
EvolutionState evolve(const EvolutionSettings& settings, const F& fitness, EvolutionState state,
                      const std::function<bool(const EvolutionState&)>& on_generation = {}) {
  if (state.population.size() != settings.population) {
    throw std::invalid_argument("evolution: state population size does not match settings");
  }
  while (!state.finished(settings)) {
    state.fitness = evaluate_population(state.population, fitness, settings.parallelism);
    const auto stats = summarize_generation(state.generation, state.fitness);
    state.history.push_back(stats);
    state.best_per_generation.push_back(state.population[stats.best_index]);
    if (state.generation + 1 < settings.generations) {
      state.population = genome::next_generation(state.population, state.fitness, state.rng, settings.ga);
    }
    ++state.generation;
    if (on_generation && !on_generation(state)) break;
  }
  return state;
}

template <FitnessFunction F>
EvolutionState evolve(const EvolutionSettings& settings, const F& fitness,
                      const std::function<bool(const EvolutionState&)>& on_generation = {}) {
  return evolve(settings, fitness, initial_state(settings), on_generation);
}

}  // namespace dyad::evolution
