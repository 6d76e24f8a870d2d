#pragma once

// Fitness evaluation per coupling condition, trace recording of champions and
// the ghost test of evolved pairs.

#include <array>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyad/entropy.hpp"
#include "dyad/genome.hpp"
#include "dyad/trial.hpp"

namespace dyad::experiments {

struct EvaluationSetup {
  Condition condition = Condition::Interactive;
  TrialSpec trial;                           // relative_angle is overridden per trial
  std::shared_ptr<const Playback> playback;  // required for ghost conditions
  std::size_t burn_in = 0;
};

struct Evaluation {
  double fitness = 0.0;
  std::array<double, 2> agent_entropy{};  // per live agent; second unused unless interactive
  std::string diagnostic;                 // non-empty when a trial was aborted
};

inline std::size_t genotype_length(Condition c) {
  return agents_per_genotype(c) * genome::kGenesPerAgent<kNeurons>;
}

inline void check_setup(const EvaluationSetup& setup) {
  if (setup.condition == Condition::GhostEvolution || setup.condition == Condition::GhostTest) {
    if (!setup.playback) throw std::invalid_argument("ghost condition requires a playback");
    if (setup.playback->trials.size() < kTrials) {
      throw std::invalid_argument("playback holds " + std::to_string(setup.playback->trials.size()) +
                                  " trials, need " + std::to_string(kTrials));
    }
  }
}

/// Runs the four trials of `condition` for the decoded agents, handing each
/// step to `sink_for(trial_index)`.
template <class SinkFactory>
void run_trials(const std::vector<AgentParams>& agents, const EvaluationSetup& setup, SinkFactory&& sink_for) {
  check_setup(setup);
  for (std::size_t i = 0; i < kTrials; ++i) {
    const TrialSpec spec = with_angle(setup.trial, kTrialAngles[i]);
    switch (setup.condition) {
      case Condition::Interactive:
        run_trial_interactive(agents.at(0), agents.at(1), spec, sink_for(i));
        break;
      case Condition::GhostEvolution:
      case Condition::GhostTest:
        run_trial_ghost(agents.at(0), setup.playback->trials[i], spec, sink_for(i));
        break;
      case Condition::Isolated:
        run_trial_isolated(agents.at(0), spec, sink_for(i));
        break;
    }
  }
}

/// Interactive fitness is the mean of both agents' pooled entropies; the
/// other conditions score the single live agent.
inline Evaluation evaluate(const genome::Genotype& g, const EvaluationSetup& setup) {
  const std::size_t expected = genotype_length(setup.condition);
  if (g.size() != expected) {
    throw std::invalid_argument("evaluate: " + std::string(to_string(setup.condition)) + " expects " +
                                std::to_string(expected) + " genes, got " + std::to_string(g.size()));
  }
  const auto agents = genome::decode<kNeurons>(g);
  const std::size_t live = agents.size();

  std::array<entropy::Histogram3D, 2> hist;
  for (std::size_t a = 0; a < live; ++a) hist[a].reserve(kTrials * setup.trial.duration_steps);
  Evaluation out;
  try {
    HistogramSink sink(std::span(hist.data(), live), setup.burn_in);
    run_trials(agents, setup, [&](std::size_t) -> HistogramSink& { return sink; });
  } catch (const TrialAborted& e) {
    out.diagnostic = e.what();
    return out;
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < live; ++a) {
    out.agent_entropy[a] = entropy::normalized_entropy(hist[a]).value;
    sum += out.agent_entropy[a];
  }
  out.fitness = sum / static_cast<double>(live);
  return out;
}

/// Full traces of the four trials.
inline std::vector<TrialTrace> record_trials(const genome::Genotype& g, const EvaluationSetup& setup) {
  const auto agents = genome::decode<kNeurons>(g);
  const bool ghost = setup.condition == Condition::GhostEvolution || setup.condition == Condition::GhostTest;
  const std::size_t tracked = setup.condition == Condition::Isolated ? 1 : 2;
  std::vector<TrialTrace> traces(kTrials);
  std::vector<TraceRecorder> recorders;
  recorders.reserve(kTrials);
  for (std::size_t i = 0; i < kTrials; ++i) {
    traces[i].condition = setup.condition;
    traces[i].spec = with_angle(setup.trial, kTrialAngles[i]);
    traces[i].trial_index = i;
    recorders.emplace_back(traces[i], tracked, ghost ? 1 : SIZE_MAX);
  }
  run_trials(agents, setup, [&](std::size_t i) -> TraceRecorder& { return recorders[i]; });
  return traces;
}

// Any of the other three placements, chosen uniformly.
template <genome::RandomSource R>
std::size_t other_angle_index(std::size_t recorded, R& rng) {
  std::size_t pick = rng.index(kTrials - 1);
  return pick >= recorded ? pick + 1 : pick;
}

struct GhostTestTrial {
  std::size_t trial_index = 0;
  double recorded_angle = 0.0;
  double test_angle = 0.0;
  double live_entropy = 0.0;  // this trial alone
};

struct GhostTestReport {
  std::vector<GhostTestTrial> trials;
  double pooled_entropy = 0.0;  // all four trials in one histogram
  std::vector<TrialTrace> traces;
};

/// Replays the recorded partner of each trial against `live`, starting from
/// a placement that differs from the recorded one.
template <genome::RandomSource R>
GhostTestReport ghost_test(const AgentParams& live, const Playback& playback, const TrialSpec& base, R& rng,
                           std::size_t burn_in = 0) {
  if (playback.trials.size() != kTrials) {
    throw std::invalid_argument("ghost test: playback holds " + std::to_string(playback.trials.size()) +
                                " trials, need " + std::to_string(kTrials));
  }
  GhostTestReport report;
  report.traces.resize(kTrials);
  for (std::size_t i = 0; i < kTrials; ++i) {
    const auto& recorded = playback.trials[i];
    std::size_t recorded_index = kTrials;
    for (std::size_t k = 0; k < kTrials; ++k) {
      if (kTrialAngles[k] == recorded.relative_angle) recorded_index = k;
    }
    if (recorded_index == kTrials) throw std::invalid_argument("ghost test: recorded angle is not a trial angle");
    const double angle = kTrialAngles[other_angle_index(recorded_index, rng)];

    TrialTrace& trace = report.traces[i];
    trace.condition = Condition::GhostTest;
    trace.spec = with_angle(base, angle);
    trace.trial_index = i;
    run_trial_ghost(live, recorded, trace.spec, TraceRecorder(trace, 2, 1));

    entropy::Histogram3D h;
    const auto& steps = trace.agents[0].steps;
    for (std::size_t t = burn_in; t < steps.size(); ++t) h.accumulate(steps[t].neural);
    report.trials.push_back({i, recorded.relative_angle, angle, entropy::normalized_entropy(h).value});
  }
  report.pooled_entropy = trial_set_entropy(report.traces, 0, burn_in);
  return report;
}

}  // namespace dyad::experiments
