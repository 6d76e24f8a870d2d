#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "dyad/experiments.hpp"
#include "oracles.hpp"

using namespace dyad;
using namespace dyad::experiments;

namespace {

genome::Genotype random_pair_genotype(std::uint64_t seed, std::size_t agents = 2) {
  genome::Rng rng(seed);
  return genome::random_genotype(agents * 30, rng);
}

TrialSpec short_spec(std::size_t steps = 600) {
  TrialSpec s;
  s.duration_steps = steps;
  return s;
}

std::vector<TrialTrace> record(const genome::Genotype& g, Condition c, const TrialSpec& spec,
                               std::shared_ptr<const Playback> pb = nullptr) {
  EvaluationSetup setup{c, spec, std::move(pb), 0};
  return record_trials(g, setup);
}

// Drives straight ahead at full speed.
AgentParams charger() {
  AgentParams p;
  p.sensor = {1.0, 0.0};
  p.ctrnn.tau = 1.0;
  p.actuator.gain = 5.0;
  p.actuator.bias = 3.0;
  return p;
}

// Barely moves; a charger placed behind it runs into it.
AgentParams crawler() {
  AgentParams p = charger();
  p.actuator.gain = 1.0;
  p.actuator.bias = -3.0;
  return p;
}

}  // namespace

TEST(Placement, Examples) {
  auto [a, b] = place_agents(with_angle(TrialSpec{}, 0.0));
  EXPECT_EQ(a.center, (Vec2{0, 0}));
  EXPECT_EQ(b.center, (Vec2{20, 0}));
  auto [c, d] = place_agents(with_angle(TrialSpec{}, std::numbers::pi));
  EXPECT_NEAR(d.center.x, -20.0, 1e-12);
  EXPECT_NEAR(d.center.y, 0.0, 1e-12);
  for (double angle : kTrialAngles) {
    auto [p, q] = place_agents(with_angle(TrialSpec{}, angle));
    EXPECT_NEAR(distance(p.center, q.center), 20.0, 1e-12);
    EXPECT_EQ(p.heading, 0.0);
    EXPECT_EQ(q.heading, 0.0);
  }
}

TEST(Conditions, NamesRoundTrip) {
  for (auto c : {Condition::Interactive, Condition::GhostTest, Condition::GhostEvolution, Condition::Isolated}) {
    EXPECT_EQ(parse_condition(to_string(c)), c);
  }
  EXPECT_THROW(parse_condition("solo"), std::invalid_argument);
  EXPECT_EQ(genotype_length(Condition::Interactive), 60u);
  EXPECT_EQ(genotype_length(Condition::GhostEvolution), 30u);
  EXPECT_EQ(genotype_length(Condition::Isolated), 30u);
}

TEST(Interactive, DeterministicAndSized) {
  const auto g = random_pair_genotype(1);
  const auto t1 = record(g, Condition::Interactive, short_spec());
  const auto t2 = record(g, Condition::Interactive, short_spec());
  ASSERT_EQ(t1.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    ASSERT_EQ(t1[i].agents.size(), 2u);
    for (std::size_t a = 0; a < 2; ++a) {
      EXPECT_EQ(t1[i].agents[a].steps.size(), 600u);
      EXPECT_EQ(t1[i].agents[a].steps, t2[i].agents[a].steps);
      for (const auto& s : t1[i].agents[a].steps) {
        for (double n : s.neural) {
          ASSERT_GT(n, 0.0);
          ASSERT_LT(n, 1.0);
        }
        ASSERT_GE(s.heading, 0.0);
        ASSERT_LT(s.heading, physics::kTwoPi);
        ASSERT_GE(s.emission, 0.0);
      }
    }
  }
}

TEST(Interactive, FarApartMatchesIsolated) {
  const auto agents = genome::decode<3>(random_pair_genotype(2));
  TrialSpec spec = short_spec(2000);
  spec.initial_distance = 1e9;
  TrialTrace pair, lone;
  pair.spec = lone.spec = spec;
  run_trial_interactive(agents[0], agents[1], spec, TraceRecorder(pair, 2));
  run_trial_isolated(agents[0], spec, TraceRecorder(lone, 1));
  for (std::size_t t = 0; t < spec.duration_steps; ++t) {
    const auto& p = pair.agents[0].steps[t];
    const auto& l = lone.agents[0].steps[t];
    ASSERT_NEAR(p.center.x, l.center.x, 1e-9);
    ASSERT_NEAR(p.center.y, l.center.y, 1e-9);
    ASSERT_NEAR(p.heading, l.heading, 1e-9);
    for (int k = 0; k < 3; ++k) ASSERT_NEAR(p.neural[k], l.neural[k], 1e-9);
  }
}

TEST(Interactive, ContactsExchangeVelocity) {
  TrialSpec spec = short_spec(800);
  spec.initial_distance = 12.0;
  TrialTrace trace;
  trace.spec = spec;
  run_trial_interactive(charger(), crawler(), spec, TraceRecorder(trace, 2));
  int contacts = 0;
  auto [pa, pb] = place_agents(spec);
  for (std::size_t t = 0; t < spec.duration_steps; ++t) {
    const auto& ra = trace.agents[0].steps[t];
    const auto& rb = trace.agents[1].steps[t];
    if (physics::overlapping(pa.center, pb.center)) {
      ++contacts;
      // Each agent moves with the partner's motor velocity over a contact step.
      EXPECT_DOUBLE_EQ(ra.center.x, pa.center.x + rb.velocity.x * spec.dt);
      EXPECT_DOUBLE_EQ(rb.center.x, pb.center.x + ra.velocity.x * spec.dt);
    }
    pa.center = ra.center;
    pb.center = rb.center;
  }
  EXPECT_GT(contacts, 0);
}

TEST(Ghost, SelfConsistencyBitExact) {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto g = random_pair_genotype(seed);
    TrialSpec spec = short_spec(3000);
    spec.initial_distance = seed == 5 ? 9.0 : 20.0;  // last case starts nearly in contact
    const auto traces = record(g, Condition::Interactive, spec);
    auto pb = std::make_shared<Playback>(extract_playback(traces, 1));
    const auto live_only = genome::Genotype{std::vector<double>(g.genes.begin(), g.genes.begin() + 30)};
    const auto replay = record(live_only, Condition::GhostEvolution, spec, pb);
    for (std::size_t i = 0; i < kTrials; ++i) {
      ASSERT_EQ(replay[i].agents[0].steps, traces[i].agents[0].steps) << "seed " << seed << " trial " << i;
      ASSERT_TRUE(replay[i].agents[1].ghost);
      for (std::size_t t = 0; t < spec.duration_steps; ++t) {
        const auto& f = pb->trials[i].frames[t];
        const auto& r = replay[i].agents[1].steps[t];
        ASSERT_EQ(r.center, f.center);
        ASSERT_EQ(r.heading, f.heading);
        ASSERT_EQ(r.emission, f.emission);
        ASSERT_TRUE(std::isnan(r.neural[0]));
      }
    }
  }
}

TEST(Ghost, CollisionCaseIsBitExact) {
  TrialSpec spec = short_spec(800);
  spec.initial_distance = 12.0;
  const AgentParams left = charger(), right = crawler();
  TrialTrace trace;
  trace.spec = spec;
  run_trial_interactive(left, right, spec, TraceRecorder(trace, 2));
  const auto pb = to_playback(trace, 1);
  TrialTrace replay;
  replay.spec = spec;
  run_trial_ghost(left, pb, spec, TraceRecorder(replay, 2, 1));
  EXPECT_EQ(replay.agents[0].steps, trace.agents[0].steps);
}

TEST(Ghost, TranslatedPlaybackAndLengthCheck) {
  const auto g = random_pair_genotype(6);
  const auto spec = short_spec(300);
  const auto traces = record(g, Condition::Interactive, spec);
  const auto pbt = to_playback(traces[0], 1);
  TrialTrace moved;
  moved.spec = with_angle(spec, std::numbers::pi);
  run_trial_ghost(genome::decode<3>(g)[0], pbt, moved.spec, TraceRecorder(moved, 2, 1));
  const Vec2 offset = polar(20.0, std::numbers::pi) - pbt.start;
  for (std::size_t t = 0; t < 300; ++t) {
    EXPECT_NEAR(moved.agents[1].steps[t].center.x, pbt.frames[t].center.x + offset.x, 1e-12);
    EXPECT_NEAR(moved.agents[1].steps[t].center.y, pbt.frames[t].center.y + offset.y, 1e-12);
  }
  EXPECT_THROW(run_trial_ghost(genome::decode<3>(g)[0], pbt, short_spec(301), [](auto, auto, const auto&) {}),
               std::invalid_argument);
}

TEST(Isolated, ZeroRecurrenceConvergesToClosedForm) {
  AgentParams p;
  p.sensor = {2.0, 0.5};
  p.ctrnn.tau = 1.5;
  p.ctrnn.bias = 0.37;
  p.actuator.gain = 2.0;
  TrialSpec spec = short_spec(5000);
  TrialTrace trace;
  trace.spec = spec;
  run_trial_isolated(p, spec, TraceRecorder(trace, 1));
  ASSERT_EQ(trace.agents.size(), 1u);
  const auto& last = trace.agents[0].steps.back().neural;
  for (double v : last) EXPECT_NEAR(v, neural::sigmoid(0.37), 1e-12);

  EvaluationSetup setup{Condition::Isolated, spec, nullptr, 2000};
  std::vector<TrialTrace> four(4, trace);
  for (std::size_t i = 0; i < 4; ++i) four[i].trial_index = i;
  EXPECT_EQ(trial_set_entropy(four, 0, 2000), 0.0);
}

TEST(Evaluate, ConstantAgentScoresZero) {
  // Genes chosen so all weights vanish: weight genes 0, biases give a constant output.
  genome::Genotype g{std::vector<double>(30, 0.0)};
  EvaluationSetup setup{Condition::Isolated, short_spec(400), nullptr, 0};
  EXPECT_EQ(evaluate(g, setup).fitness, 0.0);
}

TEST(Evaluate, InteractiveIsMeanOfRecomputedEntropies) {
  const auto g = random_pair_genotype(8);
  const auto spec = short_spec(1500);
  EvaluationSetup setup{Condition::Interactive, spec, nullptr, 0};
  const auto e = evaluate(g, setup);
  const auto traces = record(g, Condition::Interactive, spec);
  double sum = 0;
  for (std::size_t a = 0; a < 2; ++a) {
    std::vector<long> labels;
    for (const auto& t : traces)
      for (const auto& s : t.agents[a].steps) {
        auto b = [](double x) { return std::min(static_cast<long>(std::floor(x * 100.0)), 99L); };
        labels.push_back(b(s.neural[0]) * 10000 + b(s.neural[1]) * 100 + b(s.neural[2]));
      }
    const double h = oracle::entropy_of_labels(labels) / std::log(1e6);
    EXPECT_NEAR(e.agent_entropy[a], h, 1e-12);
    EXPECT_NEAR(trial_set_entropy(traces, a), h, 1e-12);
    sum += h;
  }
  EXPECT_NEAR(e.fitness, sum / 2, 1e-12);
}

TEST(Evaluate, IdenticalAgentsGiveTheirEntropy) {
  auto g = random_pair_genotype(9, 1);
  auto twin = g;
  twin.genes.insert(twin.genes.end(), g.genes.begin(), g.genes.end());
  const auto e = evaluate(twin, {Condition::Interactive, short_spec(500), nullptr, 0});
  // Symmetric pair at angle 0 is not a mirror image, so only the mean identity is checked.
  EXPECT_DOUBLE_EQ(e.fitness, (e.agent_entropy[0] + e.agent_entropy[1]) / 2);
}

TEST(Evaluate, TrialSetPoolingOrderIndependent) {
  const auto traces = record(random_pair_genotype(10), Condition::Interactive, short_spec(400));
  std::vector<TrialTrace> reversed(traces.rbegin(), traces.rend());
  EXPECT_NEAR(trial_set_entropy(traces, 0), trial_set_entropy(reversed, 0), 1e-15);
  EXPECT_THROW(trial_set_entropy(std::span(traces).first(3), 0), std::invalid_argument);
}

TEST(Evaluate, WrongLengthOrMissingPlayback) {
  EXPECT_THROW(evaluate(random_pair_genotype(1, 1), {Condition::Interactive, short_spec(10), nullptr, 0}),
               std::invalid_argument);
  EXPECT_THROW(evaluate(random_pair_genotype(1, 1), {Condition::GhostEvolution, short_spec(10), nullptr, 0}),
               std::invalid_argument);
}

TEST(GhostTest, AnglesDifferAndRepeatable) {
  const auto g = random_pair_genotype(11);
  const auto spec = short_spec(500);
  const auto pb = extract_playback(record(g, Condition::Interactive, spec), 1);
  const auto live = genome::decode<3>(g)[0];
  genome::Rng r1(42), r2(42);
  const auto a = ghost_test(live, pb, spec, r1);
  const auto b = ghost_test(live, pb, spec, r2);
  ASSERT_EQ(a.trials.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NE(a.trials[i].test_angle, a.trials[i].recorded_angle);
    EXPECT_EQ(a.trials[i].test_angle, b.trials[i].test_angle);
    EXPECT_EQ(a.trials[i].live_entropy, b.trials[i].live_entropy);
    EXPECT_EQ(a.traces[i].agents[1].steps.size(), 500u);
  }
  EXPECT_EQ(a.pooled_entropy, b.pooled_entropy);
}

TEST(GhostTest, OtherAngleNeverRecorded) {
  genome::Rng rng(0);
  std::array<int, 4> seen{};
  for (int k = 0; k < 4000; ++k) {
    const std::size_t rec = k % 4;
    const std::size_t pick = other_angle_index(rec, rng);
    ASSERT_NE(pick, rec);
    ASSERT_LT(pick, 4u);
    ++seen[pick];
  }
  for (int c : seen) EXPECT_GT(c, 800);
}
