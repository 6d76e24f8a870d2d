#pragma once

// Trial execution for the coupling conditions: two live agents, a live agent
// facing a recorded ghost, or a lone agent with no input.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "dyad/entropy.hpp"
#include "dyad/neural.hpp"
#include "dyad/physics.hpp"
#include "dyad/vec2.hpp"

namespace dyad::experiments {

inline constexpr std::size_t kNeurons = 3;
inline constexpr std::size_t kTrials = 4;
inline constexpr std::array<double, kTrials> kTrialAngles = {
    0.0, std::numbers::pi / 2.0, std::numbers::pi, 3.0 * std::numbers::pi / 2.0};

using AgentParams = neural::AgentParams<kNeurons>;
using Controller = neural::Controller<kNeurons>;
using NeuralOutputs = std::array<double, kNeurons>;

enum class Condition { Interactive, GhostTest, GhostEvolution, Isolated };

inline std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::Interactive: return "interactive";
    case Condition::GhostTest: return "ghost-test";
    case Condition::GhostEvolution: return "ghost-evolution";
    case Condition::Isolated: return "isolated";
  }
  return "unknown";
}

inline Condition parse_condition(std::string_view s) {
  for (auto c : {Condition::Interactive, Condition::GhostTest, Condition::GhostEvolution, Condition::Isolated}) {
    if (s == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown condition '" + std::string(s) + "'");
}

// Agents evolved as a pair carry two gene blocks; everything else carries one.
inline std::size_t agents_per_genotype(Condition c) { return c == Condition::Interactive ? 2 : 1; }

struct TrialSpec {
  double initial_distance = 20.0;
  double relative_angle = 0.0;
  double initial_heading = 0.0;  // facing +x
  std::size_t duration_steps = 10000;
  double dt = 0.01;
  physics::PlateauMode plateau = physics::PlateauMode::EmitterToSensor;
};

inline TrialSpec with_angle(TrialSpec spec, double angle) {
  spec.relative_angle = angle;
  return spec;
}

// State of one agent after a step. `velocity` is the motor-derived velocity,
// before any collision exchange.
struct StepRecord {
  Vec2 center;
  double heading = 0.0;
  Vec2 velocity;
  NeuralOutputs neural{};
  double emission = 0.0;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct AgentTrack {
  bool ghost = false;  // replayed: neural outputs are NaN
  std::vector<StepRecord> steps;
};

struct TrialTrace {
  Condition condition = Condition::Interactive;
  TrialSpec spec;
  std::size_t trial_index = 0;
  std::vector<AgentTrack> agents;
};

struct GhostFrame {
  Vec2 center;
  double heading = 0.0;
  Vec2 velocity;  // motor-derived
  double emission = 0.0;

  friend bool operator==(const GhostFrame&, const GhostFrame&) = default;
};

struct PlaybackTrial {
  double relative_angle = 0.0;
  Vec2 start;
  double start_heading = 0.0;
  std::vector<GhostFrame> frames;
};

struct Playback {
  std::string source_run;
  std::int64_t generation = -1;
  std::size_t agent = 1;
  std::vector<PlaybackTrial> trials;
};

class TrialAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void validate(const TrialSpec& spec) {
  if (!(spec.initial_distance > 0.0)) throw std::invalid_argument("trial: initial distance must be positive");
  if (!(spec.dt > 0.0)) throw std::invalid_argument("trial: dt must be positive");
  if (spec.duration_steps == 0) throw std::invalid_argument("trial: duration must be at least one step");
}

/// First agent at the origin, second at (distance, angle) in polar
/// coordinates around it; both share the initial heading.
inline std::pair<physics::BodyPose, physics::BodyPose> place_agents(const TrialSpec& spec) {
  physics::BodyPose a, b;
  a.heading = b.heading = physics::wrap_angle(spec.initial_heading);
  b.center = polar(spec.initial_distance, spec.relative_angle);
  return {a, b};
}

inline neural::SensorVector sense(const physics::BodyPose& body, const Vec2& source, double strength,
                                  physics::PlateauMode mode) {
  const auto sensors = physics::sensor_positions(body);
  return {physics::sensory_input(source, strength, sensors.left, body, mode),
          physics::sensory_input(source, strength, sensors.right, body, mode)};
}

namespace detail {

inline physics::BodyPose drive(const physics::BodyPose& pose, const neural::ActuatorVector& m, double dt) {
  const auto v = neural::motors_to_velocities(m[neural::kMotorLeft], m[neural::kMotorRight], pose.radius);
  return physics::steer(pose, v.linear, v.angular, dt);
}

inline void check_finite(const physics::BodyPose& pose, const Controller& c, std::size_t step) {
  bool ok = is_finite(pose.center) && std::isfinite(pose.heading);
  for (double y : c.state()) ok = ok && std::isfinite(y);
  if (!ok) throw TrialAborted("non-finite agent state at step " + std::to_string(step));
}

inline constexpr NeuralOutputs kNoNeural = {std::numeric_limits<double>::quiet_NaN(),
                                            std::numeric_limits<double>::quiet_NaN(),
                                            std::numeric_limits<double>::quiet_NaN()};

}  // namespace detail

// Sinks receive (agent index, step index, record) after every step.
template <class Sink>
concept StepSink = requires(Sink& s, std::size_t agent, std::size_t step, const StepRecord& r) {
  s(agent, step, r);
};

/// Two live agents, each sensing the other's emission from the previous step.
template <StepSink Sink>
void run_trial_interactive(const AgentParams& a, const AgentParams& b, const TrialSpec& spec, Sink&& sink) {
  validate(spec);
  auto [pa, pb] = place_agents(spec);
  Controller ca(a), cb(b);
  double emit_a = 0.0, emit_b = 0.0;
  const double dt = spec.dt;

  for (std::size_t t = 0; t < spec.duration_steps; ++t) {
    const auto in_a = sense(pa, pb.center, emit_b, spec.plateau);
    const auto in_b = sense(pb, pa.center, emit_a, spec.plateau);
    const auto ma = ca.step(in_a, dt);
    const auto mb = cb.step(in_b, dt);
    pa = detail::drive(pa, ma, dt);
    pb = detail::drive(pb, mb, dt);
    const Vec2 motor_a = pa.velocity, motor_b = pb.velocity;
    std::tie(pa, pb) = physics::resolve_collision(pa, pb);
    pa = physics::advance(pa, dt);
    pb = physics::advance(pb, dt);
    emit_a = ma[neural::kEmitter];
    emit_b = mb[neural::kEmitter];
    detail::check_finite(pa, ca, t);
    detail::check_finite(pb, cb, t);
    sink(0, t, StepRecord{pa.center, pa.heading, motor_a, ca.outputs(), emit_a});
    sink(1, t, StepRecord{pb.center, pb.heading, motor_b, cb.outputs(), emit_b});
  }
}

/// Live agent against a replayed partner. The recording is rigidly
/// translated so that it starts at the placement `spec` asks for; the ghost
/// never senses and its path is never altered.
template <StepSink Sink>
void run_trial_ghost(const AgentParams& live, const PlaybackTrial& ghost, const TrialSpec& spec, Sink&& sink) {
  validate(spec);
  if (ghost.frames.size() != spec.duration_steps) {
    throw std::invalid_argument("ghost trial: playback has " + std::to_string(ghost.frames.size()) +
                                " steps, trial needs " + std::to_string(spec.duration_steps));
  }
  auto [pa, pb] = place_agents(spec);
  const Vec2 offset = pb.center - ghost.start;
  Controller ca(live);
  Vec2 ghost_center = pb.center;
  double ghost_emit = 0.0;
  const double dt = spec.dt;

  for (std::size_t t = 0; t < spec.duration_steps; ++t) {
    const GhostFrame& frame = ghost.frames[t];
    const auto in_a = sense(pa, ghost_center, ghost_emit, spec.plateau);
    const auto ma = ca.step(in_a, dt);
    pa = detail::drive(pa, ma, dt);
    const Vec2 motor_a = pa.velocity;
    if (physics::overlapping(pa.center, ghost_center, pa.radius, physics::kBodyRadius)) {
      pa.velocity = frame.velocity;
    }
    pa = physics::advance(pa, dt);
    detail::check_finite(pa, ca, t);

    ghost_center = frame.center + offset;
    ghost_emit = frame.emission;
    sink(0, t, StepRecord{pa.center, pa.heading, motor_a, ca.outputs(), ma[neural::kEmitter]});
    sink(1, t, StepRecord{ghost_center, frame.heading, frame.velocity, detail::kNoNeural, frame.emission});
  }
}

/// Lone agent: sensory input is zero on every step.
template <StepSink Sink>
void run_trial_isolated(const AgentParams& a, const TrialSpec& spec, Sink&& sink) {
  validate(spec);
  auto pa = place_agents(spec).first;
  Controller ca(a);
  const neural::SensorVector silence{0.0, 0.0};
  const double dt = spec.dt;

  for (std::size_t t = 0; t < spec.duration_steps; ++t) {
    const auto ma = ca.step(silence, dt);
    pa = physics::advance(detail::drive(pa, ma, dt), dt);
    detail::check_finite(pa, ca, t);
    sink(0, t, StepRecord{pa.center, pa.heading, pa.velocity, ca.outputs(), ma[neural::kEmitter]});
  }
}

// Records full traces.
class TraceRecorder {
 public:
  TraceRecorder(TrialTrace& trace, std::size_t agents, std::size_t ghost_index = SIZE_MAX) : trace_(trace) {
    trace_.agents.assign(agents, AgentTrack{});
    for (std::size_t i = 0; i < agents; ++i) {
      trace_.agents[i].ghost = i == ghost_index;
      trace_.agents[i].steps.reserve(trace_.spec.duration_steps);
    }
  }
  void operator()(std::size_t agent, std::size_t, const StepRecord& r) { trace_.agents[agent].steps.push_back(r); }

 private:
  TrialTrace& trace_;
};

// Feeds neural outputs of the first `agents` agents into one histogram each,
// skipping the first `burn_in` steps of every trial.
class HistogramSink {
 public:
  HistogramSink(std::span<entropy::Histogram3D> histograms, std::size_t burn_in = 0)
      : histograms_(histograms), burn_in_(burn_in) {}
  void operator()(std::size_t agent, std::size_t step, const StepRecord& r) {
    if (agent < histograms_.size() && step >= burn_in_) histograms_[agent].accumulate(r.neural);
  }

 private:
  std::span<entropy::Histogram3D> histograms_;
  std::size_t burn_in_;
};

/// One histogram over every step of all four trials of `agent`.
inline double trial_set_entropy(std::span<const TrialTrace> traces, std::size_t agent, std::size_t burn_in = 0) {
  if (traces.size() != kTrials) {
    throw std::invalid_argument("trial_set_entropy: expected " + std::to_string(kTrials) + " trials, got " +
                                std::to_string(traces.size()));
  }
  entropy::Histogram3D h;
  for (const auto& trace : traces) {
    if (agent >= trace.agents.size() || trace.agents[agent].ghost) {
      throw std::invalid_argument("trial_set_entropy: no live agent " + std::to_string(agent));
    }
    const auto& steps = trace.agents[agent].steps;
    for (std::size_t t = burn_in; t < steps.size(); ++t) h.accumulate(steps[t].neural);
  }
  return entropy::normalized_entropy(h).value;
}

inline PlaybackTrial to_playback(const TrialTrace& trace, std::size_t agent) {
  if (agent >= trace.agents.size()) throw std::invalid_argument("playback: trace has no agent " + std::to_string(agent));
  PlaybackTrial p;
  p.relative_angle = trace.spec.relative_angle;
  const auto [a, b] = place_agents(trace.spec);
  const auto& start = agent == 0 ? a : b;
  p.start = start.center;
  p.start_heading = start.heading;
  const auto& steps = trace.agents[agent].steps;
  p.frames.reserve(steps.size());
  for (const auto& s : steps) p.frames.push_back({s.center, s.heading, s.velocity, s.emission});
  return p;
}

inline Playback extract_playback(std::span<const TrialTrace> traces, std::size_t agent, std::string source_run = {},
                                 std::int64_t generation = -1) {
  Playback pb{std::move(source_run), generation, agent, {}};
  for (const auto& t : traces) pb.trials.push_back(to_playback(t, agent));
  return pb;
}

}  // namespace dyad::experiments
