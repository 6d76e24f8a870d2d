#pragma once

// Sensor layer -> fully recurrent CTRNN -> actuator layer.
//
// Two sensor nodes share one gain and bias, the N neurons share one time
// constant and bias, and the three actuators (left motor, right motor,
// emitter) share one gain and bias.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

namespace dyad::neural {

inline constexpr std::size_t kSensors = 2;
inline constexpr std::size_t kActuators = 3;

enum Actuator : std::size_t { kMotorLeft = 0, kMotorRight = 1, kEmitter = 2 };

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct SensorLayerParams {
  double gain = 1.0;
  double bias = 0.0;
};

template <std::size_t N>
struct CtrnnParams {
  double tau = 1.0;
  double bias = 0.0;
  std::array<std::array<double, N>, N> weights{};               // [to][from]
  std::array<std::array<double, kSensors>, N> sensor_weights{};  // [neuron][sensor]
};

template <std::size_t N>
struct ActuatorParams {
  double gain = 1.0;
  double bias = 0.0;
  std::array<std::array<double, kActuators>, N> weights{};  // [neuron][actuator]
};

template <std::size_t N>
using NeuralState = std::array<double, N>;

using SensorVector = std::array<double, kSensors>;
using ActuatorVector = std::array<double, kActuators>;

inline double sensor_output(double input, const SensorLayerParams& p) {
  return p.gain * sigmoid(input + p.bias);
}

template <std::size_t N>
NeuralState<N> neuron_outputs(const NeuralState<N>& y, const CtrnnParams<N>& p) {
  NeuralState<N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = sigmoid(y[i] + p.bias);
  return out;
}

namespace detail {

// Euler update given the already-evaluated firing rates of the current state.
template <std::size_t N>
NeuralState<N> euler_update(const NeuralState<N>& y, const NeuralState<N>& rates,
                            const SensorVector& sensor_out, const CtrnnParams<N>& p, double dt) {
  const double step = dt / p.tau;
  NeuralState<N> next;
  for (std::size_t i = 0; i < N; ++i) {
    double drive = -y[i];
    for (std::size_t j = 0; j < N; ++j) drive += p.weights[i][j] * rates[j];
    for (std::size_t s = 0; s < kSensors; ++s) drive += p.sensor_weights[i][s] * sensor_out[s];
    next[i] = y[i] + step * drive;
  }
  return next;
}

}  // namespace detail

template <std::size_t N>
NeuralState<N> ctrnn_step(const NeuralState<N>& y, const SensorVector& sensor_out,
                          const CtrnnParams<N>& p, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("ctrnn_step: dt must be positive");
  return detail::euler_update(y, neuron_outputs(y, p), sensor_out, p, dt);
}

template <std::size_t N>
ActuatorVector actuator_outputs(const NeuralState<N>& neuron_out, const ActuatorParams<N>& p) {
  ActuatorVector m;
  for (std::size_t a = 0; a < kActuators; ++a) {
    double net = p.bias;
    for (std::size_t n = 0; n < N; ++n) net += p.weights[n][a] * neuron_out[n];
    m[a] = p.gain * sigmoid(net);
  }
  return m;
}

struct BodyVelocity {
  double linear = 0.0;
  double angular = 0.0;  // counterclockwise positive
};

// Differential drive: mean of the motors moves forward, right-minus-left over
// the body radius turns.
inline BodyVelocity motors_to_velocities(double m_left, double m_right, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("motors_to_velocities: radius must be positive");
  return {(m_left + m_right) / 2.0, (m_right - m_left) / radius};
}

template <std::size_t N>
struct AgentParams {
  SensorLayerParams sensor;
  CtrnnParams<N> ctrnn;
  ActuatorParams<N> actuator;
};

// Stateful controller for one agent over one trial. Caches the firing rates
// of the current state so each step evaluates every sigmoid once.
template <std::size_t N>
class Controller {
 public:
  explicit Controller(const AgentParams<N>& params) : params_(params) { reset(); }

  void reset(const NeuralState<N>& y = {}) {
    state_ = y;
    rates_ = neuron_outputs(state_, params_.ctrnn);
  }

  // Advances the network one step on the raw sensory inputs and returns the
  // actuator outputs computed from the updated firing rates.
  ActuatorVector step(const SensorVector& inputs, double dt) {
    SensorVector sensed;
    for (std::size_t s = 0; s < kSensors; ++s) sensed[s] = sensor_output(inputs[s], params_.sensor);
    state_ = detail::euler_update(state_, rates_, sensed, params_.ctrnn, dt);
    rates_ = neuron_outputs(state_, params_.ctrnn);
    return actuator_outputs(rates_, params_.actuator);
  }

  const NeuralState<N>& state() const { return state_; }
  const NeuralState<N>& outputs() const { return rates_; }
  const AgentParams<N>& params() const { return params_; }

 private:
  AgentParams<N> params_;
  NeuralState<N> state_{};
  NeuralState<N> rates_{};
};

}  // namespace dyad::neural
