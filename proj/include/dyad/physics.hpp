#pragma once

// Kinematics of circular two-wheeled agents, acoustic attenuation and
// point-elastic collisions in an unbounded plane.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "dyad/vec2.hpp"

namespace dyad::physics {

inline constexpr double kBodyRadius = 4.0;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSensorOffset = std::numbers::pi / 4.0;
inline constexpr double kMinShadowFactor = 0.1;

// Wraps an angle into [0, 2pi).
inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;  // -tiny + 2pi rounds up to 2pi
  return a;
}

struct BodyPose {
  Vec2 center;
  double heading = 0.0;  // radians, [0, 2pi)
  Vec2 velocity;
  double radius = kBodyRadius;

  friend bool operator==(const BodyPose&, const BodyPose&) = default;
};

struct SensorGeometry {
  Vec2 left;
  Vec2 right;
};

// Which distance decides whether a receiver sits on the full-strength plateau.
enum class PlateauMode {
  EmitterToSensor,  // the same distance the inverse-square rolloff uses
  CenterToCenter,
};

inline SensorGeometry sensor_positions(const BodyPose& pose) {
  return {pose.center + polar(pose.radius, pose.heading + kSensorOffset),
          pose.center + polar(pose.radius, pose.heading - kSensorOffset)};
}

// Full strength up to `plateau` (2R by default), inverse-square beyond it.
// The two branches meet at d == plateau.
inline double attenuate(double strength, double d, double plateau = 2.0 * kBodyRadius) {
  if (d <= plateau) return strength;
  const double ratio = plateau / d;
  return strength * ratio * ratio;
}

inline double distance_attenuation(const Vec2& source, const Vec2& sensor, double strength,
                                   double plateau = 2.0 * kBodyRadius) {
  return attenuate(strength, distance(source, sensor), plateau);
}

/// Length of the part of the segment source -> sensor that runs through the
/// open disc of `body`. Always within [0, 2R].
inline double shielded_distance(const Vec2& source, const Vec2& sensor, const BodyPose& body) {
  const Vec2 d = sensor - source;
  const Vec2 f = source - body.center;
  const double a = squared_norm(d);
  if (a == 0.0) return 0.0;
  const double b = 2.0 * dot(f, d);
  const double c = squared_norm(f) - body.radius * body.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc <= 0.0) return 0.0;
  const double root = std::sqrt(disc);
  const double t_in = std::max((-b - root) / (2.0 * a), 0.0);
  const double t_out = std::min((-b + root) / (2.0 * a), 1.0);
  if (t_out <= t_in) return 0.0;
  return std::clamp((t_out - t_in) * std::sqrt(a), 0.0, 2.0 * body.radius);
}

// Linear from 1 (nothing shielded) down to 0.1 (a full diameter shielded).
inline double shadow_factor(double shielded, double radius = kBodyRadius) {
  const double diameter = 2.0 * radius;
  if (!(shielded >= 0.0 && shielded <= diameter)) {
    throw std::domain_error("shadow_factor: shielded distance outside [0, 2R]");
  }
  // Anchored at the floor so both ends come out exact in floating point.
  return kMinShadowFactor + (1.0 - kMinShadowFactor) * (1.0 - shielded / diameter);
}

inline double sensory_input(const Vec2& source, double strength, const Vec2& sensor,
                            const BodyPose& body,
                            PlateauMode mode = PlateauMode::EmitterToSensor) {
  if (strength == 0.0) return 0.0;
  const double plateau = 2.0 * body.radius;
  const double d = distance(source, sensor);
  double received;
  if (mode == PlateauMode::EmitterToSensor) {
    received = attenuate(strength, d, plateau);
  } else {
    received = distance(source, body.center) <= plateau
                   ? strength
                   : std::min(strength, attenuate(strength, d, plateau));
  }
  return received * shadow_factor(shielded_distance(source, sensor, body), body.radius);
}

// Sets heading and translational velocity from the motor command without
// moving the body.
inline BodyPose steer(BodyPose pose, double linear_v, double angular_v, double dt) {
  pose.heading = wrap_angle(pose.heading + angular_v * dt);
  pose.velocity = {linear_v * std::cos(pose.heading), linear_v * std::sin(pose.heading)};
  return pose;
}

inline BodyPose advance(BodyPose pose, double dt) {
  pose.center += pose.velocity * dt;
  return pose;
}

/// Explicit Euler step: heading first, then translation along the new heading.
inline BodyPose step_motion(const BodyPose& pose, double linear_v, double angular_v, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_motion: dt must be positive");
  return advance(steer(pose, linear_v, angular_v, dt), dt);
}

inline bool overlapping(const Vec2& a, const Vec2& b, double radius_a = kBodyRadius,
                        double radius_b = kBodyRadius) {
  const double reach = radius_a + radius_b;
  return squared_norm(a - b) < reach * reach;
}

// Point-elastic contact: overlapping bodies exchange velocity vectors.
// Headings are left alone.
inline std::pair<BodyPose, BodyPose> resolve_collision(BodyPose a, BodyPose b) {
  if (overlapping(a.center, b.center, a.radius, b.radius)) std::swap(a.velocity, b.velocity);
  return {a, b};
}

}  // namespace dyad::physics
