#pragma once

#include <cmath>

namespace dyad {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend constexpr Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
  friend constexpr Vec2 operator*(const Vec2& v, double s) { return {s * v.x, s * v.y}; }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr double squared_norm(const Vec2& v) { return dot(v, v); }
inline double norm(const Vec2& v) { return std::sqrt(squared_norm(v)); }
inline double distance(const Vec2& a, const Vec2& b) { return norm(a - b); }

inline Vec2 polar(double radius, double angle) {
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

inline bool is_finite(const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); }

}  // namespace dyad
