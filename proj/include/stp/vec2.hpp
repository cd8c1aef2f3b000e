#pragma once

#include <cmath>

namespace stp {

/// Plain 2D vector in table units.
struct Vec2 {
  double x{0.0};
  double y{0.0};

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  friend constexpr Vec2 operator*(double s, Vec2 v) { return {v.x * s, v.y * s}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }

  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
  /// z-component of the 3D cross product.
  constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  constexpr double norm2() const { return x * x + y * y; }
  Vec2 normalized() const { return *this / norm(); }
  /// Counterclockwise rotation by a quarter turn.
  constexpr Vec2 perp() const { return {-y, x}; }
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
};

/// Signed angle (radians, in (-pi, pi]) that rotates `from` onto `to`.
inline double signed_angle(Vec2 from, Vec2 to) {
  return std::atan2(from.cross(to), from.dot(to));
}

/// Mirror `v` across the line orthogonal to the unit normal `n`.
constexpr Vec2 reflect(Vec2 v, Vec2 n) { return v - n * (2.0 * v.dot(n)); }

}  // namespace stp
