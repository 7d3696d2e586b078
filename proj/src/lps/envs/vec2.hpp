#pragma once

#include <cmath>

namespace lps::envs {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::sqrt(x * x + y * y); }

  Vec2 normalized() const {
    const double n = norm();
    return n > 1e-12 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
  Vec2 clamped_norm(double max_norm) const {
    const double n = norm();
    return n > max_norm ? Vec2{x * max_norm / n, y * max_norm / n} : *this;
  }
  Vec2 perp() const { return {-y, x}; }
};

inline Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline Vec2 clamp01(const Vec2& v) {
  auto cl = [](double t) { return t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t); };
  return {cl(v.x), cl(v.y)};
}

}  // namespace lps::envs
