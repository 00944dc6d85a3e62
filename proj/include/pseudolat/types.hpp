#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace pseudolat {

using Rng = std::mt19937_64;

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

// Cartesian coordinates in meters.
struct Position3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Position3 operator+(const Position3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Position3 operator-(const Position3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Position3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Position3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr bool operator==(const Position3&) const = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static Position3 from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

constexpr Position3 operator*(double s, const Position3& p) { return p * s; }
constexpr double dot(const Position3& a, const Position3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

}  // namespace pseudolat
