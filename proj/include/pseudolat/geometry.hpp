#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "pseudolat/types.hpp"

namespace pseudolat {

struct CircularPath {
  Position3 center;  // center.z is the flight altitude
  double radius = 0.0;
  double angular_speed = 0.0;  // rad/s
  double phase0 = 0.0;         // rad
};

struct LinearPath {
  Position3 start;
  Position3 velocity;  // m/s, level flight
};

// Level anchor path. Immutable once constructed; the factories validate.
class TrajectorySpec {
 public:
  enum class Kind { Circular, Linear };

  static TrajectorySpec circular(const Position3& center, double radius, double angular_speed,
                                 double phase0 = 0.0);
  static TrajectorySpec linear(const Position3& start, const Position3& velocity);

  Kind kind() const { return path_.index() == 0 ? Kind::Circular : Kind::Linear; }
  bool is_circular() const { return kind() == Kind::Circular; }

  // Throws UnsupportedOperation when the kind does not match.
  const CircularPath& as_circular() const;
  const LinearPath& as_linear() const;

  Position3 position_at(double t) const;
  double speed() const;

 private:
  explicit TrajectorySpec(std::variant<CircularPath, LinearPath> path) : path_(std::move(path)) {}
  std::variant<CircularPath, LinearPath> path_;
};

// Time-stamped positions; t strictly increasing, |t| == |p| >= 1.
class WaypointSeries {
 public:
  WaypointSeries(std::vector<double> t, std::vector<Position3> p);

  std::size_t size() const { return t_.size(); }
  const std::vector<double>& times() const { return t_; }
  const std::vector<Position3>& positions() const { return p_; }
  double t(std::size_t k) const { return t_[k]; }
  const Position3& p(std::size_t k) const { return p_[k]; }

 private:
  std::vector<double> t_;
  std::vector<Position3> p_;
};

// Samples t_k = t0 + k*dt for k in [0, n).
WaypointSeries sample_trajectory(const TrajectorySpec& spec, double t0, double dt, std::size_t n);

// 2*pi / angular_speed. Linear specs throw UnsupportedOperation.
double revolution_period(const TrajectorySpec& spec);

// Reflection of `target` across the vertical plane containing the line. The image has the same
// distance to every point of the line, which is why a straight flight path cannot tell the two
// apart. `line_dir` must be a unit vector with no vertical component.
Position3 mirror_point(const Position3& line_point, const Position3& line_dir, const Position3& target);

double distance(const Position3& a, const Position3& b);

}  // namespace pseudolat
