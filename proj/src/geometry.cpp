#include "pseudolat/geometry.hpp"

#include <cmath>
#include <string>

#include "pseudolat/errors.hpp"

namespace pseudolat {

TrajectorySpec TrajectorySpec::circular(const Position3& center, double radius, double angular_speed,
                                        double phase0) {
  if (!center.finite() || !std::isfinite(radius) || !std::isfinite(angular_speed) ||
      !std::isfinite(phase0)) {
    throw InvalidArgument("circular trajectory: non-finite parameter");
  }
  if (radius <= 0.0) throw InvalidArgument("circular trajectory: radius must be > 0");
  if (angular_speed <= 0.0) throw InvalidArgument("circular trajectory: angular_speed must be > 0");
  if (center.z < 0.0) throw InvalidArgument("circular trajectory: altitude must be >= 0");
  return TrajectorySpec(CircularPath{center, radius, angular_speed, phase0});
}

TrajectorySpec TrajectorySpec::linear(const Position3& start, const Position3& velocity) {
  if (!start.finite() || !velocity.finite()) {
    throw InvalidArgument("linear trajectory: non-finite parameter");
  }
  if (velocity.norm() <= 0.0) throw InvalidArgument("linear trajectory: velocity must be nonzero");
  if (velocity.z != 0.0) throw InvalidArgument("linear trajectory: flight must be level (velocity.z = 0)");
  if (start.z < 0.0) throw InvalidArgument("linear trajectory: altitude must be >= 0");
  return TrajectorySpec(LinearPath{start, velocity});
}

const CircularPath& TrajectorySpec::as_circular() const {
  if (const auto* c = std::get_if<CircularPath>(&path_)) return *c;
  throw UnsupportedOperation("operation requires a circular trajectory");
}

const LinearPath& TrajectorySpec::as_linear() const {
  if (const auto* l = std::get_if<LinearPath>(&path_)) return *l;
  throw UnsupportedOperation("operation requires a linear trajectory");
}

Position3 TrajectorySpec::position_at(double t) const {
  if (const auto* c = std::get_if<CircularPath>(&path_)) {
    const double a = c->phase0 + c->angular_speed * t;
    return c->center + Position3{c->radius * std::cos(a), c->radius * std::sin(a), 0.0};
  }
  const auto& l = std::get<LinearPath>(path_);
  return l.start + l.velocity * t;
}

double TrajectorySpec::speed() const {
  if (const auto* c = std::get_if<CircularPath>(&path_)) return c->radius * c->angular_speed;
  return std::get<LinearPath>(path_).velocity.norm();
}

WaypointSeries::WaypointSeries(std::vector<double> t, std::vector<Position3> p)
    : t_(std::move(t)), p_(std::move(p)) {
  if (t_.empty()) throw InvalidArgument("waypoint series must contain at least one point");
  if (t_.size() != p_.size()) throw InvalidArgument("waypoint series: |t| != |p|");
  for (std::size_t k = 0; k < t_.size(); ++k) {
    if (!std::isfinite(t_[k]) || !p_[k].finite()) {
      throw InvalidArgument("waypoint series: non-finite entry at index " + std::to_string(k));
    }
    if (k > 0 && !(t_[k] > t_[k - 1])) {
      throw InvalidArgument("waypoint series: times must be strictly increasing");
    }
  }
}

WaypointSeries sample_trajectory(const TrajectorySpec& spec, double t0, double dt, std::size_t n) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("sample_trajectory: dt must be > 0");
  if (n == 0) throw InvalidArgument("sample_trajectory: n must be >= 1");
  std::vector<double> t(n);
  std::vector<Position3> p(n);
  for (std::size_t k = 0; k < n; ++k) {
    t[k] = t0 + static_cast<double>(k) * dt;
    p[k] = spec.position_at(t[k]);
  }
  return WaypointSeries(std::move(t), std::move(p));
}

double revolution_period(const TrajectorySpec& spec) {
  if (!spec.is_circular()) throw UnsupportedOperation("revolution_period: linear trajectory has no period");
  return 2.0 * kPi / spec.as_circular().angular_speed;
}

Position3 mirror_point(const Position3& line_point, const Position3& line_dir, const Position3& target) {
  if (std::abs(line_dir.norm() - 1.0) > 1e-9) throw InvalidArgument("mirror_point: direction must be a unit vector");
  if (std::abs(line_dir.z) > 1e-12) throw InvalidArgument("mirror_point: direction must be horizontal");
  const Position3 normal{-line_dir.y, line_dir.x, 0.0};
  const double offset = dot(target - line_point, normal);
  return target - normal * (2.0 * offset);
}

double distance(const Position3& a, const Position3& b) { return (a - b).norm(); }

}  // namespace pseudolat
