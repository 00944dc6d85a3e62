#include "pseudolat/relocation.hpp"

#include <algorithm>
#include <cmath>

#include "pseudolat/errors.hpp"

namespace pseudolat {

void RelocationPolicy::validate() const {
  if (!(min_radius > 0.0)) throw InvalidArgument("relocation: min_radius must be > 0");
  if (!(shrink_factor > 0.0 && shrink_factor <= 1.0)) throw InvalidArgument("relocation: shrink_factor must be in (0, 1]");
  if (!(max_center_step > 0.0)) throw InvalidArgument("relocation: max_center_step must be > 0");
  if (!(altitude >= 0.0) || !std::isfinite(altitude)) throw InvalidArgument("relocation: altitude must be >= 0");
}

Position3 predict_target(const WaypointSeries& history, double horizon) {
  const std::size_t n = history.size();
  if (n == 1) return history.p(0);
  const Position3 velocity = (history.p(n - 1) - history.p(n - 2)) / (history.t(n - 1) - history.t(n - 2));
  return history.p(n - 1) + velocity * horizon;
}

TrajectorySpec relocate(const TrajectorySpec& current, const Position3& predicted, const RelocationPolicy& policy,
                        double t_resume) {
  policy.validate();
  const CircularPath& c = current.as_circular();
  if (!predicted.finite()) throw InvalidArgument("relocate: predicted position is not finite");

  const Position3 center{c.center.x, c.center.y, policy.altitude};
  const Position3 goal{predicted.x, predicted.y, policy.altitude};
  const Position3 offset = goal - center;
  const double gap = offset.norm();
  const Position3 new_center = gap <= policy.max_center_step ? goal : center + offset * (policy.max_center_step / gap);
  const double new_radius = std::max(policy.min_radius, c.radius * policy.shrink_factor);

  const Position3 uav = current.position_at(t_resume);
  const Position3 rel = uav - new_center;
  const double bearing = (rel.x == 0.0 && rel.y == 0.0) ? c.phase0 + c.angular_speed * t_resume : std::atan2(rel.y, rel.x);
  return TrajectorySpec::circular(new_center, new_radius, c.angular_speed, bearing - c.angular_speed * t_resume);
}

}  // namespace pseudolat
