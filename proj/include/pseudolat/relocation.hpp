#pragma once

#include "pseudolat/geometry.hpp"

namespace pseudolat {

struct RelocationPolicy {
  double min_radius = 20.0;        // m, standoff floor
  double shrink_factor = 0.7;      // radius multiplier per relocation, (0, 1]
  double max_center_step = 100.0;  // m per relocation
  double altitude = 100.0;         // m

  void validate() const;
};

// Constant-velocity extrapolation from the last two history points, `horizon` seconds past the
// last one. A single point is returned unchanged.
Position3 predict_target(const WaypointSeries& history, double horizon);

// Next circle after a revolution: the center moves toward the prediction (at policy altitude) by at
// most max_center_step, the radius shrinks geometrically down to min_radius, and phase0 is chosen
// so that at `t_resume` the anchor sits on the point of the new circle nearest to where the old
// circle had it.
TrajectorySpec relocate(const TrajectorySpec& current, const Position3& predicted, const RelocationPolicy& policy,
                        double t_resume);

}  // namespace pseudolat
