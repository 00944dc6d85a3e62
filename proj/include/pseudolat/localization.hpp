#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pseudolat/geometry.hpp"
#include "pseudolat/ranging.hpp"
#include "pseudolat/types.hpp"

namespace pseudolat {

struct AnchorRange {
  Position3 anchor;
  double d = 0.0;
};

// Axis-aligned search region. A zero-width axis pins that coordinate (min.z == max.z gives the
// known-altitude 2D problem).
struct Bounds {
  Position3 min{-500.0, -500.0, 0.0};
  Position3 max{500.0, 500.0, 10.0};

  bool fixed_z() const { return min.z == max.z; }
  Position3 clamp(const Position3& p) const;
};

struct SolveOptions {
  int max_iter = 200;
  double grad_tol = 1e-9;   // projected gradient norm of residual_sum, relative to max(1, cost)
  double step_tol = 1e-12;  // relative step size
  std::array<int, 3> multistart_grid{5, 5, 1};
  double damping0 = 1e-3;
  Bounds bounds;

  // Two minima are reported as ambiguous when their residuals agree within
  // rel * best + abs and they are more than `separation` meters apart.
  double ambiguity_residual_rel = 0.01;
  double ambiguity_residual_abs = 1e-9;
  double ambiguity_separation = 1.0;

  // Optional Huber down-weighting: residuals beyond huber_k * (huber_sigma0 + huber_eta * d) get
  // linear instead of quadratic cost. huber_k == 0 keeps plain least squares.
  double huber_k = 0.0;
  double huber_sigma0 = 1.0;
  double huber_eta = 0.01;

  // Starts tried in addition to the grid (warm starts).
  std::vector<Position3> extra_starts;
  bool use_grid = true;

  void validate() const;
};

struct Alternate {
  Position3 p;
  double residual = 0.0;
};

struct Solution {
  Position3 p_hat;
  double residual = 0.0;  // residual_sum at p_hat, m^2
  bool converged = false;
  std::vector<Alternate> alternates;  // residual-equivalent distinct minima, sorted by residual
  int iterations = 0;
};

// sum_k (|candidate - anchor_k| - d_k)^2
double residual_sum(const Position3& candidate, std::span<const AnchorRange> ranges);
// Gradient of residual_sum with respect to the candidate position.
Position3 residual_gradient(const Position3& candidate, std::span<const AnchorRange> ranges);

// Classical multilateration from fixed anchors. Requires >= 4 non-coplanar anchors, or >= 3
// non-collinear anchors when the bounds pin z. Throws GeometryError otherwise.
Solution multilaterate(std::span<const AnchorRange> ranges, const SolveOptions& opts);

// Single moving anchor, static target: every (anchor_k, d_k) acts as a separate anchor. Collinear
// anchor paths are accepted; the mirror solution then shows up in `alternates`.
Solution pseudo_multilaterate_static(std::span<const RangeMeasurement> meas, const SolveOptions& opts);

// Moving target. Exact minimization of the consecutive-estimate distances is intractable, so the
// track is built from sliding-window static solves (window, stride), each warm-started at the
// previous window's estimate. One estimate per window, stamped at the window's mid time.
WaypointSeries pseudo_multilaterate_moving(std::span<const RangeMeasurement> meas, std::size_t window,
                                           std::size_t stride, const SolveOptions& opts);

struct CrlbResult {
  Eigen::Matrix3d covariance;  // m^2; pseudo-inverse of the Fisher information if rank deficient
  int rank = 3;
  bool rank_deficient = false;

  double trace() const { return covariance.trace(); }
};

// Inverse Fisher information J = sum_k u_k u_k^T / sigma_k^2 with u_k the unit vector from the
// target to anchor k and sigma_k = sigma_fn(distance).
CrlbResult crlb(std::span<const Position3> anchors, const Position3& target,
                const std::function<double(double)>& sigma_fn);

std::vector<AnchorRange> to_anchor_ranges(std::span<const RangeMeasurement> meas);

}  // namespace pseudolat
