#include "pseudolat/localization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <Eigen/Dense>

#include "pseudolat/errors.hpp"

namespace pseudolat {

Position3 Bounds::clamp(const Position3& p) const {
  return {std::clamp(p.x, min.x, max.x), std::clamp(p.y, min.y, max.y), std::clamp(p.z, min.z, max.z)};
}

void SolveOptions::validate() const {
  if (max_iter < 1) throw InvalidArgument("solve options: max_iter must be >= 1");
  if (!(grad_tol > 0.0) || !(step_tol > 0.0)) throw InvalidArgument("solve options: tolerances must be > 0");
  if (multistart_grid[0] < 1 || multistart_grid[1] < 1 || multistart_grid[2] < 1) {
    throw InvalidArgument("solve options: multistart grid must be >= 1 per axis");
  }
  if (!(damping0 > 0.0)) throw InvalidArgument("solve options: damping0 must be > 0");
  if (!bounds.min.finite() || !bounds.max.finite() || bounds.min.x > bounds.max.x || bounds.min.y > bounds.max.y ||
      bounds.min.z > bounds.max.z) {
    throw InvalidArgument("solve options: bounds min must be <= max");
  }
  if (!(ambiguity_residual_rel >= 0.0) || !(ambiguity_residual_abs >= 0.0) || !(ambiguity_separation > 0.0)) {
    throw InvalidArgument("solve options: invalid ambiguity thresholds");
  }
  if (!(huber_k >= 0.0)) throw InvalidArgument("solve options: huber_k must be >= 0");
  if (!use_grid && extra_starts.empty()) throw InvalidArgument("solve options: no start points");
}

double residual_sum(const Position3& candidate, std::span<const AnchorRange> ranges) {
  if (ranges.empty()) throw InvalidArgument("residual_sum: no ranges");
  double s = 0.0;
  for (const auto& r : ranges) {
    const double e = distance(candidate, r.anchor) - r.d;
    s += e * e;
  }
  return s;
}

Position3 residual_gradient(const Position3& candidate, std::span<const AnchorRange> ranges) {
  if (ranges.empty()) throw InvalidArgument("residual_gradient: no ranges");
  Position3 g;
  for (const auto& r : ranges) {
    const Position3 diff = candidate - r.anchor;
    const double n = diff.norm();
    if (n == 0.0) continue;
    g = g + diff * (2.0 * (n - r.d) / n);
  }
  return g;
}

std::vector<AnchorRange> to_anchor_ranges(std::span<const RangeMeasurement> meas) {
  std::vector<AnchorRange> out;
  out.reserve(meas.size());
  for (const auto& m : meas) out.push_back({m.anchor, m.d_meas});
  return out;
}

namespace {

struct LocalMinimum {
  Position3 p;
  double residual = 0.0;
  bool converged = false;
  int iterations = 0;
};

double huber_weight(double r, double d, const SolveOptions& o) {
  if (o.huber_k <= 0.0) return 1.0;
  const double delta = o.huber_k * (o.huber_sigma0 + o.huber_eta * d);
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

// Weighted objective, residual vector and Jacobian at p.
struct Linearization {
  double cost = 0.0;
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();  // gradient of the cost
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();  // J^T W J
};

Linearization linearize(const Position3& p, std::span<const AnchorRange> ranges, const SolveOptions& o) {
  Linearization lin;
  for (const auto& r : ranges) {
    const Position3 diff = p - r.anchor;
    const double n = diff.norm();
    const double e = n - r.d;
    const double w = huber_weight(e, r.d, o);
    lin.cost += w * e * e;
    if (n == 0.0) continue;
    const Eigen::Vector3d u = diff.vec() / n;
    lin.grad += 2.0 * w * e * u;
    lin.normal += w * u * u.transpose();
  }
  return lin;
}

double weighted_cost(const Position3& p, std::span<const AnchorRange> ranges, const SolveOptions& o) {
  double s = 0.0;
  for (const auto& r : ranges) {
    const double e = distance(p, r.anchor) - r.d;
    s += huber_weight(e, r.d, o) * e * e;
  }
  return s;
}

// Axes that may move: not pinned, and not pressed against a bound by the descent direction.
std::array<bool, 3> free_axes(const Position3& p, const Eigen::Vector3d& grad, const Bounds& b) {
  const std::array<double, 3> v{p.x, p.y, p.z};
  const std::array<double, 3> lo{b.min.x, b.min.y, b.min.z};
  const std::array<double, 3> hi{b.max.x, b.max.y, b.max.z};
  std::array<bool, 3> f{};
  for (int i = 0; i < 3; ++i) {
    f[i] = lo[i] < hi[i] && !(v[i] <= lo[i] && grad[i] > 0.0) && !(v[i] >= hi[i] && grad[i] < 0.0);
  }
  return f;
}

double projected_norm(const Eigen::Vector3d& g, const std::array<bool, 3>& f) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (f[i]) s += g[i] * g[i];
  }
  return std::sqrt(s);
}

// Gradient test scaled by the cost: with nonzero residuals the cost is only known to a few ulps,
// which bounds how small the gradient can be driven. A stalled iteration (no step improves the
// cost) is accepted at a looser, rounding-limited tolerance.
bool gradient_converged(double grad_norm, double cost, double grad_tol, bool stalled) {
  const double scale = std::max(1.0, cost);
  return grad_norm < grad_tol * scale || (stalled && grad_norm < 1e-6 * scale);
}

// Projected Levenberg-Marquardt from one start point.
LocalMinimum local_solve(const Position3& start, std::span<const AnchorRange> ranges, const SolveOptions& o) {
  Position3 p = o.bounds.clamp(start);
  double lambda = o.damping0;
  LocalMinimum out;
  int it = 0;
  for (; it < o.max_iter; ++it) {
    const Linearization lin = linearize(p, ranges, o);
    const auto f = free_axes(p, lin.grad, o.bounds);
    if (gradient_converged(projected_norm(lin.grad, f), lin.cost, o.grad_tol, false)) {
      out.converged = true;
      break;
    }
    bool stepped = false;
    bool tiny_step = false;
    while (lambda < 1e16) {
      Eigen::Matrix3d a = lin.normal;
      for (int i = 0; i < 3; ++i) a(i, i) += lambda * (lin.normal(i, i) + 1e-9);
      Eigen::Vector3d rhs = -0.5 * lin.grad;
      for (int i = 0; i < 3; ++i) {
        if (f[i]) continue;
        a.row(i).setZero();
        a.col(i).setZero();
        a(i, i) = 1.0;
        rhs[i] = 0.0;
      }
      const Eigen::Vector3d delta = a.ldlt().solve(rhs);
      const Position3 candidate = o.bounds.clamp(p + Position3::from(delta));
      const double step = (candidate - p).norm();
      const double cost = weighted_cost(candidate, ranges, o);
      if (cost <= lin.cost) {
        tiny_step = step <= o.step_tol * (1.0 + p.norm());
        p = candidate;
        lambda = std::max(lambda / 3.0, 1e-15);
        stepped = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!stepped || tiny_step) {
      const Linearization fin = linearize(p, ranges, o);
      out.converged = gradient_converged(projected_norm(fin.grad, free_axes(p, fin.grad, o.bounds)), fin.cost,
                                         o.grad_tol, true);
      break;
    }
  }
  if (it == o.max_iter) {
    const Linearization fin = linearize(p, ranges, o);
    out.converged = gradient_converged(projected_norm(fin.grad, free_axes(p, fin.grad, o.bounds)), fin.cost,
                                       o.grad_tol, false);
  }
  out.p = p;
  out.residual = residual_sum(p, ranges);
  out.iterations = it;
  return out;
}

std::vector<Position3> grid_starts(const SolveOptions& o) {
  std::vector<Position3> starts;
  if (!o.use_grid) return starts;
  auto axis = [](double lo, double hi, int n, int i) {
    if (n == 1) return lo;
    return lo + (hi - lo) * (static_cast<double>(i) + 0.5) / n;
  };
  const auto& g = o.multistart_grid;
  for (int i = 0; i < g[0]; ++i) {
    for (int j = 0; j < g[1]; ++j) {
      for (int k = 0; k < g[2]; ++k) {
        // A single horizontal layer sits on the lower z bound (ground level by default); a single
        // column in x or y sits at the center of the range.
        const double x = g[0] == 1 ? 0.5 * (o.bounds.min.x + o.bounds.max.x) : axis(o.bounds.min.x, o.bounds.max.x, g[0], i);
        const double y = g[1] == 1 ? 0.5 * (o.bounds.min.y + o.bounds.max.y) : axis(o.bounds.min.y, o.bounds.max.y, g[1], j);
        starts.push_back({x, y, axis(o.bounds.min.z, o.bounds.max.z, g[2], k)});
      }
    }
  }
  return starts;
}

Solution solve_multistart(std::span<const AnchorRange> ranges, const SolveOptions& o) {
  o.validate();
  std::vector<Position3> starts = o.extra_starts;
  const auto grid = grid_starts(o);
  starts.insert(starts.end(), grid.begin(), grid.end());

  std::vector<LocalMinimum> minima;
  minima.reserve(starts.size());
  for (const auto& s : starts) minima.push_back(local_solve(s, ranges, o));

  // Deterministic order: residual, then lexicographic position.
  std::sort(minima.begin(), minima.end(), [](const LocalMinimum& a, const LocalMinimum& b) {
    return std::tie(a.residual, a.p.x, a.p.y, a.p.z) < std::tie(b.residual, b.p.x, b.p.y, b.p.z);
  });

  std::vector<const LocalMinimum*> distinct;
  for (const auto& m : minima) {
    const bool is_new = std::none_of(distinct.begin(), distinct.end(), [&](const LocalMinimum* d) {
      return distance(d->p, m.p) <= o.ambiguity_separation;
    });
    if (is_new) distinct.push_back(&m);
  }

  const LocalMinimum& best = *distinct.front();
  Solution sol;
  sol.p_hat = best.p;
  sol.residual = best.residual;
  sol.converged = best.converged;
  sol.iterations = best.iterations;
  const double limit = best.residual * (1.0 + o.ambiguity_residual_rel) + o.ambiguity_residual_abs;
  for (std::size_t i = 1; i < distinct.size(); ++i) {
    if (distinct[i]->residual <= limit) sol.alternates.push_back({distinct[i]->p, distinct[i]->residual});
  }
  return sol;
}

// Ratio of the smallest to the largest eigenvalue of the anchors' scatter matrix (restricted to
// `dims` leading coordinates).
double spread_ratio(std::span<const AnchorRange> ranges, int dims) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& r : ranges) mean += r.anchor.vec();
  mean /= static_cast<double>(ranges.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& r : ranges) {
    const Eigen::Vector3d d = r.anchor.vec() - mean;
    scatter += d * d.transpose();
  }
  const Eigen::MatrixXd sub = scatter.topLeftCorner(dims, dims);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
  const auto ev = es.eigenvalues();
  const double hi = ev.maxCoeff();
  return hi > 0.0 ? ev.minCoeff() / hi : 0.0;
}

}  // namespace

Solution multilaterate(std::span<const AnchorRange> ranges, const SolveOptions& opts) {
  const bool planar = opts.bounds.fixed_z();
  const std::size_t need = planar ? 3 : 4;
  if (ranges.size() < need) {
    throw GeometryError("multilaterate: need at least " + std::to_string(need) + " anchors, got " +
                        std::to_string(ranges.size()));
  }
  if (spread_ratio(ranges, planar ? 2 : 3) < 1e-12) {
    throw GeometryError(planar ? "multilaterate: anchors are collinear" : "multilaterate: anchors are coplanar");
  }
  return solve_multistart(ranges, opts);
}

Solution pseudo_multilaterate_static(std::span<const RangeMeasurement> meas, const SolveOptions& opts) {
  if (meas.size() < 3) throw InvalidArgument("pseudo_multilaterate_static: need at least 3 measurements");
  const auto ranges = to_anchor_ranges(meas);
  return solve_multistart(ranges, opts);
}

WaypointSeries pseudo_multilaterate_moving(std::span<const RangeMeasurement> meas, std::size_t window,
                                           std::size_t stride, const SolveOptions& opts) {
  if (window < 3) throw InvalidArgument("pseudo_multilaterate_moving: window must be >= 3");
  if (stride < 1) throw InvalidArgument("pseudo_multilaterate_moving: stride must be >= 1");
  if (window > meas.size()) throw InvalidArgument("pseudo_multilaterate_moving: window exceeds measurement count");

  std::vector<double> t;
  std::vector<Position3> p;
  SolveOptions o = opts;
  for (std::size_t start = 0; start + window <= meas.size(); start += stride) {
    const auto slice = meas.subspan(start, window);
    const Solution s = pseudo_multilaterate_static(slice, o);
    t.push_back(0.5 * (slice.front().t + slice.back().t));
    p.push_back(s.p_hat);
    o.extra_starts = {s.p_hat};
    o.use_grid = false;
  }
  return WaypointSeries(std::move(t), std::move(p));
}

CrlbResult crlb(std::span<const Position3> anchors, const Position3& target,
                const std::function<double(double)>& sigma_fn) {
  if (anchors.size() < 3) throw InvalidArgument("crlb: need at least 3 anchors");
  Eigen::Matrix3d fisher = Eigen::Matrix3d::Zero();
  for (const auto& a : anchors) {
    const Position3 diff = a - target;
    const double d = diff.norm();
    if (d == 0.0) throw InvalidArgument("crlb: anchor coincides with target");
    const double sigma = sigma_fn(d);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("crlb: sigma must be > 0");
    const Eigen::Vector3d u = diff.vec() / d;
    fisher += u * u.transpose() / (sigma * sigma);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(fisher);
  const Eigen::Vector3d ev = es.eigenvalues();
  const double tol = 1e-10 * ev.maxCoeff();
  Eigen::Vector3d inv = Eigen::Vector3d::Zero();
  int rank = 0;
  for (int i = 0; i < 3; ++i) {
    if (ev[i] > tol) {
      inv[i] = 1.0 / ev[i];
      ++rank;
    }
  }
  CrlbResult out;
  out.rank = rank;
  out.rank_deficient = rank < 3;
  out.covariance = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  return out;
}

}  // namespace pseudolat
