#include "pseudolat/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "pseudolat/errors.hpp"
#include "pseudolat/io.hpp"

namespace pseudolat {

void Obstacle::validate() const {
  if (!min.finite() || !max.finite()) throw InvalidArgument("obstacle: non-finite corner");
  if (!(min.x < max.x && min.y < max.y && min.z < max.z)) {
    throw InvalidArgument("obstacle: min must be < max component-wise");
  }
}

void NoiseModel::validate() const {
  if (!(sigma0 >= 0.0) || !(eta >= 0.0) || !(nlos_bias_mean >= 0.0) || !std::isfinite(sigma0) ||
      !std::isfinite(eta) || !std::isfinite(nlos_bias_mean)) {
    throw InvalidArgument("noise model: parameters must be finite and nonnegative");
  }
}

namespace {

// Slab test over the closed box, restricted to the segment parameter range [0, 1].
bool segment_hits_box(const Position3& a, const Position3& b, const Obstacle& box) {
  const std::array<double, 3> origin{a.x, a.y, a.z};
  const std::array<double, 3> dir{b.x - a.x, b.y - a.y, b.z - a.z};
  const std::array<double, 3> lo{box.min.x, box.min.y, box.min.z};
  const std::array<double, 3> hi{box.max.x, box.max.y, box.max.z};
  double t_enter = 0.0;
  double t_exit = 1.0;
  for (int i = 0; i < 3; ++i) {
    if (dir[i] == 0.0) {
      if (origin[i] < lo[i] || origin[i] > hi[i]) return false;
      continue;
    }
    double t0 = (lo[i] - origin[i]) / dir[i];
    double t1 = (hi[i] - origin[i]) / dir[i];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return false;
  }
  return true;
}

}  // namespace

bool los_blocked(const Position3& anchor, const Position3& target, std::span<const Obstacle> obstacles) {
  if (anchor == target) throw InvalidArgument("los_blocked: anchor and target coincide");
  return std::any_of(obstacles.begin(), obstacles.end(),
                     [&](const Obstacle& o) { return segment_hits_box(anchor, target, o); });
}

double sample_range(double d_true, bool los, const NoiseModel& model, Rng& rng) {
  if (!(d_true >= 0.0)) throw InvalidArgument("sample_range: d_true must be >= 0");
  std::normal_distribution<double> gauss(0.0, 1.0);
  double d = d_true + model.sigma(d_true) * gauss(rng);
  if (!los && model.nlos_bias_mean > 0.0) {
    std::exponential_distribution<double> bias(1.0 / model.nlos_bias_mean);
    d += bias(rng);
  }
  return std::max(0.0, d);
}

namespace {

void check_same_grid(const WaypointSeries& a, const WaypointSeries& b) {
  if (a.size() != b.size()) throw InvalidArgument("collect_measurements: anchor and target series differ in length");
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double tol = 1e-9 * std::max(1.0, std::abs(a.t(k)));
    if (std::abs(a.t(k) - b.t(k)) > tol) {
      throw InvalidArgument("collect_measurements: anchor and target time grids differ at index " +
                            std::to_string(k));
    }
  }
}

}  // namespace

std::vector<RangeMeasurement> collect_measurements(const WaypointSeries& anchor_path,
                                                   const WaypointSeries& target_path,
                                                   std::span<const Obstacle> obstacles,
                                                   const RangeSampler& sampler, std::uint64_t seed) {
  check_same_grid(anchor_path, target_path);
  for (const auto& o : obstacles) o.validate();
  Rng rng(seed);
  std::vector<RangeMeasurement> out;
  out.reserve(anchor_path.size());
  for (std::size_t k = 0; k < anchor_path.size(); ++k) {
    const Position3& a = anchor_path.p(k);
    const Position3& x = target_path.p(k);
    const bool los = !los_blocked(a, x, obstacles);
    const double d_true = distance(a, x);
    out.push_back({anchor_path.t(k), a, sampler(d_true, los, a, x, rng), los});
  }
  return out;
}

std::vector<RangeMeasurement> collect_measurements(const WaypointSeries& anchor_path,
                                                   const WaypointSeries& target_path,
                                                   std::span<const Obstacle> obstacles, const NoiseModel& model) {
  model.validate();
  const RangeSampler sampler = [&model](double d_true, bool los, const Position3&, const Position3&, Rng& rng) {
    return sample_range(d_true, los, model, rng);
  };
  return collect_measurements(anchor_path, target_path, obstacles, sampler, model.seed);
}

std::size_t samples_per_revolution(const TrajectorySpec& spec, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("samples_per_revolution: dt must be > 0");
  const double ratio = revolution_period(spec) / dt;
  // Tolerate representation error when the period is an exact multiple of dt.
  return static_cast<std::size_t>(std::floor(ratio + 1e-9));
}

std::vector<MeasurementMatrix> build_measurement_matrix(std::span<const RangeMeasurement> measurements,
                                                        const TrajectorySpec& spec,
                                                        const WaypointSeries& target_path) {
  if (!spec.is_circular()) throw UnsupportedOperation("build_measurement_matrix: linear trajectory has no revolutions");
  if (measurements.size() < 2) throw InvalidArgument("build_measurement_matrix: need at least two measurements");
  for (std::size_t k = 1; k < measurements.size(); ++k) {
    if (!(measurements[k].t > measurements[k - 1].t)) {
      throw InvalidArgument("build_measurement_matrix: measurements must be time-ordered");
    }
  }
  const double dt = measurements[1].t - measurements[0].t;
  const std::size_t per_rev = samples_per_revolution(spec, dt);
  if (per_rev == 0) throw InvalidArgument("build_measurement_matrix: dt exceeds the revolution period");

  auto label_at = [&](double t) {
    const auto& ts = target_path.times();
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - ts.begin());
    if (idx == ts.size()) {
      idx = ts.size() - 1;
    } else if (idx > 0 && (t - ts[idx - 1]) < (ts[idx] - t)) {
      --idx;
    }
    return target_path.p(idx);
  };

  const std::size_t n_rev = measurements.size() / per_rev;
  std::vector<MeasurementMatrix> out;
  out.reserve(n_rev);
  for (std::size_t r = 0; r < n_rev; ++r) {
    MeasurementMatrix m;
    m.revolution = static_cast<int>(r);
    m.rows.reserve(per_rev);
    m.los.reserve(per_rev);
    for (std::size_t i = 0; i < per_rev; ++i) {
      const auto& meas = measurements[r * per_rev + i];
      m.rows.push_back({meas.anchor.x, meas.anchor.y, meas.anchor.z, meas.d_meas});
      m.los.push_back(meas.los);
    }
    m.label = label_at(measurements[r * per_rev + per_rev / 2].t);
    out.push_back(std::move(m));
  }
  return out;
}

void export_dataset(std::span<const MeasurementMatrix> matrices, const std::filesystem::path& path) {
  if (matrices.empty()) throw InvalidArgument("export_dataset: no matrices to export");
  std::ostringstream os;
  os << "rev,row,x,y,z,d,los,label_x,label_y,label_z\n";
  for (const auto& m : matrices) {
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      const auto& r = m.rows[i];
      os << m.revolution << ',' << i << ',' << format_double(r[0]) << ',' << format_double(r[1]) << ','
         << format_double(r[2]) << ',' << format_double(r[3]) << ',' << (m.los[i] ? 1 : 0) << ','
         << format_double(m.label.x) << ',' << format_double(m.label.y) << ',' << format_double(m.label.z)
         << '\n';
    }
  }
  write_text_file(path, os.str());
}

std::vector<MeasurementMatrix> read_dataset(const std::filesystem::path& path) {
  const auto rows = read_csv(path, "rev,row,x,y,z,d,los,label_x,label_y,label_z");
  std::vector<MeasurementMatrix> out;
  for (const auto& f : rows) {
    const int rev = static_cast<int>(parse_int(f[0], path));
    const auto row = parse_int(f[1], path);
    if (out.empty() || out.back().revolution != rev) {
      out.push_back({});
      out.back().revolution = rev;
      out.back().label = {parse_double(f[7], path), parse_double(f[8], path), parse_double(f[9], path)};
    }
    auto& m = out.back();
    if (row != static_cast<long long>(m.rows.size())) throw IoError(path.string(), "row index out of sequence");
    m.rows.push_back({parse_double(f[2], path), parse_double(f[3], path), parse_double(f[4], path),
                      parse_double(f[5], path)});
    m.los.push_back(f[6] == "1");
  }
  return out;
}

}  // namespace pseudolat
