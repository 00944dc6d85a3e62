#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "pseudolat/geometry.hpp"
#include "pseudolat/types.hpp"

namespace pseudolat {

// Axis-aligned box, min < max component-wise.
struct Obstacle {
  Position3 min;
  Position3 max;

  void validate() const;
};

// Range error: Normal(0, (sigma0 + eta*d)^2) plus, for NLoS links, an Exponential(nlos_bias_mean)
// excess-path bias.
struct NoiseModel {
  double sigma0 = 1.0;          // m
  double eta = 0.01;            // std growth per meter of range
  double nlos_bias_mean = 5.0;  // m
  std::uint64_t seed = 0;

  void validate() const;
  double sigma(double d) const { return sigma0 + eta * d; }
};

struct RangeMeasurement {
  double t = 0.0;
  Position3 anchor;
  double d_meas = 0.0;
  bool los = true;
};

// One revolution of measurements, rows are [x, y, z, d_meas].
struct MeasurementMatrix {
  int revolution = 0;
  std::vector<std::array<double, 4>> rows;
  std::vector<bool> los;
  Position3 label;  // true target position at the revolution midpoint
};

// True iff the segment anchor->target intersects a box. Touching a face or an edge counts.
bool los_blocked(const Position3& anchor, const Position3& target, std::span<const Obstacle> obstacles);

double sample_range(double d_true, bool los, const NoiseModel& model, Rng& rng);

// Maps (true distance, LoS flag, anchor, target) to a measured distance. Used to swap the
// statistical model for the waveform-level one.
using RangeSampler =
    std::function<double(double d_true, bool los, const Position3& anchor, const Position3& target, Rng& rng)>;

std::vector<RangeMeasurement> collect_measurements(const WaypointSeries& anchor_path,
                                                   const WaypointSeries& target_path,
                                                   std::span<const Obstacle> obstacles, const NoiseModel& model);

std::vector<RangeMeasurement> collect_measurements(const WaypointSeries& anchor_path,
                                                   const WaypointSeries& target_path,
                                                   std::span<const Obstacle> obstacles,
                                                   const RangeSampler& sampler, std::uint64_t seed);

// Splits time-ordered measurements into full revolutions of floor(period/dt) samples. A trailing
// partial revolution is dropped. Labels come from `target_path` at each revolution's middle sample
// (nearest waypoint in time).
std::vector<MeasurementMatrix> build_measurement_matrix(std::span<const RangeMeasurement> measurements,
                                                        const TrajectorySpec& spec,
                                                        const WaypointSeries& target_path);

std::size_t samples_per_revolution(const TrajectorySpec& spec, double dt);

// CSV: rev,row,x,y,z,d,los,label_x,label_y,label_z
void export_dataset(std::span<const MeasurementMatrix> matrices, const std::filesystem::path& path);
std::vector<MeasurementMatrix> read_dataset(const std::filesystem::path& path);

}  // namespace pseudolat
