#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pseudolat/geometry.hpp"
#include "pseudolat/localization.hpp"
#include "pseudolat/parallel.hpp"
#include "pseudolat/ranging.hpp"
#include "pseudolat/relocation.hpp"
#include "pseudolat/stats.hpp"
#include "pseudolat/waveform.hpp"

namespace pseudolat {

inline constexpr int kSchemaVersion = 1;

// Ground target: static when velocity is zero.
struct TargetTrack {
  Position3 start;
  Position3 velocity;

  Position3 at(double t) const { return start + velocity * t; }
};

// Waveform-level ranging: every range sample runs one pilot through a random multipath channel.
struct WaveformBackend {
  WaveformConfig waveform;
  ChannelEnsemble los_ensemble;
  ChannelEnsemble nlos_ensemble;
};

struct ScenarioConfig {
  std::string name = "scenario";
  TrajectorySpec trajectory = TrajectorySpec::circular({0.0, 0.0, 100.0}, 50.0, 2.0 * kPi / 60.0);
  double dt = 1.0;
  std::size_t linear_samples = 60;  // samples per segment when the trajectory is linear
  TargetTrack target;
  std::vector<Obstacle> obstacles;
  NoiseModel noise;
  std::optional<WaveformBackend> waveform;  // statistical NoiseModel when empty
  int n_revolutions = 1;
  std::optional<RelocationPolicy> relocation;
  SolveOptions solver;
  int runs = 1;
  std::uint64_t base_seed = 1;
  HistogramSpec histogram;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct RunResult {
  int run = 0;
  Position3 truth;     // target at the final revolution's mid time
  Position3 estimate;  // final revolution's solution
  double error = 0.0;
  double residual = 0.0;
  bool converged = false;
  std::size_t n_alternates = 0;
  std::vector<double> revolution_errors;
  std::size_t dropped_measurements = 0;  // waveform detection failures
};

struct MetricsReport {
  std::string scenario;
  std::vector<RunResult> runs;  // indexed by run
  SummaryStats error_stats;
  Histogram histogram;
  double convergence_rate = 0.0;
  std::vector<double> revolution_median_error;
  double non_increasing_fraction = 0.0;  // runs whose per-revolution errors never increase
  double runtime_s = 0.0;                // wall clock; kept out of the written artifacts
};

// Seed for sub-stream `index` of `base`; distinct (base, index) pairs give unrelated streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// One closed-loop run (measure -> solve -> optionally relocate, per revolution). Seeded by
// base_seed + run.
RunResult run_single(const ScenarioConfig& cfg, int run);

MetricsReport run_scenario(const ScenarioConfig& cfg, Execution exec = Execution::Parallel);

// Recomputes the aggregate fields from report.runs.
void aggregate(MetricsReport& report, const HistogramSpec& histogram);

// report.csv / summary.json contents.
std::string report_csv(const MetricsReport& report);
std::string summary_json(const MetricsReport& report);
void write_scenario_outputs(const MetricsReport& report, const std::filesystem::path& out_dir);

// Measurement matrices of every run and revolution (revolution index = run * n_revolutions + rev).
// Revolutions that lost a range to a detection failure are skipped so every matrix stays complete.
struct DatasetExport {
  std::vector<MeasurementMatrix> matrices;
  std::size_t skipped_revolutions = 0;
};
DatasetExport scenario_dataset(const ScenarioConfig& cfg, Execution exec = Execution::Parallel);

// Bound for the first revolution of run 0's geometry, with sigma from cfg.noise.
struct CrlbReport {
  Position3 target;
  std::size_t n_anchors = 0;
  CrlbResult bound;
};
CrlbReport scenario_crlb(const ScenarioConfig& cfg);
std::string crlb_json(const CrlbReport& report);

// OTFS vs OFDM ranging comparison.
struct SpacingSetting {
  double delta_f_hz = 30e3;
  int n_symbols = 32;
};

struct WaveformComparisonConfig {
  std::string name = "waveforms";
  std::vector<SpacingSetting> spacings{{30e3, 32}, {120e3, 128}};
  WaveformConfig base;  // scheme, spacing and n_symbols are overridden per cell
  ChannelEnsemble ensemble;
  double altitude_m = 100.0;
  double horizontal_min_m = 0.0;
  double horizontal_max_m = 200.0;
  int trials = 1000;
  std::uint64_t base_seed = 1;
  HistogramSpec histogram;

  void validate() const;
};

struct WaveformTrialRow {
  int trial = 0;
  Scheme scheme = Scheme::Ofdm;
  double delta_f_hz = 0.0;
  double error_m = 0.0;  // NaN when censored
  bool censored = false;
};

struct WaveformCell {
  Scheme scheme = Scheme::Ofdm;
  double delta_f_hz = 0.0;
  SummaryStats stats;  // over uncensored trials
  std::size_t censored = 0;
  Histogram histogram;
};

struct WaveformComparison {
  std::string name;
  std::vector<WaveformTrialRow> rows;  // spacing-major, then trial, then OFDM before OTFS
  std::vector<WaveformCell> cells;     // spacing-major, OFDM before OTFS
  double runtime_s = 0.0;

  const WaveformCell& cell(Scheme scheme, double delta_f_hz) const;
  // 1 - mean_OTFS / mean_OFDM at one spacing.
  double improvement(double delta_f_hz) const;
};

// Trial t draws one geometry and channel from base_seed + t and feeds the same draw, with the same
// noise stream, to both schemes. Spacings share the geometry and path set as well.
WaveformComparison compare_waveforms(const WaveformComparisonConfig& cfg, Execution exec = Execution::Parallel);

std::string waveform_errors_csv(const WaveformComparison& cmp);
std::string waveform_hist_csv(const WaveformComparison& cmp);
std::string waveform_summary_json(const WaveformComparison& cmp);
void write_waveform_outputs(const WaveformComparison& cmp, const std::filesystem::path& out_dir);

}  // namespace pseudolat
