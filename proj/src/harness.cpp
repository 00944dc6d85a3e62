#include "pseudolat/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pseudolat/errors.hpp"
#include "pseudolat/io.hpp"

namespace pseudolat {

using Json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Rethrows validation failures of nested types as ConfigError on `field`.
template <class F>
void check(const std::string& field, F&& f) {
  try {
    f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(field, e.what());
  }
}

std::size_t segment_samples(const ScenarioConfig& cfg, const TrajectorySpec& spec) {
  return spec.is_circular() ? samples_per_revolution(spec, cfg.dt) : cfg.linear_samples;
}

WaypointSeries sample_target(const TargetTrack& track, const WaypointSeries& anchor) {
  std::vector<Position3> p;
  p.reserve(anchor.size());
  for (double t : anchor.times()) p.push_back(track.at(t));
  return WaypointSeries(anchor.times(), std::move(p));
}

// Statistical or waveform-level range source for one run.
class RangeSource {
 public:
  explicit RangeSource(const ScenarioConfig& cfg) : cfg_(cfg) {
    if (cfg.waveform) pilot_.emplace(cfg.waveform->waveform);
  }

  std::vector<RangeMeasurement> collect(const WaypointSeries& anchor, const WaypointSeries& target,
                                        std::uint64_t seed) const {
    if (!pilot_) {
      NoiseModel model = cfg_.noise;
      model.seed = seed;
      return collect_measurements(anchor, target, cfg_.obstacles, model);
    }
    const WaveformBackend& backend = *cfg_.waveform;
    const PilotFrame& pilot = *pilot_;
    const RangeSampler sampler = [&](double d_true, bool los, const Position3&, const Position3&, Rng& rng) {
      const ChannelEnsemble& ensemble = los ? backend.los_ensemble : backend.nlos_ensemble;
      const TrialGeometry geometry{d_true, draw_paths(ensemble, d_true, pilot.cfg.carrier_freq, rng)};
      try {
        const Signal rx = apply_channel(pilot.signal, geometry.paths, pilot.cfg, rng);
        return toa_to_distance(estimate_toa(rx, pilot.cfg, pilot.grid));
      } catch (const DetectionFailure&) {
        return kNaN;
      }
    };
    return collect_measurements(anchor, target, cfg_.obstacles, sampler, seed);
  }

 private:
  const ScenarioConfig& cfg_;
  std::optional<PilotFrame> pilot_;
};

struct LoopOutput {
  RunResult result;
  std::vector<MeasurementMatrix> matrices;
  std::size_t skipped = 0;
};

LoopOutput closed_loop(const ScenarioConfig& cfg, int run, bool keep_matrices) {
  LoopOutput out;
  RunResult& r = out.result;
  r.run = run;
  const std::uint64_t run_seed = cfg.base_seed + static_cast<std::uint64_t>(run);
  const RangeSource source(cfg);

  TrajectorySpec spec = cfg.trajectory;
  double t0 = 0.0;
  std::vector<double> hist_t;
  std::vector<Position3> hist_p;
  for (int rev = 0; rev < cfg.n_revolutions; ++rev) {
    const std::size_t n = segment_samples(cfg, spec);
    const WaypointSeries anchor = sample_trajectory(spec, t0, cfg.dt, n);
    const WaypointSeries target = sample_target(cfg.target, anchor);
    const auto all = source.collect(anchor, target, derive_seed(run_seed, static_cast<std::uint64_t>(rev)));

    std::vector<RangeMeasurement> meas;
    meas.reserve(all.size());
    for (const auto& m : all) {
      if (!std::isnan(m.d_meas)) meas.push_back(m);
    }
    r.dropped_measurements += all.size() - meas.size();

    if (keep_matrices) {
      if (meas.size() != all.size()) {
        ++out.skipped;
      } else {
        std::vector<MeasurementMatrix> mats;
        if (spec.is_circular()) {
          mats = build_measurement_matrix(meas, spec, target);
        } else {
          MeasurementMatrix m;
          m.label = target.p(target.size() / 2);
          for (const auto& x : meas) {
            m.rows.push_back({x.anchor.x, x.anchor.y, x.anchor.z, x.d_meas});
            m.los.push_back(x.los);
          }
          mats.push_back(std::move(m));
        }
        for (auto& m : mats) {
          m.revolution = run * cfg.n_revolutions + rev;
          out.matrices.push_back(std::move(m));
        }
      }
    }

    SolveOptions opts = cfg.solver;
    if (!hist_p.empty()) opts.extra_starts.push_back(hist_p.back());
    const Solution sol = pseudo_multilaterate_static(meas, opts);

    const double t_mid = 0.5 * (anchor.t(0) + anchor.t(anchor.size() - 1));
    r.truth = cfg.target.at(t_mid);
    r.estimate = sol.p_hat;
    r.error = distance(sol.p_hat, r.truth);
    r.residual = sol.residual;
    r.converged = sol.converged;
    r.n_alternates = sol.alternates.size();
    r.revolution_errors.push_back(r.error);
    hist_t.push_back(t_mid);
    hist_p.push_back(sol.p_hat);

    const double t_next = t0 + static_cast<double>(n) * cfg.dt;
    if (cfg.relocation && rev + 1 < cfg.n_revolutions) {
      const double next_mid = t_next + 0.5 * static_cast<double>(n - 1) * cfg.dt;
      const Position3 predicted = predict_target(WaypointSeries(hist_t, hist_p), next_mid - t_mid);
      spec = relocate(spec, predicted, *cfg.relocation, t_next);
    }
    t0 = t_next;
  }
  return out;
}

Json position_json(const Position3& p) { return Json::array({p.x, p.y, p.z}); }

Json stats_json(const SummaryStats& s) {
  Json j;
  j["count"] = s.count;
  j["mean_m"] = s.mean;
  j["median_m"] = s.median;
  j["rmse_m"] = s.rmse;
  j["p95_m"] = s.p95;
  j["variance_m2"] = s.variance;
  return j;
}

Json histogram_json(const Histogram& h) {
  Json j;
  j["bin_width_m"] = h.spec.bin_width;
  j["max_m"] = h.spec.max;
  j["total"] = h.total;
  j["overflow"] = h.overflow;
  j["counts"] = h.counts;
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void ScenarioConfig::validate() const {
  if (runs < 1) throw ConfigError("runs", "must be >= 1");
  if (n_revolutions < 1) throw ConfigError("n_revolutions", "must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be > 0");
  if (trajectory.is_circular()) {
    if (samples_per_revolution(trajectory, dt) < 3) throw ConfigError("dt", "fewer than 3 samples per revolution");
  } else if (linear_samples < 3) {
    throw ConfigError("trajectory.samples", "must be >= 3");
  }
  if (!target.start.finite() || !target.velocity.finite()) throw ConfigError("target", "coordinates must be finite");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    check("obstacles[" + std::to_string(i) + "]", [&] { obstacles[i].validate(); });
  }
  check("noise", [&] { noise.validate(); });
  if (waveform) {
    check("waveform_backend.waveform", [&] { waveform->waveform.validate(); });
    check("waveform_backend.los_ensemble", [&] { waveform->los_ensemble.validate(); });
    check("waveform_backend.nlos_ensemble", [&] { waveform->nlos_ensemble.validate(); });
  }
  if (relocation) {
    if (!trajectory.is_circular()) throw ConfigError("relocation", "requires a circular trajectory");
    check("relocation", [&] { relocation->validate(); });
  }
  check("solver", [&] { solver.validate(); });
  if (!(histogram.bin_width > 0.0) || !(histogram.max > histogram.bin_width)) {
    throw ConfigError("histogram", "need 0 < bin_width_m < max_m");
  }
}

RunResult run_single(const ScenarioConfig& cfg, int run) { return closed_loop(cfg, run, false).result; }

void aggregate(MetricsReport& report, const HistogramSpec& histogram) {
  std::vector<double> errors;
  errors.reserve(report.runs.size());
  std::size_t converged = 0;
  std::size_t non_increasing = 0;
  std::size_t n_rev = 0;
  for (const auto& r : report.runs) {
    errors.push_back(r.error);
    converged += r.converged ? 1 : 0;
    n_rev = std::max(n_rev, r.revolution_errors.size());
    bool ok = true;
    for (std::size_t k = 1; k < r.revolution_errors.size(); ++k) ok = ok && r.revolution_errors[k] <= r.revolution_errors[k - 1];
    non_increasing += ok ? 1 : 0;
  }
  report.error_stats = summarize(errors);
  report.histogram = make_histogram(errors, histogram);
  const double n = report.runs.empty() ? 1.0 : static_cast<double>(report.runs.size());
  report.convergence_rate = static_cast<double>(converged) / n;
  report.non_increasing_fraction = static_cast<double>(non_increasing) / n;
  report.revolution_median_error.assign(n_rev, 0.0);
  for (std::size_t k = 0; k < n_rev; ++k) {
    std::vector<double> v;
    for (const auto& r : report.runs) {
      if (k < r.revolution_errors.size()) v.push_back(r.revolution_errors[k]);
    }
    report.revolution_median_error[k] = v.empty() ? kNaN : percentile(v, 0.5);
  }
}

MetricsReport run_scenario(const ScenarioConfig& cfg, Execution exec) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  MetricsReport report;
  report.scenario = cfg.name;
  report.runs.resize(static_cast<std::size_t>(cfg.runs));
  for_each_index(report.runs.size(), exec,
                 [&](std::size_t i) { report.runs[i] = run_single(cfg, static_cast<int>(i)); });
  aggregate(report, cfg.histogram);
  report.runtime_s = seconds_since(start);
  return report;
}

std::string report_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "scenario,run,true_x,true_y,true_z,est_x,est_y,est_z,err_m,residual,converged,n_alternates\n";
  for (const auto& r : report.runs) {
    os << report.scenario << ',' << r.run << ',' << format_double(r.truth.x) << ',' << format_double(r.truth.y)
       << ',' << format_double(r.truth.z) << ',' << format_double(r.estimate.x) << ','
       << format_double(r.estimate.y) << ',' << format_double(r.estimate.z) << ',' << format_double(r.error) << ','
       << format_double(r.residual) << ',' << (r.converged ? 1 : 0) << ',' << r.n_alternates << '\n';
  }
  return os.str();
}

std::string summary_json(const MetricsReport& report) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = report.scenario;
  j["runs"] = report.runs.size();
  j["final_error"] = stats_json(report.error_stats);
  j["convergence_rate"] = report.convergence_rate;
  j["revolution_median_error_m"] = report.revolution_median_error;
  j["non_increasing_fraction"] = report.non_increasing_fraction;
  std::size_t dropped = 0;
  for (const auto& r : report.runs) dropped += r.dropped_measurements;
  j["dropped_measurements"] = dropped;
  j["histogram"] = histogram_json(report.histogram);
  return dump(j);
}

void write_scenario_outputs(const MetricsReport& report, const std::filesystem::path& out_dir) {
  write_text_file(out_dir / "report.csv", report_csv(report));
  write_text_file(out_dir / "summary.json", summary_json(report));
}

DatasetExport scenario_dataset(const ScenarioConfig& cfg, Execution exec) {
  cfg.validate();
  std::vector<LoopOutput> outs(static_cast<std::size_t>(cfg.runs));
  for_each_index(outs.size(), exec, [&](std::size_t i) { outs[i] = closed_loop(cfg, static_cast<int>(i), true); });
  DatasetExport ex;
  for (auto& o : outs) {
    ex.skipped_revolutions += o.skipped;
    for (auto& m : o.matrices) ex.matrices.push_back(std::move(m));
  }
  return ex;
}

CrlbReport scenario_crlb(const ScenarioConfig& cfg) {
  cfg.validate();
  const WaypointSeries anchor = sample_trajectory(cfg.trajectory, 0.0, cfg.dt, segment_samples(cfg, cfg.trajectory));
  CrlbReport rep;
  rep.target = cfg.target.at(0.5 * (anchor.t(0) + anchor.t(anchor.size() - 1)));
  rep.n_anchors = anchor.size();
  const NoiseModel noise = cfg.noise;
  rep.bound = crlb(anchor.positions(), rep.target, [noise](double d) { return noise.sigma(d); });
  return rep;
}

std::string crlb_json(const CrlbReport& report) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["target"] = position_json(report.target);
  j["n_anchors"] = report.n_anchors;
  Json cov = Json::array();
  for (int i = 0; i < 3; ++i) {
    cov.push_back(Json::array({report.bound.covariance(i, 0), report.bound.covariance(i, 1), report.bound.covariance(i, 2)}));
  }
  j["covariance_m2"] = cov;
  j["trace_m2"] = report.bound.trace();
  j["rmse_bound_m"] = std::sqrt(std::max(0.0, report.bound.trace()));
  j["rank"] = report.bound.rank;
  j["rank_deficient"] = report.bound.rank_deficient;
  return dump(j);
}

// ---------------------------------------------------------------------------------------------

void WaveformComparisonConfig::validate() const {
  if (spacings.empty()) throw ConfigError("spacings", "at least one spacing required");
  for (std::size_t i = 0; i < spacings.size(); ++i) {
    const std::string field = "spacings[" + std::to_string(i) + "]";
    WaveformConfig w = base;
    w.subcarrier_spacing = spacings[i].delta_f_hz;
    w.n_symbols = spacings[i].n_symbols;
    check(field, [&] { w.validate(); });
    for (std::size_t j = 0; j < i; ++j) {
      if (spacings[j].delta_f_hz == spacings[i].delta_f_hz) throw ConfigError(field, "duplicate spacing");
    }
  }
  check("waveform", [&] { base.validate(); });
  check("ensemble", [&] { ensemble.validate(); });
  if (!(altitude_m >= 0.0)) throw ConfigError("geometry.altitude_m", "must be >= 0");
  if (!(horizontal_min_m >= 0.0) || !(horizontal_max_m >= horizontal_min_m)) {
    throw ConfigError("geometry.horizontal_max_m", "need 0 <= horizontal_min_m <= horizontal_max_m");
  }
  if (trials < 1) throw ConfigError("trials", "must be >= 1");
  if (!(histogram.bin_width > 0.0) || !(histogram.max > histogram.bin_width)) {
    throw ConfigError("histogram", "need 0 < bin_width_m < max_m");
  }
}

const WaveformCell& WaveformComparison::cell(Scheme scheme, double delta_f_hz) const {
  for (const auto& c : cells) {
    if (c.scheme == scheme && c.delta_f_hz == delta_f_hz) return c;
  }
  throw InvalidArgument("no comparison cell for " + std::string(to_string(scheme)) + " at " +
                        format_double(delta_f_hz) + " Hz");
}

double WaveformComparison::improvement(double delta_f_hz) const {
  return 1.0 - cell(Scheme::Otfs, delta_f_hz).stats.mean / cell(Scheme::Ofdm, delta_f_hz).stats.mean;
}

WaveformComparison compare_waveforms(const WaveformComparisonConfig& cfg, Execution exec) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  constexpr Scheme kSchemes[] = {Scheme::Ofdm, Scheme::Otfs};
  const std::size_t n_sp = cfg.spacings.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);

  std::vector<PilotFrame> frames;
  for (const auto& s : cfg.spacings) {
    for (Scheme scheme : kSchemes) {
      WaveformConfig w = cfg.base;
      w.scheme = scheme;
      w.subcarrier_spacing = s.delta_f_hz;
      w.n_symbols = s.n_symbols;
      frames.emplace_back(w);
    }
  }

  WaveformComparison cmp;
  cmp.name = cfg.name;
  cmp.rows.resize(n_sp * trials * 2);
  for_each_index(trials, exec, [&](std::size_t t) {
    const std::uint64_t trial_seed = cfg.base_seed + t;
    Rng geo(trial_seed);
    std::uniform_real_distribution<double> horizontal(cfg.horizontal_min_m, cfg.horizontal_max_m);
    const double h = horizontal(geo);
    const double d_true = std::sqrt(cfg.altitude_m * cfg.altitude_m + h * h);
    const TrialGeometry geometry{d_true, draw_paths(cfg.ensemble, d_true, cfg.base.carrier_freq, geo)};
    const std::uint64_t noise_seed = derive_seed(trial_seed, 0);
    for (std::size_t s = 0; s < n_sp; ++s) {
      for (std::size_t k = 0; k < 2; ++k) {
        WaveformTrialRow& row = cmp.rows[(s * trials + t) * 2 + k];
        row.trial = static_cast<int>(t);
        row.scheme = kSchemes[k];
        row.delta_f_hz = cfg.spacings[s].delta_f_hz;
        Rng noise(noise_seed);
        try {
          row.error_m = ranging_error_trial(frames[s * 2 + k], geometry, noise);
        } catch (const DetectionFailure&) {
          row.error_m = kNaN;
          row.censored = true;
        }
      }
    }
  });

  for (std::size_t s = 0; s < n_sp; ++s) {
    for (std::size_t k = 0; k < 2; ++k) {
      WaveformCell c;
      c.scheme = kSchemes[k];
      c.delta_f_hz = cfg.spacings[s].delta_f_hz;
      std::vector<double> errors;
      errors.reserve(trials);
      for (std::size_t t = 0; t < trials; ++t) {
        const auto& row = cmp.rows[(s * trials + t) * 2 + k];
        if (row.censored) {
          ++c.censored;
        } else {
          errors.push_back(row.error_m);
        }
      }
      c.stats = summarize(errors);
      c.histogram = make_histogram(errors, cfg.histogram);
      cmp.cells.push_back(std::move(c));
    }
  }
  cmp.runtime_s = seconds_since(start);
  return cmp;
}

std::string waveform_errors_csv(const WaveformComparison& cmp) {
  std::ostringstream os;
  os << "trial,scheme,delta_f_hz,error_m\n";
  for (const auto& r : cmp.rows) {
    os << r.trial << ',' << to_string(r.scheme) << ',' << format_double(r.delta_f_hz) << ','
       << format_double(r.error_m) << '\n';
  }
  return os.str();
}

std::string waveform_hist_csv(const WaveformComparison& cmp) {
  std::ostringstream os;
  os << "scheme,delta_f_hz,bin_left_m,bin_right_m,density\n";
  for (const auto& c : cmp.cells) {
    const auto density = c.histogram.density();
    for (std::size_t b = 0; b < density.size(); ++b) {
      const double left = static_cast<double>(b) * c.histogram.spec.bin_width;
      const double right = std::min(left + c.histogram.spec.bin_width, c.histogram.spec.max);
      os << to_string(c.scheme) << ',' << format_double(c.delta_f_hz) << ',' << format_double(left) << ','
         << format_double(right) << ',' << format_double(density[b]) << '\n';
    }
  }
  return os.str();
}

std::string waveform_summary_json(const WaveformComparison& cmp) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = cmp.name;
  Json cells = Json::array();
  for (const auto& c : cmp.cells) {
    Json cj;
    cj["scheme"] = std::string(to_string(c.scheme));
    cj["delta_f_hz"] = c.delta_f_hz;
    cj["error"] = stats_json(c.stats);
    cj["censored"] = c.censored;
    cj["histogram_overflow"] = c.histogram.overflow;
    cells.push_back(cj);
  }
  j["cells"] = cells;
  Json ratios = Json::array();
  for (const auto& c : cmp.cells) {
    if (c.scheme != Scheme::Ofdm) continue;
    const WaveformCell& otfs = cmp.cell(Scheme::Otfs, c.delta_f_hz);
    Json r;
    r["delta_f_hz"] = c.delta_f_hz;
    r["mean_ratio_otfs_over_ofdm"] = otfs.stats.mean / c.stats.mean;
    r["variance_ratio_otfs_over_ofdm"] = otfs.stats.variance / c.stats.variance;
    r["improvement"] = cmp.improvement(c.delta_f_hz);
    ratios.push_back(r);
  }
  j["comparison"] = ratios;
  return dump(j);
}

void write_waveform_outputs(const WaveformComparison& cmp, const std::filesystem::path& out_dir) {
  write_text_file(out_dir / "waveform_errors.csv", waveform_errors_csv(cmp));
  write_text_file(out_dir / "waveform_hist.csv", waveform_hist_csv(cmp));
  write_text_file(out_dir / "waveform_summary.json", waveform_summary_json(cmp));
}

}  // namespace pseudolat
