#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "pseudolat/types.hpp"

namespace pseudolat {

enum class Scheme { Ofdm, Otfs };

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view s);  // "OFDM" / "OTFS", case-sensitive

// Frame numerology shared by both schemes: N subcarriers x M symbols, each symbol preceded by a
// cyclic prefix. sample_rate = N * subcarrier_spacing * oversample.
struct WaveformConfig {
  Scheme scheme = Scheme::Otfs;
  int n_subcarriers = 256;
  int n_symbols = 32;
  double subcarrier_spacing = 30e3;  // Hz
  double carrier_freq = 28e9;        // Hz
  double cp_fraction = 1.0 / 16.0;
  int oversample = 1;

  // Receiver settings.
  double threshold_db = 6.0;           // first-arrival threshold below the global peak
  double min_peak_to_floor_db = 12.0;  // below this the profile is treated as noise only
  int delay_interp = 8;                // zero-padding factor of the delay profile
  bool ofdm_noncoherent = false;       // OFDM: average per-symbol profile power instead of the channel
  std::uint64_t pilot_seed = 0x5eedULL;

  void validate() const;

  double sample_rate() const { return n_subcarriers * subcarrier_spacing * oversample; }
  int body_length() const { return n_subcarriers * oversample; }
  int cp_length() const;
  int symbol_length() const { return body_length() + cp_length(); }
  int frame_length() const { return symbol_length() * n_symbols; }
  // Delay resolution of one profile bin, seconds.
  double delay_bin() const { return 1.0 / (n_subcarriers * subcarrier_spacing); }
};

struct Path {
  double delay = 0.0;    // s
  double doppler = 0.0;  // Hz
  std::complex<double> gain{1.0, 0.0};
};

struct PathSet {
  std::vector<Path> paths;
  double snr_db = std::numeric_limits<double>::infinity();  // infinity disables noise

  void validate(const WaveformConfig& cfg) const;
};

struct ToaEstimate {
  double toa = 0.0;          // s
  double peak_metric = 0.0;  // peak-to-mean power of the delay profile, dB
  Scheme scheme = Scheme::Otfs;
};

using Signal = std::vector<std::complex<double>>;
// Rows index delay (or subcarrier), columns index Doppler (or symbol).
using Grid = Eigen::MatrixXcd;

// Unitary symplectic transform pair between the delay-Doppler and time-frequency grids.
Grid isfft(const Grid& delay_doppler);
Grid sfft(const Grid& time_frequency);

// Known time-frequency pilot symbols. OFDM: pseudo-random QPSK. OTFS: ISFFT of a unit impulse at
// delay 0, Doppler 0, all other delay-Doppler cells left as guard zeros.
Grid pilot_grid(const WaveformConfig& cfg);

// Per-symbol IFFT (rectangular pulse) plus cyclic prefix, and its receive-side inverse.
Signal modulate(const Grid& time_frequency, const WaveformConfig& cfg);
Grid demodulate(const Signal& rx, const WaveformConfig& cfg);

Signal make_pilot(const WaveformConfig& cfg);

// y(t) = sum_i g_i x(t - tau_i) exp(j 2 pi nu_i t) + AWGN at snr_db relative to the received power.
// Each symbol body is delayed cyclically (band-limited, so fractional delays are allowed), i.e. the
// cyclic prefix is assumed to cover the delay. Delays must stay below one symbol body.
Signal apply_channel(const Signal& signal, const PathSet& paths, const WaveformConfig& cfg, Rng& rng);

// Magnitude of the interpolated delay profile. OFDM: coherent average of the per-symbol channel
// estimates (or RMS of the per-symbol profiles when ofdm_noncoherent is set). OTFS: delay-Doppler channel, maximized over Doppler bins. `doppler_bin[j]` is the bin
// that produced `magnitude[j]`; `per_bin` holds every bin's magnitude (delay x Doppler).
struct DelayProfile {
  std::vector<double> magnitude;
  std::vector<int> doppler_bin;
  Eigen::MatrixXd per_bin;
  int interp = 1;
};
DelayProfile delay_profile(const Signal& rx, const WaveformConfig& cfg);
DelayProfile delay_profile(const Signal& rx, const WaveformConfig& cfg, const Grid& pilot);

// Earliest profile peak within threshold_db of the global peak, refined by a parabola through the
// peak and its two neighbours. Throws DetectionFailure when no peak clears the noise floor.
ToaEstimate estimate_toa(const Signal& rx, const WaveformConfig& cfg);
ToaEstimate estimate_toa(const Signal& rx, const WaveformConfig& cfg, const Grid& pilot);

double toa_to_distance(const ToaEstimate& est);

struct TrialGeometry {
  double d_true = 0.0;
  PathSet paths;
};

// Pilot grid and transmit frame for one configuration, built once and reused across trials.
struct PilotFrame {
  explicit PilotFrame(const WaveformConfig& cfg);
  WaveformConfig cfg;
  Grid grid;
  Signal signal;
};

// |c * toa - d_true| for one pilot -> channel -> estimator pass.
double ranging_error_trial(const WaveformConfig& cfg, const TrialGeometry& geometry, Rng& rng);
double ranging_error_trial(const PilotFrame& pilot, const TrialGeometry& geometry, Rng& rng);

// Random multipath for one link. NLoS paths arrive at d_true + Exp(excess_mean_m) with
// Rayleigh gains; every path gets a Doppler shift fc*v/c*cos(theta), theta uniform.
struct ChannelEnsemble {
  bool los = false;
  double los_gain = 1.0;
  int min_paths = 3;
  int max_paths = 6;
  double excess_mean_m = 20.0;
  double scatter_power = 1.0;  // mean power of each scattered path
  double speed_mps = 10.0;
  double snr_db = 10.0;

  void validate() const;
};

PathSet draw_paths(const ChannelEnsemble& ensemble, double d_true, double carrier_freq, Rng& rng);

double doppler_shift(double speed_mps, double carrier_freq, double cos_angle);

}  // namespace pseudolat
