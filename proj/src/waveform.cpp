#include "pseudolat/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pseudolat/errors.hpp"
#include "pseudolat/fft.hpp"

namespace pseudolat {

using cd = std::complex<double>;

std::string_view to_string(Scheme s) { return s == Scheme::Ofdm ? "OFDM" : "OTFS"; }

Scheme scheme_from_string(std::string_view s) {
  if (s == "OFDM") return Scheme::Ofdm;
  if (s == "OTFS") return Scheme::Otfs;
  throw InvalidArgument("unknown scheme '" + std::string(s) + "'");
}

int WaveformConfig::cp_length() const {
  return static_cast<int>(std::lround(cp_fraction * n_subcarriers * oversample));
}

void WaveformConfig::validate() const {
  const bool pow2 = n_subcarriers >= 2 && (n_subcarriers & (n_subcarriers - 1)) == 0;
  if (!pow2) throw InvalidArgument("waveform: n_subcarriers must be a power of two >= 2");
  if (n_symbols < 1) throw InvalidArgument("waveform: n_symbols must be >= 1");
  if (!(subcarrier_spacing > 0.0) || !std::isfinite(subcarrier_spacing)) {
    throw InvalidArgument("waveform: subcarrier_spacing must be > 0");
  }
  if (!(carrier_freq > 0.0) || !std::isfinite(carrier_freq)) throw InvalidArgument("waveform: carrier_freq must be > 0");
  if (!(cp_fraction >= 0.0 && cp_fraction < 1.0)) throw InvalidArgument("waveform: cp_fraction must be in [0, 1)");
  if (oversample < 1) throw InvalidArgument("waveform: oversample must be >= 1");
  if (delay_interp < 1) throw InvalidArgument("waveform: delay_interp must be >= 1");
  if (!(threshold_db >= 0.0)) throw InvalidArgument("waveform: threshold_db must be >= 0");
}

void PathSet::validate(const WaveformConfig& cfg) const {
  if (paths.empty()) throw InvalidArgument("path set is empty");
  const double max_delay = cfg.body_length() / cfg.sample_rate();
  bool any_gain = false;
  for (const auto& p : paths) {
    if (!(p.delay >= 0.0) || !(p.delay < max_delay)) {
      throw InvalidArgument("path delay outside [0, symbol body duration)");
    }
    if (!std::isfinite(p.doppler) || !std::isfinite(p.gain.real()) || !std::isfinite(p.gain.imag())) {
      throw InvalidArgument("path with non-finite Doppler or gain");
    }
    any_gain = any_gain || std::abs(p.gain) > 0.0;
  }
  if (!any_gain) throw InvalidArgument("path set has no path with nonzero gain");
}

namespace {

// FFT bin holding subcarrier n of N in a body of `body` samples (centered spectrum).
int active_bin(int n, int n_sub, int body) { return n < n_sub / 2 ? n : n + body - n_sub; }

// Signed frequency index of FFT bin k.
double centered_index(int k, int len) { return k < len / 2 ? k : k - len; }

void transform_columns(Grid& g, bool inverse) {
  std::vector<cd> in(static_cast<std::size_t>(g.rows())), out(in.size());
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) in[static_cast<std::size_t>(r)] = g(r, c);
    inverse ? fft::inverse(in, out) : fft::forward(in, out);
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = out[static_cast<std::size_t>(r)];
  }
}

void transform_rows(Grid& g, bool inverse) {
  std::vector<cd> in(static_cast<std::size_t>(g.cols())), out(in.size());
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.cols(); ++c) in[static_cast<std::size_t>(c)] = g(r, c);
    inverse ? fft::inverse(in, out) : fft::forward(in, out);
    for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = out[static_cast<std::size_t>(c)];
  }
}

void check_frame(const Signal& s, const WaveformConfig& cfg) {
  if (s.size() != static_cast<std::size_t>(cfg.frame_length())) {
    throw InvalidArgument("signal length " + std::to_string(s.size()) + " does not match frame length " +
                          std::to_string(cfg.frame_length()));
  }
}

}  // namespace

Grid isfft(const Grid& delay_doppler) {
  Grid g = delay_doppler;
  transform_columns(g, false);  // delay -> subcarrier: exp(-j2pi nl/N)
  transform_rows(g, true);      // Doppler -> symbol: exp(+j2pi mk/M)
  return g;
}

Grid sfft(const Grid& time_frequency) {
  Grid g = time_frequency;
  transform_columns(g, true);
  transform_rows(g, false);
  return g;
}

Grid pilot_grid(const WaveformConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_subcarriers;
  const int m = cfg.n_symbols;
  if (cfg.scheme == Scheme::Otfs) {
    Grid dd = Grid::Zero(n, m);
    dd(0, 0) = 1.0;
    return isfft(dd);
  }
  Rng rng(cfg.pilot_seed);
  std::bernoulli_distribution bit(0.5);
  const double a = 1.0 / std::sqrt(2.0);
  Grid tf(n, m);
  for (int c = 0; c < m; ++c) {
    for (int r = 0; r < n; ++r) tf(r, c) = cd(bit(rng) ? a : -a, bit(rng) ? a : -a);
  }
  return tf;
}

Signal modulate(const Grid& tf, const WaveformConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_subcarriers;
  const int body = cfg.body_length();
  const int cp = cfg.cp_length();
  const int sym = cfg.symbol_length();
  if (tf.rows() != n || tf.cols() != cfg.n_symbols) throw InvalidArgument("modulate: grid shape mismatch");
  Signal out(static_cast<std::size_t>(cfg.frame_length()));
  std::vector<cd> spec(static_cast<std::size_t>(body)), time(spec.size());
  for (int m = 0; m < cfg.n_symbols; ++m) {
    std::fill(spec.begin(), spec.end(), cd{});
    for (int k = 0; k < n; ++k) spec[static_cast<std::size_t>(active_bin(k, n, body))] = tf(k, m);
    fft::inverse(spec, time);
    cd* dst = out.data() + static_cast<std::ptrdiff_t>(m) * sym;
    for (int j = 0; j < cp; ++j) dst[j] = time[static_cast<std::size_t>(body - cp + j)];
    std::copy(time.begin(), time.end(), dst + cp);
  }
  return out;
}

Grid demodulate(const Signal& rx, const WaveformConfig& cfg) {
  cfg.validate();
  check_frame(rx, cfg);
  const int n = cfg.n_subcarriers;
  const int body = cfg.body_length();
  const int cp = cfg.cp_length();
  const int sym = cfg.symbol_length();
  Grid tf(n, cfg.n_symbols);
  std::vector<cd> time(static_cast<std::size_t>(body)), spec(time.size());
  for (int m = 0; m < cfg.n_symbols; ++m) {
    const cd* src = rx.data() + static_cast<std::ptrdiff_t>(m) * sym + cp;
    std::copy(src, src + body, time.begin());
    fft::forward(time, spec);
    for (int k = 0; k < n; ++k) tf(k, m) = spec[static_cast<std::size_t>(active_bin(k, n, body))];
  }
  return tf;
}

Signal make_pilot(const WaveformConfig& cfg) { return modulate(pilot_grid(cfg), cfg); }

Signal apply_channel(const Signal& signal, const PathSet& paths, const WaveformConfig& cfg, Rng& rng) {
  cfg.validate();
  check_frame(signal, cfg);
  paths.validate(cfg);

  const int body = cfg.body_length();
  const int cp = cfg.cp_length();
  const int sym = cfg.symbol_length();
  const double fs = cfg.sample_rate();
  Signal out(signal.size(), cd{});

  // Band-limited delay as a linear phase over the body's FFT bins, one ramp per path.
  std::vector<std::vector<cd>> ramps;
  std::vector<int> whole_shift;
  for (const auto& p : paths.paths) {
    const double lag = p.delay * fs;
    const double whole = std::round(lag);
    if (std::abs(lag - whole) < 1e-9) {
      whole_shift.push_back(static_cast<int>(whole));
      ramps.emplace_back();
      continue;
    }
    whole_shift.push_back(-1);
    std::vector<cd> ramp(static_cast<std::size_t>(body));
    for (int k = 0; k < body; ++k) {
      ramp[static_cast<std::size_t>(k)] = std::polar(1.0, -2.0 * kPi * centered_index(k, body) * lag / body);
    }
    ramps.push_back(std::move(ramp));
  }

  std::vector<cd> time(static_cast<std::size_t>(body)), spec(time.size()), shifted_spec(time.size()),
      shifted(time.size());
  for (int m = 0; m < cfg.n_symbols; ++m) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(m) * sym;
    std::copy(signal.begin() + base + cp, signal.begin() + base + cp + body, time.begin());
    fft::forward(time, spec);
    for (std::size_t i = 0; i < paths.paths.size(); ++i) {
      const Path& p = paths.paths[i];
      if (whole_shift[i] >= 0) {
        const int shift = whole_shift[i] % body;
        for (int j = 0; j < body; ++j) {
          shifted[static_cast<std::size_t>(j)] = time[static_cast<std::size_t>((j - shift + body) % body)];
        }
      } else {
        for (std::size_t k = 0; k < spec.size(); ++k) shifted_spec[k] = spec[k] * ramps[i][k];
        fft::inverse(shifted_spec, shifted);
      }
      // Doppler phasor, re-anchored at every symbol start to bound rounding drift.
      const double w = 2.0 * kPi * p.doppler / fs;
      const cd step = std::polar(1.0, w);
      cd rot = p.gain * std::polar(1.0, w * static_cast<double>(base));
      cd* dst = out.data() + base;
      int idx = body - cp;  // cyclic prefix mirrors the body tail
      for (int j = 0; j < sym; ++j) {
        dst[j] += rot * shifted[static_cast<std::size_t>(idx)];
        rot *= step;
        if (++idx == body) idx = 0;
      }
    }
  }

  if (std::isfinite(paths.snr_db)) {
    double power = 0.0;
    for (const auto& v : out) power += std::norm(v);
    power /= static_cast<double>(out.size());
    const double sigma = std::sqrt(power / std::pow(10.0, paths.snr_db / 10.0) / 2.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : out) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      v += cd(sigma * re, sigma * im);
    }
  }
  return out;
}

DelayProfile delay_profile(const Signal& rx, const WaveformConfig& cfg) {
  return delay_profile(rx, cfg, pilot_grid(cfg));
}

DelayProfile delay_profile(const Signal& rx, const WaveformConfig& cfg, const Grid& x) {
  const Grid y = demodulate(rx, cfg);
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw InvalidArgument("delay_profile: pilot grid shape mismatch");
  const int n = cfg.n_subcarriers;
  const int m_sym = cfg.n_symbols;
  const int interp = cfg.delay_interp;
  const int len = n * interp;

  // Least-squares channel estimate on every time-frequency resource.
  Grid h = y.cwiseQuotient(x);

  Grid doppler;  // subcarrier x Doppler bin (OFDM non-coherent: subcarrier x symbol)
  if (cfg.scheme == Scheme::Ofdm) {
    doppler = cfg.ofdm_noncoherent ? h : Grid(h.rowwise().mean());
  } else {
    doppler = h;
    transform_rows(doppler, false);
  }

  DelayProfile prof;
  prof.interp = interp;
  prof.per_bin.resize(len, doppler.cols());
  std::vector<cd> padded(static_cast<std::size_t>(len)), taps(padded.size());
  for (Eigen::Index k = 0; k < doppler.cols(); ++k) {
    std::fill(padded.begin(), padded.end(), cd{});
    for (int s = 0; s < n; ++s) padded[static_cast<std::size_t>(active_bin(s, n, len))] = doppler(s, k);
    fft::inverse(padded, taps);
    for (int j = 0; j < len; ++j) prof.per_bin(j, k) = std::sqrt(std::norm(taps[static_cast<std::size_t>(j)]));
  }
  if (cfg.scheme == Scheme::Ofdm && cfg.ofdm_noncoherent) {
    Eigen::MatrixXd rms = (prof.per_bin.array().square().rowwise().sum() / m_sym).sqrt().matrix();
    prof.per_bin = std::move(rms);
  }
  prof.magnitude.resize(static_cast<std::size_t>(len));
  prof.doppler_bin.resize(static_cast<std::size_t>(len));
  for (int j = 0; j < len; ++j) {
    Eigen::Index best = 0;
    prof.magnitude[static_cast<std::size_t>(j)] = prof.per_bin.row(j).maxCoeff(&best);
    prof.doppler_bin[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return prof;
}

ToaEstimate estimate_toa(const Signal& rx, const WaveformConfig& cfg) {
  return estimate_toa(rx, cfg, pilot_grid(cfg));
}

ToaEstimate estimate_toa(const Signal& rx, const WaveformConfig& cfg, const Grid& pilot) {
  const DelayProfile prof = delay_profile(rx, cfg, pilot);
  const auto& mag = prof.magnitude;
  const int len = static_cast<int>(mag.size());

  const double peak = *std::max_element(mag.begin(), mag.end());
  double mean_power = 0.0;
  for (double v : mag) mean_power += v * v;
  mean_power /= len;
  if (!std::isfinite(peak) || !(peak > 0.0)) throw DetectionFailure("delay profile is empty");
  const double par_db = 10.0 * std::log10(peak * peak / mean_power);
  if (par_db < cfg.min_peak_to_floor_db) {
    throw DetectionFailure("no delay-profile peak above the noise floor");
  }

  const double threshold = peak * std::pow(10.0, -cfg.threshold_db / 20.0);
  int j = 0;
  while (j < len && mag[static_cast<std::size_t>(j)] < threshold) ++j;
  if (j == len) throw DetectionFailure("no delay-profile sample above threshold");
  while (j + 1 < len && mag[static_cast<std::size_t>(j + 1)] > mag[static_cast<std::size_t>(j)]) ++j;

  const int bin = prof.doppler_bin[static_cast<std::size_t>(j)];
  const double y0 = prof.per_bin(j, bin);
  const double ym = prof.per_bin((j - 1 + len) % len, bin);
  const double yp = prof.per_bin((j + 1) % len, bin);
  const double denom = ym - 2.0 * y0 + yp;
  double offset = denom < 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
  offset = std::clamp(offset, -0.5, 0.5);

  double fine = j + offset;
  // A peak within one cyclic prefix of the end is a (noisy) arrival just before delay zero.
  const int guard = std::max(1, static_cast<int>(std::lround(cfg.cp_fraction * cfg.n_subcarriers))) * prof.interp;
  if (fine > len - guard) fine -= len;
  ToaEstimate est;
  est.toa = std::max(0.0, fine / prof.interp * cfg.delay_bin());
  est.peak_metric = par_db;
  est.scheme = cfg.scheme;
  return est;
}

double toa_to_distance(const ToaEstimate& est) {
  if (!(est.toa >= 0.0)) throw InvalidArgument("toa_to_distance: toa must be >= 0");
  return kSpeedOfLight * est.toa;
}

PilotFrame::PilotFrame(const WaveformConfig& c) : cfg(c), grid(pilot_grid(c)), signal(modulate(grid, c)) {}

double ranging_error_trial(const WaveformConfig& cfg, const TrialGeometry& geometry, Rng& rng) {
  return ranging_error_trial(PilotFrame(cfg), geometry, rng);
}

double ranging_error_trial(const PilotFrame& pilot, const TrialGeometry& geometry, Rng& rng) {
  const Signal rx = apply_channel(pilot.signal, geometry.paths, pilot.cfg, rng);
  return std::abs(toa_to_distance(estimate_toa(rx, pilot.cfg, pilot.grid)) - geometry.d_true);
}

void ChannelEnsemble::validate() const {
  if (min_paths < 0 || max_paths < min_paths) throw InvalidArgument("ensemble: need 0 <= min_paths <= max_paths");
  if (!los && max_paths == 0) throw InvalidArgument("ensemble: no paths");
  if (!(excess_mean_m > 0.0) || !(scatter_power >= 0.0) || !(speed_mps >= 0.0) || !(los_gain >= 0.0)) {
    throw InvalidArgument("ensemble: excess_mean_m must be > 0; powers, gains and speed >= 0");
  }
}

double doppler_shift(double speed_mps, double carrier_freq, double cos_angle) {
  return carrier_freq * speed_mps / kSpeedOfLight * cos_angle;
}

PathSet draw_paths(const ChannelEnsemble& e, double d_true, double carrier_freq, Rng& rng) {
  e.validate();
  if (!(d_true >= 0.0)) throw InvalidArgument("draw_paths: d_true must be >= 0");
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::exponential_distribution<double> excess(1.0 / e.excess_mean_m);
  std::uniform_int_distribution<int> count(e.min_paths, e.max_paths);

  PathSet set;
  set.snr_db = e.snr_db;
  if (e.los) {
    set.paths.push_back({d_true / kSpeedOfLight, doppler_shift(e.speed_mps, carrier_freq, std::cos(angle(rng))),
                         std::polar(e.los_gain, angle(rng))});
  }
  const int k = count(rng);
  const double s = std::sqrt(e.scatter_power / 2.0);
  for (int i = 0; i < k; ++i) {
    const double delay = (d_true + excess(rng)) / kSpeedOfLight;
    const double nu = doppler_shift(e.speed_mps, carrier_freq, std::cos(angle(rng)));
    const double re = gauss(rng);
    const double im = gauss(rng);
    set.paths.push_back({delay, nu, cd(s * re, s * im)});
  }
  return set;
}

}  // namespace pseudolat
