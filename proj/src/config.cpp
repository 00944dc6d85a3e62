#include "pseudolat/config.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <json.hpp>

#include "pseudolat/errors.hpp"
#include "pseudolat/io.hpp"

namespace pseudolat {

using Json = nlohmann::json;

namespace {

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

// View of one JSON object that tracks which keys were consumed, so leftovers can be rejected.
class Object {
 public:
  Object(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  const Json& get(std::string_view key) {
    const std::string k(key);
    if (!j_.contains(k)) throw ConfigError(field(key), "required field missing");
    seen_.insert(k);
    return j_.at(k);
  }

  std::string field(std::string_view key) const { return join(path_, key); }

  double number(std::string_view key) {
    const Json& v = get(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(field(key), "must be finite");
    return d;
  }
  double number_or(std::string_view key, double fallback) { return has(key) ? number(key) : fallback; }

  long long integer(std::string_view key) {
    const Json& v = get(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<long long>();
  }
  long long integer_or(std::string_view key, long long fallback) { return has(key) ? integer(key) : fallback; }

  std::uint64_t unsigned_integer(std::string_view key) {
    const Json& v = get(key);
    if (!v.is_number_unsigned()) throw ConfigError(field(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean_or(std::string_view key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = get(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(std::string_view key) {
    const Json& v = get(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  Position3 position(std::string_view key) {
    const Json& v = get(key);
    if (!v.is_array() || v.size() != 3) throw ConfigError(field(key), "expected [x, y, z]");
    Position3 p;
    double* out[] = {&p.x, &p.y, &p.z};
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_number()) throw ConfigError(field(key), "expected [x, y, z]");
      *out[i] = v[i].get<double>();
    }
    if (!p.finite()) throw ConfigError(field(key), "coordinates must be finite");
    return p;
  }

  Object child(std::string_view key) { return Object(get(key), field(key)); }

  // Rejects any key that was never read.
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown field");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto guarded(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(field, e.what());
  }
}

int to_int(long long v, const std::string& field) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(field, "integer out of range");
  }
  return static_cast<int>(v);
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
  }
}

void check_version(Object& root) {
  if (root.integer("version") != kConfigVersion) {
    throw ConfigError("version", "unsupported version (expected " + std::to_string(kConfigVersion) + ")");
  }
}

std::string read_name(Object& o, const std::string& fallback) {
  if (!o.has("name")) return fallback;
  std::string name = o.string("name");
  if (name.empty() || name.find_first_of(",\"\n\r") != std::string::npos) {
    throw ConfigError(o.field("name"), "must be non-empty without commas, quotes or newlines");
  }
  return name;
}

HistogramSpec read_histogram(Object& root) {
  HistogramSpec h;
  if (!root.has("histogram")) return h;
  Object o = root.child("histogram");
  h.bin_width = o.number("bin_width_m");
  h.max = o.number("max_m");
  o.finish();
  return h;
}

WaveformConfig read_waveform(Object o, bool with_scheme, bool with_numerology) {
  WaveformConfig w;
  if (with_scheme) {
    const std::string s = o.string("scheme");
    w.scheme = guarded(o.field("scheme"), [&] { return scheme_from_string(s); });
  }
  w.n_subcarriers = to_int(o.integer_or("n_subcarriers", w.n_subcarriers), o.field("n_subcarriers"));
  if (with_numerology) {
    w.n_symbols = to_int(o.integer("n_symbols"), o.field("n_symbols"));
    w.subcarrier_spacing = o.number("subcarrier_spacing_hz");
  }
  w.carrier_freq = o.number_or("carrier_freq_hz", w.carrier_freq);
  w.cp_fraction = o.number_or("cp_fraction", w.cp_fraction);
  w.oversample = to_int(o.integer_or("oversample", w.oversample), o.field("oversample"));
  w.threshold_db = o.number_or("threshold_db", w.threshold_db);
  w.min_peak_to_floor_db = o.number_or("min_peak_to_floor_db", w.min_peak_to_floor_db);
  w.delay_interp = to_int(o.integer_or("delay_interp", w.delay_interp), o.field("delay_interp"));
  w.ofdm_noncoherent = o.boolean_or("ofdm_noncoherent", w.ofdm_noncoherent);
  if (o.has("pilot_seed")) w.pilot_seed = o.unsigned_integer("pilot_seed");
  o.finish();
  return w;
}

ChannelEnsemble read_ensemble(Object o) {
  ChannelEnsemble e;
  e.los = o.boolean_or("los", e.los);
  e.los_gain = o.number_or("los_gain", e.los_gain);
  e.min_paths = to_int(o.integer_or("min_paths", e.min_paths), o.field("min_paths"));
  e.max_paths = to_int(o.integer_or("max_paths", e.max_paths), o.field("max_paths"));
  e.excess_mean_m = o.number_or("excess_mean_m", e.excess_mean_m);
  e.scatter_power = o.number_or("scatter_power", e.scatter_power);
  e.speed_mps = o.number_or("speed_mps", e.speed_mps);
  if (o.has("snr_db")) {
    // null disables noise
    const Json& v = o.get("snr_db");
    if (v.is_null()) {
      e.snr_db = std::numeric_limits<double>::infinity();
    } else {
      e.snr_db = o.number("snr_db");
    }
  }
  o.finish();
  return e;
}

TrajectorySpec read_trajectory(Object o, std::size_t& linear_samples) {
  const std::string kind = o.string("kind");
  TrajectorySpec spec = TrajectorySpec::circular({0, 0, 0}, 1.0, 1.0);
  if (kind == "circular") {
    const Position3 center = o.position("center");
    const double radius = o.number("radius");
    const double omega = o.number("angular_speed");
    const double phase0 = o.number_or("phase0", 0.0);
    spec = guarded(o.field("kind"), [&] { return TrajectorySpec::circular(center, radius, omega, phase0); });
  } else if (kind == "linear") {
    const Position3 start = o.position("start");
    const Position3 velocity = o.position("velocity");
    const long long n = o.integer("samples");
    if (n < 3) throw ConfigError(o.field("samples"), "must be >= 3");
    linear_samples = static_cast<std::size_t>(n);
    spec = guarded(o.field("kind"), [&] { return TrajectorySpec::linear(start, velocity); });
  } else {
    throw ConfigError(o.field("kind"), "expected \"circular\" or \"linear\"");
  }
  o.finish();
  return spec;
}

SolveOptions read_solver(Object o) {
  SolveOptions s;
  s.max_iter = to_int(o.integer_or("max_iter", s.max_iter), o.field("max_iter"));
  s.grad_tol = o.number_or("grad_tol", s.grad_tol);
  s.step_tol = o.number_or("step_tol", s.step_tol);
  s.damping0 = o.number_or("damping0", s.damping0);
  if (o.has("multistart_grid")) {
    const Json& g = o.get("multistart_grid");
    if (!g.is_array() || g.size() != 3) throw ConfigError(o.field("multistart_grid"), "expected [nx, ny, nz]");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!g[i].is_number_integer()) throw ConfigError(o.field("multistart_grid"), "expected integers");
      s.multistart_grid[i] = to_int(g[i].get<long long>(), o.field("multistart_grid"));
    }
  }
  if (o.has("bounds")) {
    Object b = o.child("bounds");
    s.bounds.min = b.position("min");
    s.bounds.max = b.position("max");
    b.finish();
  }
  s.ambiguity_residual_rel = o.number_or("ambiguity_residual_rel", s.ambiguity_residual_rel);
  s.ambiguity_residual_abs = o.number_or("ambiguity_residual_abs", s.ambiguity_residual_abs);
  s.ambiguity_separation = o.number_or("ambiguity_separation", s.ambiguity_separation);
  s.huber_k = o.number_or("huber_k", s.huber_k);
  s.huber_sigma0 = o.number_or("huber_sigma0", s.huber_sigma0);
  s.huber_eta = o.number_or("huber_eta", s.huber_eta);
  o.finish();
  return s;
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view json_text) {
  const Json j = parse_json(json_text);
  Object root(j, "");
  check_version(root);
  ScenarioConfig cfg;
  cfg.name = read_name(root, cfg.name);
  cfg.trajectory = read_trajectory(root.child("trajectory"), cfg.linear_samples);
  cfg.dt = root.number("dt");
  {
    Object t = root.child("target");
    cfg.target.start = t.position("position");
    if (t.has("velocity")) cfg.target.velocity = t.position("velocity");
    t.finish();
  }
  if (root.has("obstacles")) {
    const Json& arr = root.get("obstacles");
    if (!arr.is_array()) throw ConfigError("obstacles", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Object o(arr[i], "obstacles[" + std::to_string(i) + "]");
      cfg.obstacles.push_back({o.position("min"), o.position("max")});
      o.finish();
    }
  }
  if (root.has("noise")) {
    Object n = root.child("noise");
    cfg.noise.sigma0 = n.number("sigma0");
    cfg.noise.eta = n.number("eta");
    cfg.noise.nlos_bias_mean = n.number("nlos_bias_mean");
    n.finish();
  }
  if (root.has("waveform_backend")) {
    Object w = root.child("waveform_backend");
    WaveformBackend b;
    b.waveform = read_waveform(w.child("waveform"), true, true);
    b.los_ensemble = read_ensemble(w.child("los_ensemble"));
    b.nlos_ensemble = read_ensemble(w.child("nlos_ensemble"));
    w.finish();
    cfg.waveform = b;
  }
  cfg.n_revolutions = to_int(root.integer("n_revolutions"), "n_revolutions");
  if (root.has("relocation")) {
    Object r = root.child("relocation");
    RelocationPolicy p;
    p.min_radius = r.number("min_radius");
    p.shrink_factor = r.number("shrink_factor");
    p.max_center_step = r.number("max_center_step");
    p.altitude = r.number("altitude");
    r.finish();
    cfg.relocation = p;
  }
  if (root.has("solver")) cfg.solver = read_solver(root.child("solver"));
  cfg.runs = to_int(root.integer("runs"), "runs");
  cfg.base_seed = root.unsigned_integer("base_seed");
  cfg.histogram = read_histogram(root);
  root.finish();
  cfg.validate();
  return cfg;
}

WaveformComparisonConfig parse_waveform_comparison(std::string_view json_text) {
  const Json j = parse_json(json_text);
  Object root(j, "");
  check_version(root);
  WaveformComparisonConfig cfg;
  cfg.name = read_name(root, cfg.name);
  {
    const Json& arr = root.get("spacings");
    if (!arr.is_array()) throw ConfigError("spacings", "expected an array");
    cfg.spacings.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Object s(arr[i], "spacings[" + std::to_string(i) + "]");
      SpacingSetting setting;
      setting.delta_f_hz = s.number("delta_f_hz");
      setting.n_symbols = to_int(s.integer("n_symbols"), s.field("n_symbols"));
      s.finish();
      cfg.spacings.push_back(setting);
    }
  }
  if (root.has("waveform")) cfg.base = read_waveform(root.child("waveform"), false, false);
  cfg.ensemble = read_ensemble(root.child("ensemble"));
  {
    Object g = root.child("geometry");
    cfg.altitude_m = g.number("altitude_m");
    cfg.horizontal_min_m = g.number("horizontal_min_m");
    cfg.horizontal_max_m = g.number("horizontal_max_m");
    g.finish();
  }
  cfg.trials = to_int(root.integer("trials"), "trials");
  cfg.base_seed = root.unsigned_integer("base_seed");
  cfg.histogram = read_histogram(root);
  root.finish();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) { return parse_scenario(read_text_file(path)); }

WaveformComparisonConfig load_waveform_comparison(const std::filesystem::path& path) {
  return parse_waveform_comparison(read_text_file(path));
}

}  // namespace pseudolat
