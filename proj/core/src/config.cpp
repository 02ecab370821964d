#include "bisim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "bisim/errors.hpp"

namespace bisim {
namespace {

// Constant-velocity targets become a three-waypoint track this long on each side of t = 0.
constexpr double kTrackHorizon = 1e4;  // s

std::string where(const YAML::Node& node) {
  const auto mark = node.Mark();
  if (mark.is_null()) return {};
  return " (line " + std::to_string(mark.line + 1) + ", column " + std::to_string(mark.column + 1) + ")";
}

[[noreturn]] void fail(const std::string& field, const std::string& message, const YAML::Node& node = {}) {
  throw ConfigError(field + ": " + message + (node ? where(node) : std::string{}));
}

void check_keys(const YAML::Node& node, const std::string& field, std::initializer_list<const char*> allowed) {
  if (!node) return;
  if (!node.IsMap()) fail(field, "expected a mapping", node);
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(field + "." + key, "unknown key", kv.first);
    }
  }
}

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) fail(field, "expected a scalar", node);
  try {
    return node.as<T>();
  } catch (const YAML::BadConversion&) {
    fail(field, "cannot convert '" + node.Scalar() + "'", node);
  }
}

template <typename T>
T get(const YAML::Node& parent, const std::string& path, const char* key, T fallback) {
  const YAML::Node node = parent[key];
  if (!node) return fallback;
  return scalar<T>(node, join(path, key));
}

double get_finite(const YAML::Node& parent, const std::string& path, const char* key, double fallback) {
  const double v = get<double>(parent, path, key, fallback);
  if (!std::isfinite(v)) fail(join(path, key), "must be finite", parent[key]);
  return v;
}

double get_positive(const YAML::Node& parent, const std::string& path, const char* key, double fallback) {
  const double v = get_finite(parent, path, key, fallback);
  if (v <= 0.0) fail(join(path, key), "must be positive", parent[key]);
  return v;
}

std::size_t get_count(const YAML::Node& parent, const std::string& path, const char* key, std::size_t fallback) {
  const YAML::Node node = parent[key];
  if (!node) return fallback;
  const auto v = scalar<long long>(node, join(path, key));
  if (v < 0) fail(join(path, key), "must be non-negative", node);
  return static_cast<std::size_t>(v);
}

std::vector<double> number_list(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) fail(field, "expected a list of numbers", node);
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    out.push_back(scalar<double>(node[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Vec3 vec3(const YAML::Node& node, const std::string& field) {
  const auto v = number_list(node, field);
  if (v.size() != 3) fail(field, "expected [x, y, z]", node);
  for (double c : v) {
    if (!std::isfinite(c)) fail(field, "must be finite", node);
  }
  return {v[0], v[1], v[2]};
}

Complex complex_value(const YAML::Node& node, const std::string& field) {
  if (node.IsScalar()) return {scalar<double>(node, field), 0.0};
  const auto v = number_list(node, field);
  if (v.size() != 2) fail(field, "expected a number or [re, im]", node);
  return {v[0], v[1]};
}

Window window_value(const YAML::Node& parent, const std::string& path, const char* key, Window fallback) {
  const YAML::Node node = parent[key];
  if (!node) return fallback;
  const auto name = scalar<std::string>(node, join(path, key));
  const auto w = parse_window(name);
  if (!w) fail(join(path, key), "unknown window '" + name + "' (rect, hann, gaussian)", node);
  return *w;
}

JonesMatrix jones_value(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence() || node.size() != 2) fail(field, "expected [[hh, hv], [vh, vv]]", node);
  JonesMatrix j;
  for (int r = 0; r < 2; ++r) {
    const YAML::Node row = node[r];
    if (!row.IsSequence() || row.size() != 2) fail(field, "expected [[hh, hv], [vh, vv]]", node);
    for (int c = 0; c < 2; ++c) {
      j(r, c) = complex_value(row[c], field + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return j;
}

// Scattering length from `amplitude` (complex, m) or `rcs` (m²).
Complex amplitude_value(const YAML::Node& node, const std::string& field, Complex fallback) {
  if (node["amplitude"] && node["rcs"]) fail(field, "give either amplitude or rcs, not both", node);
  if (node["rcs"]) {
    const double rcs = get_finite(node, field, "rcs", 0.0);
    if (rcs < 0.0) fail(join(field, "rcs"), "must be non-negative", node["rcs"]);
    return {scattering_length_for_rcs(rcs), 0.0};
  }
  if (node["amplitude"]) return complex_value(node["amplitude"], join(field, "amplitude"));
  return fallback;
}

Trajectory trajectory_value(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence() || node.size() == 0) fail(field, "expected a list of [t, x, y, z]", node);
  std::vector<Waypoint> points;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const auto item = field + "[" + std::to_string(i) + "]";
    const auto v = number_list(node[i], item);
    if (v.size() != 4) fail(item, "expected [t, x, y, z]", node[i]);
    points.push_back({v[0], {v[1], v[2], v[3]}});
  }
  try {
    return Trajectory(std::move(points));
  } catch (const Error& e) {
    fail(field, e.what(), node);
  }
}

// Motion of a target host: trajectory, or position (+ optional velocity).
Trajectory track_value(const YAML::Node& node, const std::string& field) {
  if (node["trajectory"]) {
    if (node["position"] || node["velocity"]) fail(field, "trajectory excludes position/velocity", node);
    return trajectory_value(node["trajectory"], join(field, "trajectory"));
  }
  const Vec3 p = node["position"] ? vec3(node["position"], join(field, "position")) : Vec3::Zero();
  const Vec3 v = node["velocity"] ? vec3(node["velocity"], join(field, "velocity")) : Vec3::Zero();
  if (v.isZero(0.0)) return Trajectory::stationary(p);
  return Trajectory({{-kTrackHorizon, p - v * kTrackHorizon}, {0.0, p}, {kTrackHorizon, p + v * kTrackHorizon}});
}

NodeMotion node_value(const YAML::Node& node, const std::string& field) {
  check_keys(node, field, {"id", "position", "velocity", "trajectory"});
  NodeMotion m;
  if (!node["id"]) fail(join(field, "id"), "missing", node);
  m.id = scalar<std::string>(node["id"], join(field, "id"));
  if (m.id.empty()) fail(join(field, "id"), "must not be empty", node["id"]);
  if (node["trajectory"]) {
    if (node["position"] || node["velocity"]) fail(field, "trajectory excludes position/velocity", node);
    m.motion = trajectory_value(node["trajectory"], join(field, "trajectory"));
  } else {
    if (!node["position"]) fail(join(field, "position"), "missing", node);
    NodePose pose;
    pose.node_id = m.id;
    pose.position = vec3(node["position"], join(field, "position"));
    if (node["velocity"]) pose.velocity = vec3(node["velocity"], join(field, "velocity"));
    m.motion = pose;
  }
  return m;
}

PointScatterer scatterer_value(const YAML::Node& node, const std::string& field) {
  check_keys(node, field, {"offset", "amplitude", "rcs", "jones"});
  PointScatterer s;
  if (node["offset"]) s.offset = vec3(node["offset"], join(field, "offset"));
  s.amplitude = amplitude_value(node, field, s.amplitude);
  if (node["jones"]) s.jones = jones_value(node["jones"], join(field, "jones"));
  return s;
}

TargetSpec target_value(const YAML::Node& node, const std::string& field) {
  if (!node.IsMap()) fail(field, "expected a mapping", node);
  TargetSpec spec;
  if (!node["id"]) fail(join(field, "id"), "missing", node);
  spec.id = scalar<std::string>(node["id"], join(field, "id"));
  const auto type = get<std::string>(node, field, "type", "point");
  if (type == "point") {
    check_keys(node, field, {"id", "type", "position", "velocity", "trajectory", "amplitude", "rcs", "jones"});
    RigidTarget t;
    PointScatterer s;
    s.amplitude = amplitude_value(node, field, s.amplitude);
    if (node["jones"]) s.jones = jones_value(node["jones"], join(field, "jones"));
    t.scatterers.push_back(s);
    t.trajectory = track_value(node, field);
    spec.model = std::move(t);
  } else if (type == "rigid") {
    check_keys(node, field, {"id", "type", "position", "velocity", "trajectory", "yaw_deg", "scatterers"});
    RigidTarget t;
    const YAML::Node list = node["scatterers"];
    if (!list || !list.IsSequence() || list.size() == 0) {
      fail(join(field, "scatterers"), "needs at least one scatterer", node);
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      t.scatterers.push_back(scatterer_value(list[i], join(field, "scatterers") + "[" + std::to_string(i) + "]"));
    }
    t.yaw = deg2rad(get_finite(node, field, "yaw_deg", 0.0));
    t.trajectory = track_value(node, field);
    spec.model = std::move(t);
  } else if (type == "rotor") {
    check_keys(node, field, {"id", "type", "position", "velocity", "trajectory", "hub_offset", "axis", "radius",
                             "rate", "blades", "samples_per_blade", "amplitude", "rcs", "jones",
                             "initial_angle_deg"});
    Rotor r;
    if (node["hub_offset"]) r.hub_offset = vec3(node["hub_offset"], join(field, "hub_offset"));
    if (node["axis"]) {
      const Vec3 axis = vec3(node["axis"], join(field, "axis"));
      if (axis.norm() == 0.0) fail(join(field, "axis"), "must be non-zero", node["axis"]);
      r.axis = axis.normalized();
    }
    r.blade_radius = get_positive(node, field, "radius", r.blade_radius);
    r.rate = get_finite(node, field, "rate", r.rate);
    r.n_blades = get_count(node, field, "blades", r.n_blades);
    r.samples_per_blade = get_count(node, field, "samples_per_blade", r.samples_per_blade);
    r.sample_amplitude = amplitude_value(node, field, r.sample_amplitude);
    if (node["jones"]) r.jones = jones_value(node["jones"], join(field, "jones"));
    r.initial_angle = deg2rad(get_finite(node, field, "initial_angle_deg", 0.0));
    r.trajectory = track_value(node, field);
    try {
      r.validate();
    } catch (const ConfigError& e) {
      fail(field, e.what(), node);
    }
    spec.model = std::move(r);
  } else {
    fail(join(field, "type"), "unknown target type '" + type + "' (point, rigid, rotor)", node["type"]);
  }
  return spec;
}

void parse_scene(const YAML::Node& node, SceneConfig& scene) {
  const std::string path = "scene";
  if (!node) fail(path, "missing");
  check_keys(node, path, {"transmitters", "receivers", "links", "targets", "clutter", "include_los", "start_time"});
  const auto nodes = [&](const char* key, std::vector<NodeMotion>& out) {
    const YAML::Node list = node[key];
    const auto field = join(path, key);
    if (!list || !list.IsSequence() || list.size() == 0) fail(field, "needs at least one node", node);
    for (std::size_t i = 0; i < list.size(); ++i) out.push_back(node_value(list[i], field + "[" + std::to_string(i) + "]"));
  };
  nodes("transmitters", scene.transmitters);
  nodes("receivers", scene.receivers);

  if (const YAML::Node list = node["links"]) {
    if (!list.IsSequence()) fail("scene.links", "expected a list of [tx, rx]", list);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto field = "scene.links[" + std::to_string(i) + "]";
      if (!list[i].IsSequence() || list[i].size() != 2) fail(field, "expected [tx, rx]", list[i]);
      scene.links.push_back({scalar<std::string>(list[i][0], field), scalar<std::string>(list[i][1], field)});
    }
  } else {
    for (const auto& tx : scene.transmitters) {
      for (const auto& rx : scene.receivers) scene.links.push_back({tx.id, rx.id});
    }
  }

  if (const YAML::Node list = node["targets"]) {
    if (!list.IsSequence()) fail("scene.targets", "expected a list", list);
    for (std::size_t i = 0; i < list.size(); ++i) {
      scene.targets.push_back(target_value(list[i], "scene.targets[" + std::to_string(i) + "]"));
    }
  }
  if (const YAML::Node list = node["clutter"]) {
    if (!list.IsSequence()) fail("scene.clutter", "expected a list", list);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto field = "scene.clutter[" + std::to_string(i) + "]";
      check_keys(list[i], field, {"position", "amplitude", "rcs"});
      if (!list[i]["position"]) fail(join(field, "position"), "missing", list[i]);
      ClutterPoint c;
      c.position = vec3(list[i]["position"], join(field, "position"));
      c.amplitude = amplitude_value(list[i], field, c.amplitude);
      scene.clutter.push_back(c);
    }
  }
  scene.include_los = get<bool>(node, path, "include_los", scene.include_los);
  scene.start_time = get_finite(node, path, "start_time", scene.start_time);
}

void parse_waveform(const YAML::Node& node, WaveformConfig& w) {
  const std::string path = "waveform";
  if (!node) return;
  check_keys(node, path, {"carrier_hz", "bandwidth_hz", "subcarriers", "symbols", "symbol_duration"});
  w.carrier_hz = get_positive(node, path, "carrier_hz", w.carrier_hz);
  w.bandwidth_hz = get_positive(node, path, "bandwidth_hz", w.bandwidth_hz);
  w.n_subcarriers = get_count(node, path, "subcarriers", w.n_subcarriers);
  w.n_symbols = get_count(node, path, "symbols", w.n_symbols);
  if (w.n_subcarriers == 0) fail("waveform.subcarriers", "must be at least 1", node["subcarriers"]);
  if (w.n_symbols == 0) fail("waveform.symbols", "must be at least 1", node["symbols"]);
  w.symbol_duration = get_positive(node, path, "symbol_duration", 1.0 / w.subcarrier_spacing());
  try {
    w.validate();
  } catch (const ConfigError& e) {
    fail(path, e.what(), node);
  }
}

void parse_processing(const YAML::Node& node, ProcessingConfig& p) {
  const std::string path = "processing";
  if (!node) return;
  check_keys(node, path, {"mode", "fast_window", "slow_window", "background_subtract", "clean_paths", "clean",
                          "threshold_db", "exclude_zero_doppler", "max_detections", "gate_center_ns",
                          "gate_width_ns", "stft", "spectrogram_link", "spectrogram_delay_bin"});
  const auto mode = get<std::string>(node, path, "mode", "geometric");
  if (mode == "geometric") {
    p.mode = SynthMode::kGeometric;
  } else if (mode == "fixed") {
    p.mode = SynthMode::kFixed;
  } else {
    fail("processing.mode", "expected geometric or fixed", node["mode"]);
  }
  p.windows.fast = window_value(node, path, "fast_window", p.windows.fast);
  p.windows.slow = window_value(node, path, "slow_window", p.windows.slow);
  p.background_subtract = get<bool>(node, path, "background_subtract", p.background_subtract);
  p.clean_paths = get_count(node, path, "clean_paths", p.clean_paths);
  if (const YAML::Node c = node["clean"]) {
    const std::string cp = "processing.clean";
    check_keys(c, cp, {"oversample", "max_cycles", "floor_margin_db"});
    p.clean.oversample = get_count(c, cp, "oversample", p.clean.oversample);
    if (p.clean.oversample == 0) fail(join(cp, "oversample"), "must be at least 1", c["oversample"]);
    p.clean.max_cycles = get_count(c, cp, "max_cycles", p.clean.max_cycles);
    p.clean.floor_margin_db = get_finite(c, cp, "floor_margin_db", p.clean.floor_margin_db);
  }
  p.threshold_db = get_finite(node, path, "threshold_db", p.threshold_db);
  p.exclude_zero_doppler = get<bool>(node, path, "exclude_zero_doppler", p.exclude_zero_doppler);
  p.max_detections = get_count(node, path, "max_detections", p.max_detections);
  p.gate_center_ns = get_finite(node, path, "gate_center_ns", p.gate_center_ns);
  p.gate_width_ns = get_positive(node, path, "gate_width_ns", p.gate_width_ns);
  if (const YAML::Node s = node["stft"]) {
    const std::string sp = "processing.stft";
    check_keys(s, sp, {"fft", "hop", "window"});
    p.stft.fft_size = get_count(s, sp, "fft", p.stft.fft_size);
    p.stft.hop = get_count(s, sp, "hop", p.stft.hop);
    p.stft.window = window_value(s, sp, "window", p.stft.window);
  }
  p.spectrogram_link = get<std::string>(node, path, "spectrogram_link", p.spectrogram_link);
  if (node["spectrogram_delay_bin"]) p.spectrogram_delay_bin = get_count(node, path, "spectrogram_delay_bin", 0);
}

void parse_noise(const YAML::Node& node, NoiseConfig& n) {
  const std::string path = "noise";
  if (!node) return;
  check_keys(node, path, {"snr_db", "seed"});
  if (const YAML::Node s = node["snr_db"]) {
    const auto text = scalar<std::string>(s, "noise.snr_db");
    n.snr_db = (text == "inf" || text == ".inf" || text == "none") ? kNoiselessSnr : scalar<double>(s, "noise.snr_db");
    if (std::isnan(n.snr_db) || n.snr_db == -kNoiselessSnr) fail("noise.snr_db", "must be a number or inf", s);
  }
  if (node["seed"]) n.seed = scalar<std::uint64_t>(node["seed"], "noise.seed");
}

AngleGrid grid_value(const YAML::Node& node, const std::string& path, AngleGrid grid) {
  if (!node) return grid;
  check_keys(node, path, {"az_tx", "el_tx", "az_rx", "el_rx"});
  const auto axis = [&](const char* key, std::vector<double>& out) {
    if (node[key]) out = number_list(node[key], join(path, key));
  };
  axis("az_tx", grid.az_tx);
  axis("el_tx", grid.el_tx);
  axis("az_rx", grid.az_rx);
  axis("el_rx", grid.el_rx);
  try {
    grid.validate();
  } catch (const ConfigError& e) {
    fail(path, e.what(), node);
  }
  return grid;
}

FrequencyBand band_value(const YAML::Node& node, const std::string& path, FrequencyBand band) {
  if (!node) return band;
  check_keys(node, path, {"f_lo_hz", "f_hi_hz", "points"});
  band.f_lo = get_positive(node, path, "f_lo_hz", band.f_lo);
  band.f_hi = get_positive(node, path, "f_hi_hz", band.f_hi);
  band.n_points = get_count(node, path, "points", band.n_points);
  try {
    band.validate();
  } catch (const ConfigError& e) {
    fail(path, e.what(), node);
  }
  return band;
}

void parse_reflectivity(const YAML::Node& node, ReflectivityConfig& r) {
  const std::string path = "reflectivity";
  if (!node) return;
  check_keys(node, path, {"target", "grid", "d_tx", "d_rx", "band", "window", "time", "oversample"});
  r.target = get<std::string>(node, path, "target", r.target);
  r.grid = grid_value(node["grid"], "reflectivity.grid", r.grid);
  r.d_tx = get_positive(node, path, "d_tx", r.d_tx);
  r.d_rx = get_positive(node, path, "d_rx", r.d_rx);
  r.band = band_value(node["band"], "reflectivity.band", r.band);
  r.window = window_value(node, path, "window", r.window);
  r.time = get_finite(node, path, "time", r.time);
  r.oversample = get_count(node, path, "oversample", r.oversample);
  if (r.oversample == 0) fail("reflectivity.oversample", "must be at least 1", node["oversample"]);
}

void parse_flyover(const YAML::Node& node, FlyoverConfig& f) {
  const std::string path = "flyover";
  if (!node) return;
  check_keys(node, path, {"target", "fixed_angle_deg", "sweep", "d_tx", "d_rx", "band", "window", "time",
                          "oversample", "gate_center_ns", "gate_width_ns", "spread_threshold_db"});
  f.target = get<std::string>(node, path, "target", f.target);
  f.fixed_angle = get_finite(node, path, "fixed_angle_deg", f.fixed_angle);
  if (const YAML::Node s = node["sweep"]) {
    const std::string sp = "flyover.sweep";
    check_keys(s, sp, {"start_deg", "stop_deg", "step_deg"});
    f.sweep.start = get_finite(s, sp, "start_deg", f.sweep.start);
    f.sweep.stop = get_finite(s, sp, "stop_deg", f.sweep.stop);
    f.sweep.step = get_positive(s, sp, "step_deg", f.sweep.step);
    if (f.sweep.stop < f.sweep.start) fail(sp, "stop_deg must not be below start_deg", s);
  }
  f.d_tx = get_positive(node, path, "d_tx", f.d_tx);
  f.d_rx = get_positive(node, path, "d_rx", f.d_rx);
  f.band = band_value(node["band"], "flyover.band", f.band);
  f.window = window_value(node, path, "window", f.window);
  f.time = get_finite(node, path, "time", f.time);
  f.oversample = get_count(node, path, "oversample", f.oversample);
  if (f.oversample == 0) fail("flyover.oversample", "must be at least 1", node["oversample"]);
  f.gate_center_ns = get_finite(node, path, "gate_center_ns", f.gate_center_ns);
  f.gate_width_ns = get_positive(node, path, "gate_width_ns", f.gate_width_ns);
  f.spread_threshold_db = get_finite(node, path, "spread_threshold_db", f.spread_threshold_db);
  if (f.spread_threshold_db >= 0.0) fail("flyover.spread_threshold_db", "must be below 0 dB", node["spread_threshold_db"]);
}

void parse_localize(const YAML::Node& node, LocalizeConfig& l, double wavelength) {
  const std::string path = "localize";
  if (!node) return;
  check_keys(node, path, {"source", "target", "observations", "dim", "grid_cell", "grid_scale", "max_grid_cells",
                          "max_iterations", "step_tolerance", "ambiguity_tolerance", "max_candidates"});
  const auto source = get<std::string>(node, path, "source", node["observations"] ? "listed" : "measured");
  if (source == "measured") {
    l.source = ObservationSource::kMeasured;
  } else if (source == "truth") {
    l.source = ObservationSource::kTruth;
  } else if (source == "listed") {
    l.source = ObservationSource::kListed;
  } else {
    fail("localize.source", "expected measured, truth or listed", node["source"]);
  }
  l.target = get<std::string>(node, path, "target", l.target);
  if (const YAML::Node list = node["observations"]) {
    if (!list.IsSequence()) fail("localize.observations", "expected a list", list);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto field = "localize.observations[" + std::to_string(i) + "]";
      const YAML::Node o = list[i];
      check_keys(o, field, {"tx", "rx", "excess_delay_ns", "doppler_hz", "wavelength", "weight", "timestamp"});
      BistaticObservation obs;
      if (!o["tx"] || !o["rx"]) fail(field, "tx and rx are required", o);
      obs.tx_id = scalar<std::string>(o["tx"], join(field, "tx"));
      obs.rx_id = scalar<std::string>(o["rx"], join(field, "rx"));
      obs.excess_delay = get_finite(o, field, "excess_delay_ns", 0.0) * 1e-9;
      if (obs.excess_delay < 0.0) fail(join(field, "excess_delay_ns"), "must be non-negative", o["excess_delay_ns"]);
      obs.doppler = get_finite(o, field, "doppler_hz", 0.0);
      obs.wavelength = get_positive(o, field, "wavelength", wavelength);
      obs.weight = get_positive(o, field, "weight", 1.0);
      obs.timestamp = get_finite(o, field, "timestamp", 0.0);
      l.observations.push_back(obs);
    }
  }
  const int dim = get<int>(node, path, "dim", l.options.dim);
  if (dim != 2 && dim != 3) fail("localize.dim", "must be 2 or 3", node["dim"]);
  l.options.dim = dim;
  l.options.grid_cell = get_positive(node, path, "grid_cell", l.options.grid_cell);
  l.options.grid_scale = get_positive(node, path, "grid_scale", l.options.grid_scale);
  l.options.max_grid_cells = get_count(node, path, "max_grid_cells", l.options.max_grid_cells);
  l.options.max_iterations = get_count(node, path, "max_iterations", l.options.max_iterations);
  l.options.step_tolerance = get_positive(node, path, "step_tolerance", l.options.step_tolerance);
  l.options.ambiguity_tolerance = get_positive(node, path, "ambiguity_tolerance", l.options.ambiguity_tolerance);
  l.options.max_candidates = get_count(node, path, "max_candidates", l.options.max_candidates);
}

void parse_focus(const YAML::Node& node, FocusConfig& f) {
  const std::string path = "focus";
  if (!node) return;
  check_keys(node, path, {"target", "transmitters"});
  f.target = get<std::string>(node, path, "target", f.target);
  if (const YAML::Node list = node["transmitters"]) {
    if (!list.IsSequence()) fail("focus.transmitters", "expected a list of ids", list);
    for (std::size_t i = 0; i < list.size(); ++i) {
      f.transmitters.push_back(scalar<std::string>(list[i], "focus.transmitters[" + std::to_string(i) + "]"));
    }
  }
}

void parse_link_budget(const YAML::Node& node, LinkBudget& b, const WaveformConfig& w) {
  const std::string path = "linkbudget";
  b.wavelength = w.wavelength();
  b.n_subcarriers = w.n_subcarriers;
  b.n_symbols = w.n_symbols;
  if (!node) return;
  check_keys(node, path, {"tx_power_dbm", "tx_gain_dbi", "rx_gain_dbi", "d_tx", "d_rx", "rcs"});
  b.tx_power_dbm = get_finite(node, path, "tx_power_dbm", b.tx_power_dbm);
  b.tx_gain_dbi = get_finite(node, path, "tx_gain_dbi", b.tx_gain_dbi);
  b.rx_gain_dbi = get_finite(node, path, "rx_gain_dbi", b.rx_gain_dbi);
  b.d_tx = get_positive(node, path, "d_tx", b.d_tx);
  b.d_rx = get_positive(node, path, "d_rx", b.d_rx);
  b.rcs = get_positive(node, path, "rcs", b.rcs);
}

void parse_output(const YAML::Node& node, OutputConfig& o) {
  const std::string path = "output";
  if (!node) return;
  check_keys(node, path, {"directory", "format"});
  o.directory = get<std::string>(node, path, "directory", o.directory.string());
  o.format = get<std::string>(node, path, "format", o.format);
}

RunConfig from_yaml(const YAML::Node& root, std::optional<std::uint64_t> seed_override) {
  if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");
  check_keys(root, "config", {"scene", "waveform", "processing", "noise", "reflectivity", "flyover", "localize",
                              "focus", "linkbudget", "output"});
  RunConfig c;
  parse_waveform(root["waveform"], c.waveform);
  parse_scene(root["scene"], c.scene);
  parse_processing(root["processing"], c.processing);
  parse_noise(root["noise"], c.noise);
  parse_reflectivity(root["reflectivity"], c.reflectivity);
  parse_flyover(root["flyover"], c.flyover);
  parse_localize(root["localize"], c.localize, c.waveform.wavelength());
  parse_focus(root["focus"], c.focus);
  parse_link_budget(root["linkbudget"], c.link_budget, c.waveform);
  parse_output(root["output"], c.output);
  if (seed_override) c.noise.seed = seed_override;
  c.validate();
  return c;
}

[[noreturn]] void rethrow_parse(const YAML::Exception& e, const std::string& source) {
  throw ConfigError(source + ": parse error at line " + std::to_string(e.mark.line + 1) + ", column " +
                    std::to_string(e.mark.column + 1) + ": " + e.msg);
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
nlohmann::json complex_json(Complex c) { return {c.real(), c.imag()}; }
nlohmann::json jones_json(const JonesMatrix& j) {
  return {{complex_json(j(0, 0)), complex_json(j(0, 1))}, {complex_json(j(1, 0)), complex_json(j(1, 1))}};
}
nlohmann::json trajectory_json(const Trajectory& t) {
  auto out = nlohmann::json::array();
  for (const auto& w : t.waypoints()) out.push_back({w.time, w.position.x(), w.position.y(), w.position.z()});
  return out;
}

nlohmann::json node_json(const NodeMotion& n) {
  nlohmann::json j{{"id", n.id}};
  if (const auto* pose = std::get_if<NodePose>(&n.motion)) {
    j["position"] = vec_json(pose->position);
    j["velocity"] = vec_json(pose->velocity);
  } else {
    j["trajectory"] = trajectory_json(std::get<Trajectory>(n.motion));
  }
  return j;
}

nlohmann::json target_json(const TargetSpec& t) {
  nlohmann::json j{{"id", t.id}};
  if (const auto* rigid = std::get_if<RigidTarget>(&t.model)) {
    j["type"] = "rigid";
    j["yaw_deg"] = rad2deg(rigid->yaw);
    j["trajectory"] = trajectory_json(rigid->trajectory);
    auto list = nlohmann::json::array();
    for (const auto& s : rigid->scatterers) {
      list.push_back({{"offset", vec_json(s.offset)}, {"amplitude", complex_json(s.amplitude)},
                      {"jones", jones_json(s.jones)}});
    }
    j["scatterers"] = list;
  } else {
    const auto& r = std::get<Rotor>(t.model);
    j["type"] = "rotor";
    j["trajectory"] = trajectory_json(r.trajectory);
    j["hub_offset"] = vec_json(r.hub_offset);
    j["axis"] = vec_json(r.axis);
    j["radius"] = r.blade_radius;
    j["rate"] = r.rate;
    j["blades"] = r.n_blades;
    j["samples_per_blade"] = r.samples_per_blade;
    j["amplitude"] = complex_json(r.sample_amplitude);
    j["jones"] = jones_json(r.jones);
    j["initial_angle_deg"] = rad2deg(r.initial_angle);
  }
  return j;
}

nlohmann::json band_json(const FrequencyBand& b) {
  return {{"f_lo_hz", b.f_lo}, {"f_hi_hz", b.f_hi}, {"points", b.n_points}};
}

const char* source_name(ObservationSource s) {
  switch (s) {
    case ObservationSource::kMeasured: return "measured";
    case ObservationSource::kTruth: return "truth";
    case ObservationSource::kListed: return "listed";
  }
  return "measured";
}

}  // namespace

const NodeMotion& SceneConfig::node(const std::string& id) const {
  for (const auto* list : {&transmitters, &receivers}) {
    for (const auto& n : *list) {
      if (n.id == id) return n;
    }
  }
  throw ConfigError("unknown node id '" + id + "'");
}

const TargetSpec& SceneConfig::target(const std::string& id) const {
  if (targets.empty()) throw ConfigError("scene.targets: the scene has no targets");
  if (id.empty()) return targets.front();
  for (const auto& t : targets) {
    if (t.id == id) return t;
  }
  throw ConfigError("unknown target id '" + id + "'");
}

void RunConfig::validate() const {
  std::set<std::string> ids;
  const auto unique = [&](const std::string& id, const std::string& field) {
    if (!ids.insert(id).second) throw ConfigError(field + ": duplicate id '" + id + "'");
  };
  for (std::size_t i = 0; i < scene.transmitters.size(); ++i) {
    unique(scene.transmitters[i].id, "scene.transmitters[" + std::to_string(i) + "].id");
  }
  for (std::size_t i = 0; i < scene.receivers.size(); ++i) {
    unique(scene.receivers[i].id, "scene.receivers[" + std::to_string(i) + "].id");
  }
  for (std::size_t i = 0; i < scene.targets.size(); ++i) {
    unique(scene.targets[i].id, "scene.targets[" + std::to_string(i) + "].id");
  }
  if (scene.transmitters.empty()) throw ConfigError("scene.transmitters: needs at least one node");
  if (scene.receivers.empty()) throw ConfigError("scene.receivers: needs at least one node");

  const auto is_in = [](const std::vector<NodeMotion>& list, const std::string& id) {
    return std::any_of(list.begin(), list.end(), [&](const NodeMotion& n) { return n.id == id; });
  };
  std::set<std::string> link_names;
  for (std::size_t i = 0; i < scene.links.size(); ++i) {
    const auto& l = scene.links[i];
    const auto field = "scene.links[" + std::to_string(i) + "]";
    if (!is_in(scene.transmitters, l.tx_id)) throw ConfigError(field + ": unknown transmitter '" + l.tx_id + "'");
    if (!is_in(scene.receivers, l.rx_id)) throw ConfigError(field + ": unknown receiver '" + l.rx_id + "'");
    if (!link_names.insert(l.name()).second) throw ConfigError(field + ": duplicate link '" + l.name() + "'");
  }
  if (scene.links.empty()) throw ConfigError("scene.links: no links");

  const auto target_ref = [&](const std::string& id, const std::string& field) {
    if (id.empty()) return;
    if (std::none_of(scene.targets.begin(), scene.targets.end(), [&](const TargetSpec& t) { return t.id == id; })) {
      throw ConfigError(field + ": unknown target '" + id + "'");
    }
  };
  target_ref(reflectivity.target, "reflectivity.target");
  target_ref(flyover.target, "flyover.target");
  target_ref(localize.target, "localize.target");
  target_ref(focus.target, "focus.target");
  for (const auto& id : focus.transmitters) {
    if (!is_in(scene.transmitters, id)) throw ConfigError("focus.transmitters: unknown transmitter '" + id + "'");
  }
  for (std::size_t i = 0; i < localize.observations.size(); ++i) {
    const auto& o = localize.observations[i];
    const auto field = "localize.observations[" + std::to_string(i) + "]";
    if (!is_in(scene.transmitters, o.tx_id)) throw ConfigError(field + ".tx: unknown transmitter '" + o.tx_id + "'");
    if (!is_in(scene.receivers, o.rx_id)) throw ConfigError(field + ".rx: unknown receiver '" + o.rx_id + "'");
  }
  if (localize.source == ObservationSource::kListed && localize.observations.empty()) {
    throw ConfigError("localize.observations: source 'listed' needs observations");
  }
  if (!processing.spectrogram_link.empty() && !link_names.contains(processing.spectrogram_link)) {
    throw ConfigError("processing.spectrogram_link: unknown link '" + processing.spectrogram_link + "'");
  }
  if (processing.stft.fft_size == 0) throw ConfigError("processing.stft.fft: must be at least 1");
  if (processing.stft.hop == 0) throw ConfigError("processing.stft.hop: must be at least 1");
  if (processing.spectrogram_delay_bin && *processing.spectrogram_delay_bin >= waveform.n_subcarriers) {
    throw ConfigError("processing.spectrogram_delay_bin: exceeds the subcarrier count");
  }
  if (noise.enabled() && !noise.seed) throw ConfigError("noise.seed: required when noise.snr_db is finite");
  if (output.format != "bin" && output.format != "csv") {
    throw ConfigError("output.format: expected bin or csv, got '" + output.format + "'");
  }
  waveform.validate();
}

RunConfig parse_config(const std::string& yaml_text, std::optional<std::uint64_t> seed_override) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    rethrow_parse(e, "config");
  }
  return from_yaml(root, seed_override);
}

RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot read config file");
  std::stringstream text;
  text << in.rdbuf();
  YAML::Node root;
  try {
    root = YAML::Load(text.str());
  } catch (const YAML::ParserException& e) {
    rethrow_parse(e, path.string());
  }
  return from_yaml(root, seed_override);
}

nlohmann::json config_to_json(const RunConfig& c) {
  using nlohmann::json;
  json scene;
  scene["transmitters"] = json::array();
  for (const auto& n : c.scene.transmitters) scene["transmitters"].push_back(node_json(n));
  scene["receivers"] = json::array();
  for (const auto& n : c.scene.receivers) scene["receivers"].push_back(node_json(n));
  scene["links"] = json::array();
  for (const auto& l : c.scene.links) scene["links"].push_back({l.tx_id, l.rx_id});
  scene["targets"] = json::array();
  for (const auto& t : c.scene.targets) scene["targets"].push_back(target_json(t));
  scene["clutter"] = json::array();
  for (const auto& p : c.scene.clutter) {
    scene["clutter"].push_back({{"position", vec_json(p.position)}, {"amplitude", complex_json(p.amplitude)}});
  }
  scene["include_los"] = c.scene.include_los;
  scene["start_time"] = c.scene.start_time;

  const auto& w = c.waveform;
  const json waveform{{"carrier_hz", w.carrier_hz},
                      {"bandwidth_hz", w.bandwidth_hz},
                      {"subcarriers", w.n_subcarriers},
                      {"symbols", w.n_symbols},
                      {"symbol_duration", w.symbol_duration},
                      {"subcarrier_spacing_hz", w.subcarrier_spacing()},
                      {"wavelength", w.wavelength()}};

  const auto& p = c.processing;
  json processing{{"mode", p.mode == SynthMode::kFixed ? "fixed" : "geometric"},
                  {"fast_window", window_name(p.windows.fast)},
                  {"slow_window", window_name(p.windows.slow)},
                  {"background_subtract", p.background_subtract},
                  {"clean_paths", p.clean_paths},
                  {"clean",
                   {{"oversample", p.clean.oversample},
                    {"max_cycles", p.clean.max_cycles},
                    {"floor_margin_db", p.clean.floor_margin_db}}},
                  {"threshold_db", p.threshold_db},
                  {"exclude_zero_doppler", p.exclude_zero_doppler},
                  {"max_detections", p.max_detections},
                  {"gate_center_ns", p.gate_center_ns},
                  {"gate_width_ns", p.gate_width_ns},
                  {"stft", {{"fft", p.stft.fft_size}, {"hop", p.stft.hop}, {"window", window_name(p.stft.window)}}},
                  {"spectrogram_link", p.spectrogram_link}};
  processing["spectrogram_delay_bin"] =
      p.spectrogram_delay_bin ? json(*p.spectrogram_delay_bin) : json("auto");

  json noise{{"snr_db", c.noise.enabled() ? json(c.noise.snr_db) : json("inf")}};
  noise["seed"] = c.noise.seed ? json(*c.noise.seed) : json(nullptr);

  const auto& r = c.reflectivity;
  const json reflectivity{{"target", r.target},
                          {"grid", {{"az_tx", r.grid.az_tx}, {"el_tx", r.grid.el_tx},
                                    {"az_rx", r.grid.az_rx}, {"el_rx", r.grid.el_rx}}},
                          {"d_tx", r.d_tx},
                          {"d_rx", r.d_rx},
                          {"band", band_json(r.band)},
                          {"window", window_name(r.window)},
                          {"time", r.time},
                          {"oversample", r.oversample}};

  const auto& f = c.flyover;
  const json flyover{{"target", f.target},
                     {"fixed_angle_deg", f.fixed_angle},
                     {"sweep", {{"start_deg", f.sweep.start}, {"stop_deg", f.sweep.stop}, {"step_deg", f.sweep.step}}},
                     {"d_tx", f.d_tx},
                     {"d_rx", f.d_rx},
                     {"band", band_json(f.band)},
                     {"window", window_name(f.window)},
                     {"time", f.time},
                     {"oversample", f.oversample},
                     {"gate_center_ns", f.gate_center_ns},
                     {"gate_width_ns", f.gate_width_ns},
                     {"spread_threshold_db", f.spread_threshold_db}};

  const auto& l = c.localize;
  json observations = json::array();
  for (const auto& o : l.observations) {
    observations.push_back({{"tx", o.tx_id},
                            {"rx", o.rx_id},
                            {"excess_delay_ns", o.excess_delay * 1e9},
                            {"doppler_hz", o.doppler},
                            {"wavelength", o.wavelength},
                            {"weight", o.weight},
                            {"timestamp", o.timestamp}});
  }
  const json localize{{"source", source_name(l.source)},
                      {"target", l.target},
                      {"observations", observations},
                      {"dim", l.options.dim},
                      {"grid_cell", l.options.grid_cell},
                      {"grid_scale", l.options.grid_scale},
                      {"max_grid_cells", l.options.max_grid_cells},
                      {"max_iterations", l.options.max_iterations},
                      {"step_tolerance", l.options.step_tolerance},
                      {"ambiguity_tolerance", l.options.ambiguity_tolerance},
                      {"max_candidates", l.options.max_candidates}};

  const json focus{{"target", c.focus.target}, {"transmitters", c.focus.transmitters}};
  const auto& b = c.link_budget;
  const json budget{{"tx_power_dbm", b.tx_power_dbm}, {"tx_gain_dbi", b.tx_gain_dbi},
                    {"rx_gain_dbi", b.rx_gain_dbi},   {"wavelength", b.wavelength},
                    {"d_tx", b.d_tx},                 {"d_rx", b.d_rx},
                    {"rcs", b.rcs},                   {"subcarriers", b.n_subcarriers},
                    {"symbols", b.n_symbols}};
  const json output{{"directory", c.output.directory.string()}, {"format", c.output.format}};

  return {{"scene", scene},     {"waveform", waveform},         {"processing", processing},
          {"noise", noise},     {"reflectivity", reflectivity}, {"flyover", flyover},
          {"localize", localize}, {"focus", focus},             {"linkbudget", budget},
          {"output", output}};
}

}  // namespace bisim
