#include "bisim/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "bisim/errors.hpp"

namespace bisim {
namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double attr_double(const Dataset& d, const std::string& key) {
  const std::string* v = d.attribute(key);
  if (!v) throw IoError("dataset '" + d.name + "' lacks attribute '" + key + "'");
  try {
    return std::stod(*v);
  } catch (const std::exception&) {
    throw IoError("dataset '" + d.name + "': attribute '" + key + "' is not a number");
  }
}

std::vector<double> to_ns(const std::vector<double>& seconds) {
  std::vector<double> out(seconds.size());
  std::transform(seconds.begin(), seconds.end(), out.begin(), [](double s) { return s * 1e9; });
  return out;
}

std::vector<Complex> flatten(const ComplexMatrix& m) {
  return {m.data(), m.data() + m.size()};  // row-major storage
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

double mid_time(const RunConfig& c) { return c.scene.start_time + 0.5 * c.waveform.observation_time(); }

NodePose pose_of(const SceneConfig& scene, const std::string& id, double t) {
  NodePose p = scene.node(id).state_at(t);
  p.node_id = id;
  return p;
}

PathParameterSet los_path(const NodePose& tx, const NodePose& rx, double wavelength) {
  const Vec3 u = unit_vector(tx.position, rx.position);
  const double d = (rx.position - tx.position).norm();
  PathParameterSet p;
  p.delay = d / kSpeedOfLight;
  p.doppler = -u.dot(rx.velocity - tx.velocity) / wavelength;
  p.gain = wavelength / (4.0 * kPi * d) * std::polar(1.0, -kTwoPi * d / wavelength);
  p.departure = u;
  p.arrival = -u;
  return p;
}

double los_delay(const SceneConfig& scene, const LinkSpec& link, double t) {
  return (pose_of(scene, link.rx_id, t).position - pose_of(scene, link.tx_id, t).position).norm() / kSpeedOfLight;
}

std::size_t delay_bin_of(double delay, const WaveformConfig& w) {
  const auto k = static_cast<long long>(w.n_subcarriers);
  const auto bin = static_cast<long long>(std::llround(delay * w.bandwidth_hz));
  return static_cast<std::size_t>(((bin % k) + k) % k);
}

std::size_t doppler_bin_of(double doppler, const WaveformConfig& w) {
  const auto m = static_cast<long long>(w.n_symbols);
  const auto bin = m / 2 + static_cast<long long>(std::llround(doppler * w.observation_time()));
  return static_cast<std::size_t>(((bin % m) + m) % m);
}

struct Truth {
  std::string target;
  double delay = 0.0;
  double excess_delay = 0.0;
  double doppler = 0.0;
  std::size_t delay_bin = 0;
  std::size_t doppler_bin = 0;
};

std::vector<Truth> link_truth(const RunConfig& c, const LinkSpec& link, double t) {
  const NodePose tx = pose_of(c.scene, link.tx_id, t);
  const NodePose rx = pose_of(c.scene, link.rx_id, t);
  std::vector<Truth> out;
  for (const auto& spec : c.scene.targets) {
    const NodePose ref = target_reference(spec.model, t);
    const auto range = bistatic_range(tx.position, rx.position, ref.position);
    Truth tr;
    tr.target = spec.id;
    tr.delay = range.bistatic / kSpeedOfLight;
    tr.excess_delay = range.excess / kSpeedOfLight;
    tr.doppler = bistatic_doppler(tx, rx, ref.position, ref.velocity, c.waveform.wavelength());
    tr.delay_bin = delay_bin_of(tr.delay, c.waveform);
    tr.doppler_bin = doppler_bin_of(tr.doppler, c.waveform);
    out.push_back(tr);
  }
  return out;
}

json truth_json(const Truth& t) {
  return {{"target", t.target},
          {"delay_s", t.delay},
          {"delay_ns", t.delay * 1e9},
          {"excess_delay_s", t.excess_delay},
          {"excess_delay_ns", t.excess_delay * 1e9},
          {"doppler_hz", t.doppler},
          {"delay_bin", t.delay_bin},
          {"doppler_bin", t.doppler_bin}};
}

json detection_json(const Detection& d) {
  return {{"delay_s", d.delay},
          {"delay_ns", d.delay * 1e9},
          {"excess_delay_s", d.excess_delay},
          {"excess_delay_ns", d.excess_delay * 1e9},
          {"doppler_hz", d.doppler},
          {"power_db", d.power_db},
          {"delay_bin", d.delay_bin},
          {"doppler_bin", d.doppler_bin}};
}

void add_waveform_attributes(Dataset& d, const WaveformConfig& w, double timestamp) {
  d.attributes.emplace_back("carrier_hz", num(w.carrier_hz));
  d.attributes.emplace_back("bandwidth_hz", num(w.bandwidth_hz));
  d.attributes.emplace_back("subcarriers", std::to_string(w.n_subcarriers));
  d.attributes.emplace_back("symbols", std::to_string(w.n_symbols));
  d.attributes.emplace_back("symbol_duration", num(w.symbol_duration));
  d.attributes.emplace_back("timestamp", num(timestamp));
}

Dataset cube_dataset(const std::string& name, const SlowTimeCube& cube) {
  const auto& w = cube.waveform;
  Axis slow{"slow_time", "s", {}};
  for (std::size_t m = 0; m < w.n_symbols; ++m) {
    slow.values.push_back(cube.timestamp + static_cast<double>(m) * w.symbol_duration);
  }
  Axis freq{"subcarrier_offset", "Hz", {}};
  const double half = static_cast<double>(w.n_subcarriers / 2);
  for (std::size_t k = 0; k < w.n_subcarriers; ++k) {
    freq.values.push_back((static_cast<double>(k) - half) * w.subcarrier_spacing());
  }
  const auto values = flatten(cube.data);
  Dataset d = Dataset::complex64(name, {w.n_symbols, w.n_subcarriers}, {slow, freq}, values);
  add_waveform_attributes(d, w, cube.timestamp);
  return d;
}

SlowTimeCube cube_from_dataset(const Dataset& d) {
  if (d.type != ElementType::kComplex64 || d.shape.size() != 2) {
    throw IoError("dataset '" + d.name + "' is not a slow-time cube");
  }
  SlowTimeCube cube;
  cube.waveform.carrier_hz = attr_double(d, "carrier_hz");
  cube.waveform.bandwidth_hz = attr_double(d, "bandwidth_hz");
  cube.waveform.n_symbols = static_cast<std::size_t>(d.shape[0]);
  cube.waveform.n_subcarriers = static_cast<std::size_t>(d.shape[1]);
  cube.waveform.symbol_duration = attr_double(d, "symbol_duration");
  cube.timestamp = attr_double(d, "timestamp");
  cube.data.resize(static_cast<Eigen::Index>(d.shape[0]), static_cast<Eigen::Index>(d.shape[1]));
  for (std::size_t i = 0; i < d.complex_values.size(); ++i) {
    cube.data.data()[i] = Complex(d.complex_values[i].real(), d.complex_values[i].imag());
  }
  return cube;
}

void check_input_waveform(const SlowTimeCube& cube, const WaveformConfig& w, const std::string& name) {
  const auto& a = cube.waveform;
  if (a.n_subcarriers != w.n_subcarriers || a.n_symbols != w.n_symbols || a.carrier_hz != w.carrier_hz ||
      a.bandwidth_hz != w.bandwidth_hz || a.symbol_duration != w.symbol_duration) {
    throw ConfigError("input cube '" + name + "' was simulated with a different waveform");
  }
}

// Cube of a link: from the input archive when given, otherwise synthesized.
SlowTimeCube link_cube(const RunConfig& c, std::size_t index, const RunInputs& inputs) {
  if (!inputs.cubes) return synthesize_link(c, index);
  const std::string name = "cube/" + c.scene.links[index].name();
  SlowTimeCube cube = cube_from_dataset(inputs.cubes->get(name));
  check_input_waveform(cube, c.waveform, name);
  return cube;
}

// Background subtraction and CLEAN as configured, then the map.
struct ProcessedLink {
  DelayDopplerMap map;
  std::vector<Detection> detections;
  std::optional<CleanResult> clean;
};

ProcessedLink process_link(const RunConfig& c, std::size_t index, SlowTimeCube cube) {
  const auto& p = c.processing;
  const auto& link = c.scene.links[index];
  if (p.background_subtract) cube = background_subtract(cube, synthesize_link(c, index, false));
  ProcessedLink out;
  if (p.clean_paths > 0) {
    out.clean = subtract_dominant_paths(cube, p.clean_paths, p.clean);
    cube = out.clean->residual;
  }
  out.map = delay_doppler_map(cube, p.windows);
  out.map.los_delay = los_delay(c.scene, link, mid_time(c));
  out.detections = detect_peaks(out.map, p.threshold_db, p.exclude_zero_doppler);
  if (out.detections.size() > p.max_detections) out.detections.resize(p.max_detections);
  return out;
}

Dataset map_dataset(const std::string& name, const DelayDopplerMap& map) {
  const auto values = flatten(map.data);
  Dataset d = Dataset::complex64(name, {static_cast<std::uint64_t>(map.data.rows()), static_cast<std::uint64_t>(map.data.cols())},
                                 {{"delay", "ns", to_ns(map.delay_axis)}, {"doppler", "Hz", map.doppler_axis}}, values);
  d.attributes.emplace_back("fast_window", window_name(map.fast_window));
  d.attributes.emplace_back("slow_window", window_name(map.slow_window));
  d.attributes.emplace_back("los_delay_ns", num(map.los_delay * 1e9));
  return d;
}

json clean_json(const CleanResult& r) {
  json list = json::array();
  for (std::size_t i = 0; i < r.removed.size(); ++i) {
    const auto& p = r.removed[i];
    list.push_back({{"delay_s", p.delay},
                    {"delay_ns", p.delay * 1e9},
                    {"gain", {p.gain.real(), p.gain.imag()}},
                    {"power_db", to_db_power(std::norm(p.gain))},
                    {"at_noise_floor", static_cast<bool>(r.at_noise_floor[i])}});
  }
  return list;
}

// --- subcommands ---------------------------------------------------------

void run_simulate(const RunConfig& c, RunResult& r) {
  const double t_mid = mid_time(c);
  json links = json::array();
  double max_speed = 0.0;
  for (const auto& spec : c.scene.targets) {
    for (const auto& s : scatterer_states(spec.model, t_mid)) max_speed = std::max(max_speed, s.velocity.norm());
  }
  double node_speed = 0.0;
  for (const auto* list : {&c.scene.transmitters, &c.scene.receivers}) {
    for (const auto& n : *list) node_speed = std::max(node_speed, n.state_at(t_mid).velocity.norm());
  }
  for (std::size_t i = 0; i < c.scene.links.size(); ++i) {
    const auto& link = c.scene.links[i];
    const SlowTimeCube cube = synthesize_link(c, i);
    r.archive.add(cube_dataset("cube/" + link.name(), cube));
    json truth = json::array();
    for (const auto& t : link_truth(c, link, t_mid)) truth.push_back(truth_json(t));
    links.push_back({{"link", link.name()},
                     {"los_delay_ns", los_delay(c.scene, link, t_mid) * 1e9},
                     {"mean_power", cube.mean_power()},
                     {"targets", truth}});
  }
  const auto nyq = nyquist_check(max_speed + 2.0 * node_speed, c.waveform.wavelength(), c.waveform.symbol_duration);
  r.summary["links"] = links;
  r.summary["nyquist"] = {{"ok", nyq.ok},
                          {"spatial_step_m", nyq.spatial_step},
                          {"half_wavelength_m", 0.5 * c.waveform.wavelength()},
                          {"max_speed_mps", max_speed + 2.0 * node_speed}};
}

void run_ddmap(const RunConfig& c, const RunInputs& in, RunResult& r) {
  const double t_mid = mid_time(c);
  json links = json::array();
  for (std::size_t i = 0; i < c.scene.links.size(); ++i) {
    const auto& link = c.scene.links[i];
    const auto processed = process_link(c, i, link_cube(c, i, in));
    r.archive.add(map_dataset("ddmap/" + link.name(), processed.map));
    json detections = json::array();
    for (const auto& d : processed.detections) detections.push_back(detection_json(d));
    json truth = json::array();
    for (const auto& t : link_truth(c, link, t_mid)) {
      json tj = truth_json(t);
      // A detection within one bin of the prediction in both axes counts as a match.
      const auto hit = std::find_if(processed.detections.begin(), processed.detections.end(), [&](const Detection& d) {
        const auto k = static_cast<long long>(c.waveform.n_subcarriers);
        const auto dd = std::llabs(static_cast<long long>(d.delay_bin) - static_cast<long long>(t.delay_bin));
        const auto df = std::llabs(static_cast<long long>(d.doppler_bin) - static_cast<long long>(t.doppler_bin));
        return std::min(dd, k - dd) <= 1 && df <= 1;
      });
      tj["detected"] = hit != processed.detections.end();
      truth.push_back(tj);
    }
    json lj{{"link", link.name()}, {"detections", detections}, {"targets", truth}};
    if (processed.clean) lj["clean"] = clean_json(*processed.clean);
    links.push_back(lj);
  }
  r.summary["links"] = links;
}

void run_clean(const RunConfig& c, const RunInputs& in, RunResult& r) {
  if (c.processing.clean_paths == 0) throw ConfigError("processing.clean_paths: must be at least 1 for clean");
  json links = json::array();
  for (std::size_t i = 0; i < c.scene.links.size(); ++i) {
    const auto& link = c.scene.links[i];
    SlowTimeCube cube = link_cube(c, i, in);
    if (c.processing.background_subtract) cube = background_subtract(cube, synthesize_link(c, i, false));
    const double before = cube.energy();
    const auto result = subtract_dominant_paths(cube, c.processing.clean_paths, c.processing.clean);
    r.archive.add(cube_dataset("residual/" + link.name(), result.residual));
    links.push_back({{"link", link.name()},
                     {"removed", clean_json(result)},
                     {"energy_before", before},
                     {"energy_after", result.residual.energy()},
                     {"residual_db", to_db_power(result.residual.energy() / before)}});
  }
  r.summary["links"] = links;
}

void run_spectrogram(const RunConfig& c, const RunInputs& in, RunResult& r) {
  const auto& p = c.processing;
  std::size_t index = 0;
  if (!p.spectrogram_link.empty()) {
    while (c.scene.links[index].name() != p.spectrogram_link) ++index;  // validated to exist
  }
  const auto& link = c.scene.links[index];
  SlowTimeCube cube = link_cube(c, index, in);
  if (p.background_subtract) cube = background_subtract(cube, synthesize_link(c, index, false));
  if (p.clean_paths > 0) cube = subtract_dominant_paths(cube, p.clean_paths, p.clean).residual;

  std::size_t bin = 0;
  if (p.spectrogram_delay_bin) {
    bin = *p.spectrogram_delay_bin;
  } else {
    const auto truth = link_truth(c, link, mid_time(c));
    if (truth.empty()) throw ConfigError("processing.spectrogram_delay_bin: required when the scene has no targets");
    bin = truth.front().delay_bin;
  }
  const auto series = slow_time_series(cube, bin);
  const auto s = stft_spectrogram(series, c.waveform.symbol_duration, p.stft);
  const auto support = spectral_support(s, -20.0);

  std::vector<double> time_axis(s.time_axis);
  for (double& t : time_axis) t += cube.timestamp;
  std::vector<double> values(s.data.data(), s.data.data() + s.data.size());
  Dataset d = Dataset::float64("spectrogram/" + link.name(),
                               {static_cast<std::uint64_t>(s.data.rows()), static_cast<std::uint64_t>(s.data.cols())},
                               {{"time", "s", time_axis}, {"doppler", "Hz", s.doppler_axis}}, std::move(values));
  d.attributes.emplace_back("fft_size", std::to_string(s.fft_size));
  d.attributes.emplace_back("hop", std::to_string(s.hop));
  d.attributes.emplace_back("window", window_name(s.window));
  d.attributes.emplace_back("gaussian_sigma", num(s.gaussian_sigma));
  d.attributes.emplace_back("delay_bin", std::to_string(bin));
  d.attributes.emplace_back("scale", "dB re. peak");
  r.archive.add(std::move(d));

  r.summary["spectrogram"] = {{"link", link.name()},
                              {"delay_bin", bin},
                              {"fft_size", s.fft_size},
                              {"hop", s.hop},
                              {"window", window_name(s.window)},
                              {"gaussian_sigma", s.gaussian_sigma},
                              {"frames", s.data.rows()},
                              {"doppler_resolution_hz", 1.0 / (static_cast<double>(s.fft_size) * c.waveform.symbol_duration)},
                              {"support_minus20db_hz", {support.lower, support.upper}}};
}

std::vector<BistaticObservation> gather_observations(const RunConfig& c, const RunInputs& in, json& notes) {
  const auto& l = c.localize;
  if (l.source == ObservationSource::kListed) return l.observations;
  const double t_mid = mid_time(c);
  const double lambda = c.waveform.wavelength();
  std::vector<BistaticObservation> out;
  if (l.source == ObservationSource::kTruth) {
    const auto& target = c.scene.target(l.target);
    for (const auto& link : c.scene.links) {
      for (const auto& t : link_truth(c, link, t_mid)) {
        if (t.target != target.id) continue;
        out.push_back({link.tx_id, link.rx_id, t.excess_delay, t.doppler, lambda, t_mid, 1.0});
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < c.scene.links.size(); ++i) {
    const auto& link = c.scene.links[i];
    const auto processed = process_link(c, i, link_cube(c, i, in));
    if (processed.detections.empty()) {
      notes.push_back("link " + link.name() + ": no detection above threshold, skipped");
      continue;
    }
    const auto& d = processed.detections.front();
    out.push_back({link.tx_id, link.rx_id, std::max(0.0, d.excess_delay), d.doppler, lambda, t_mid, 1.0});
  }
  return out;
}

void run_localize(const RunConfig& c, const RunInputs& in, RunResult& r) {
  const double t_mid = mid_time(c);
  json notes = json::array();
  const auto observations = gather_observations(c, in, notes);
  if (observations.empty()) throw NumericalError("no observations to localize from");

  NodeTable nodes;
  for (const auto* list : {&c.scene.transmitters, &c.scene.receivers}) {
    for (const auto& n : *list) nodes[n.id] = pose_of(c.scene, n.id, t_mid);
  }
  const StateEstimate est = fuse(observations, nodes, c.localize.options);

  json obs = json::array();
  std::vector<double> obs_values;
  for (const auto& o : observations) {
    obs.push_back({{"tx", o.tx_id}, {"rx", o.rx_id}, {"excess_delay_ns", o.excess_delay * 1e9}, {"doppler_hz", o.doppler}});
    obs_values.push_back(o.excess_delay * 1e9);
    obs_values.push_back(o.doppler);
  }
  json blind = json::array();
  for (const auto& b : est.blind_directions) blind.push_back(vec_json(b));
  json alternates = json::array();
  for (const auto& a : est.alternates) alternates.push_back(vec_json(a));
  json estimate{{"position_m", vec_json(est.position)},
                {"velocity_mps", vec_json(est.velocity)},
                {"position_rms_m", est.position_rms},
                {"velocity_rms_hz", est.velocity_rms},
                {"position_condition", std::isfinite(est.position_condition) ? json(est.position_condition) : json("inf")},
                {"velocity_condition", std::isfinite(est.velocity_condition) ? json(est.velocity_condition) : json("inf")},
                {"velocity_rank", est.velocity_rank},
                {"blind_directions", blind},
                {"ambiguous", est.ambiguous},
                {"degenerate", est.degenerate},
                {"converged", est.converged},
                {"iterations", est.iterations},
                {"alternates", alternates}};
  r.summary["observations"] = obs;
  r.summary["estimate"] = estimate;
  if (!notes.empty()) r.summary["notes"] = notes;
  if (!c.scene.targets.empty()) {
    const auto& target = c.scene.target(c.localize.target);
    const NodePose ref = target_reference(target.model, t_mid);
    r.summary["truth"] = {{"target", target.id},
                          {"position_m", vec_json(ref.position)},
                          {"velocity_mps", vec_json(ref.velocity)},
                          {"position_error_m", (est.position - ref.position).norm()},
                          {"velocity_error_mps", (est.velocity - ref.velocity).norm()}};
  }

  std::vector<double> state{est.position.x(), est.position.y(), est.position.z(),
                            est.velocity.x(), est.velocity.y(), est.velocity.z()};
  Dataset d = Dataset::float64("estimate", {2, 3}, {{"quantity", "", {}}, {"component", "", {}}}, std::move(state));
  d.attributes.emplace_back("rows", "position_m,velocity_mps");
  d.attributes.emplace_back("columns", "x,y,z");
  r.archive.add(std::move(d));
  Dataset o = Dataset::float64("observations", {observations.size(), 2}, {{"link", "", {}}, {"quantity", "", {}}},
                               std::move(obs_values));
  o.attributes.emplace_back("columns", "excess_delay_ns,doppler_hz");
  r.archive.add(std::move(o));

  if (!est.converged) r.numerical_failure = "localization did not converge";
}

void run_reflectivity(const RunConfig& c, RunResult& r) {
  const auto& cfg = c.reflectivity;
  const auto& target = c.scene.target(cfg.target);
  const auto tensor = reflectivity_scan(target.model, cfg.grid, cfg.d_tx, cfg.d_rx, cfg.band, {cfg.window, cfg.time, cfg.oversample});
  const auto shape = tensor.shape();
  std::vector<std::uint64_t> dims(shape.begin(), shape.end());
  const auto& g = tensor.grid();
  Dataset d = Dataset::complex64("reflectivity", dims,
                                 {{"az_tx", "deg", g.az_tx},
                                  {"el_tx", "deg", g.el_tx},
                                  {"az_rx", "deg", g.az_rx},
                                  {"el_rx", "deg", g.el_rx},
                                  {"delay", "ns", to_ns(tensor.delay_axis())},
                                  {"pol_rx", "", {}},
                                  {"pol_tx", "", {}}},
                                 tensor.raw());
  d.attributes.emplace_back("target", target.id);
  d.attributes.emplace_back("d_tx", num(cfg.d_tx));
  d.attributes.emplace_back("d_rx", num(cfg.d_rx));
  d.attributes.emplace_back("f_lo_hz", num(cfg.band.f_lo));
  d.attributes.emplace_back("f_hi_hz", num(cfg.band.f_hi));
  d.attributes.emplace_back("points", std::to_string(cfg.band.n_points));
  d.attributes.emplace_back("window", window_name(cfg.window));
  d.attributes.emplace_back("polarization", "index 0 = H, 1 = V; entry (rx, tx)");
  d.attributes.emplace_back("unit", "scattering length, m");
  r.archive.add(std::move(d));

  json points = json::array();
  const std::size_t n_delay = tensor.delay_axis().size();
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto hh = tensor.profile(p, Polarization::kH, Polarization::kH);
    std::size_t best = 0;
    for (std::size_t n = 1; n < n_delay; ++n) {
      if (std::norm(hh[n]) > std::norm(hh[best])) best = n;
    }
    points.push_back({{"index", p}, {"hh_peak_db", to_db_magnitude(hh[best])}, {"hh_peak_delay_ns", tensor.delay_axis()[best] * 1e9}});
  }
  r.summary["reflectivity"] = {{"target", target.id}, {"shape", shape}, {"grid_points", points}};
}

void run_flyover(const RunConfig& c, RunResult& r) {
  const auto& cfg = c.flyover;
  const auto& target = c.scene.target(cfg.target);
  const ScanOptions options{cfg.window, cfg.time, cfg.oversample};
  const auto map = flyover_scan(target.model, cfg.fixed_angle, cfg.sweep, cfg.d_tx, cfg.d_rx, cfg.band, options);
  const double system_extent = point_response_extent(cfg.band, options, cfg.spread_threshold_db);
  const std::uint64_t n_angles = map.angles.size();
  const std::uint64_t n_delay = map.delay_axis.size();
  const auto delay_ns = to_ns(map.delay_axis);
  const double center = cfg.gate_center_ns * 1e-9;
  const double width = cfg.gate_width_ns * 1e-9;

  ComplexMatrix gated(map.data.rows(), map.data.cols());
  std::vector<double> spread_ns;
  for (std::size_t i = 0; i < n_angles; ++i) {
    DelayProfile profile;
    profile.delay_axis = map.delay_axis;
    profile.samples.resize(n_delay);
    for (std::size_t n = 0; n < n_delay; ++n) profile.samples[n] = map.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n));
    const auto g = time_gate(profile, center, width);
    for (std::size_t n = 0; n < n_delay; ++n) gated(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = g.samples[n];
    const double extent = delay_extent(profile.samples, profile.delay_axis, center, width, cfg.spread_threshold_db);
    spread_ns.push_back(std::max(0.0, extent - system_extent) * 1e9);
  }

  const auto make = [&](const std::string& name, const ComplexMatrix& data) {
    const auto values = flatten(data);
    Dataset d = Dataset::complex64(name, {n_angles, n_delay}, {{"bistatic_angle", "deg", map.angles}, {"delay", "ns", delay_ns}}, values);
    d.attributes.emplace_back("target", target.id);
    d.attributes.emplace_back("polarization", "HH");
    d.attributes.emplace_back("fixed_angle_deg", num(cfg.fixed_angle));
    d.attributes.emplace_back("f_lo_hz", num(cfg.band.f_lo));
    d.attributes.emplace_back("f_hi_hz", num(cfg.band.f_hi));
    d.attributes.emplace_back("points", std::to_string(cfg.band.n_points));
    d.attributes.emplace_back("window", window_name(cfg.window));
    d.attributes.emplace_back("oversample", std::to_string(cfg.oversample));
    return d;
  };
  r.archive.add(make("flyover", map.data));
  Dataset g = make("flyover_gated", gated);
  g.attributes.emplace_back("gate_center_ns", num(cfg.gate_center_ns));
  g.attributes.emplace_back("gate_width_ns", num(cfg.gate_width_ns));
  r.archive.add(std::move(g));
  r.archive.add(Dataset::float64("delay_spread", {n_angles}, {{"bistatic_angle", "deg", map.angles}}, spread_ns));

  // Changes below one delay resolution cell are not resolvable and do not break the trend.
  const double cell_ns = 1e9 / (cfg.band.f_hi - cfg.band.f_lo);
  bool monotone = true;
  for (std::size_t i = 1; i < spread_ns.size(); ++i) monotone = monotone && spread_ns[i] <= spread_ns[i - 1] + cell_ns;
  const double widest = spread_ns.empty() ? 0.0 : *std::max_element(spread_ns.begin(), spread_ns.end());
  r.summary["flyover"] = {{"target", target.id},
                          {"angles_deg", map.angles},
                          {"delay_spread_ns", spread_ns},
                          {"system_extent_ns", system_extent * 1e9},
                          {"resolution_cell_ns", cell_ns},
                          {"max_delay_spread_ns", widest},
                          {"fits_gate", widest <= cfg.gate_width_ns},
                          {"monotone_non_increasing", monotone}};
}

void run_focus(const RunConfig& c, RunResult& r) {
  const double t_mid = mid_time(c);
  const auto& target = c.scene.target(c.focus.target);
  const NodePose ref = target_reference(target.model, t_mid);
  const auto& w = c.waveform;
  std::vector<std::string> txs = c.focus.transmitters;
  if (txs.empty()) {
    for (const auto& n : c.scene.transmitters) txs.push_back(n.id);
  }
  const double half = static_cast<double>(w.n_subcarriers / 2);
  std::vector<double> offsets(w.n_subcarriers);
  std::vector<double> delays(w.n_subcarriers);
  for (std::size_t k = 0; k < w.n_subcarriers; ++k) {
    offsets[k] = (static_cast<double>(k) - half) * w.subcarrier_spacing();
    delays[k] = static_cast<double>(k) / w.bandwidth_hz * 1e9;
  }

  json reports = json::array();
  for (const auto& id : txs) {
    const auto paths = illumination_paths(pose_of(c.scene, id, t_mid), ref.position, ref.velocity, c.scene.clutter,
                                          w.wavelength());
    ComplexVector cfr(w.n_subcarriers, Complex{0.0, 0.0});
    for (const auto& p : paths) {
      for (std::size_t k = 0; k < w.n_subcarriers; ++k) {
        cfr[k] += p.gain * std::polar(1.0, -kTwoPi * offsets[k] * p.delay);
      }
    }
    const auto prefilter = time_reversal_prefilter(cfr);
    const auto report = focusing_gain(cfr);
    const auto comp = doppler_precompensate(paths);

    r.archive.add(Dataset::complex64("prefilter/" + id, {w.n_subcarriers}, {{"subcarrier_offset", "Hz", offsets}}, prefilter));
    r.archive.add(Dataset::complex64("focused_profile/" + id, {w.n_subcarriers}, {{"delay", "ns", delays}},
                                     report.focused_profile));
    r.archive.add(Dataset::complex64("unfocused_profile/" + id, {w.n_subcarriers}, {{"delay", "ns", delays}},
                                     report.unfocused_profile));
    reports.push_back({{"transmitter", id},
                       {"paths", paths.size()},
                       {"focusing_gain", report.gain},
                       {"focusing_gain_db", to_db_power(report.gain)},
                       {"focused_peak", report.focused_peak},
                       {"unfocused_peak", report.unfocused_peak},
                       {"doppler_reference_hz", comp.reference},
                       {"doppler_offsets_hz", comp.offsets},
                       {"doppler_spread_before_hz", comp.spread_before},
                       {"doppler_spread_after_hz", comp.spread_after}});
  }
  r.summary["focus"] = {{"target", target.id}, {"transmitters", reports}};
}

void run_linkbudget(const RunConfig& c, RunResult& r) {
  const auto& b = c.link_budget;
  const auto result = link_budget(b);

  // Cross-check against the channel model: one scatterer of the given RCS.
  const ScattererState s{Vec3::Zero(), Vec3::Zero(), {scattering_length_for_rcs(b.rcs), 0.0}, JonesMatrix::Identity()};
  NodePose tx{{-b.d_tx, 0.0, 0.0}, Vec3::Zero(), "tx"};
  NodePose rx{{0.0, b.d_rx, 0.0}, Vec3::Zero(), "rx"};
  const auto paths = paths_from_states({s}, tx, rx, b.wavelength);
  WaveformConfig w = c.waveform;
  w.n_symbols = 1;
  const double channel_power = synth_cfr(paths, w, SynthMode::kFixed).mean_power();
  const double synthesized = b.tx_power_dbm + b.tx_gain_dbi + b.rx_gain_dbi + to_db_power(channel_power);

  r.summary["linkbudget"] = {{"received_power_dbm", result.received_power_dbm},
                             {"processing_gain_db", result.processing_gain_db},
                             {"post_integration_power_dbm", result.post_integration_power_dbm},
                             {"synthesized_power_dbm", synthesized},
                             {"model_difference_db", synthesized - result.received_power_dbm}};
  Dataset d = Dataset::float64("link_budget", {4}, {{"quantity", "", {}}},
                               {result.received_power_dbm, result.processing_gain_db,
                                result.post_integration_power_dbm, synthesized});
  d.attributes.emplace_back("rows", "received_power_dbm,processing_gain_db,post_integration_power_dbm,synthesized_power_dbm");
  r.archive.add(std::move(d));
}

template <typename E>
[[noreturn]] void rethrow_in(const E& e, const std::string& subcommand) {
  throw E(subcommand + ": " + e.what());
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"simulate", "ddmap",   "spectrogram", "clean",     "localize",
                                              "reflectivity", "flyover", "focus",       "linkbudget"};
  return names;
}

std::vector<PathParameterSet> scene_paths(const SceneConfig& scene, const LinkSpec& link, double t, double wavelength,
                                          bool include_targets) {
  const NodePose tx = pose_of(scene, link.tx_id, t);
  const NodePose rx = pose_of(scene, link.rx_id, t);
  std::vector<PathParameterSet> paths;
  if (scene.include_los) paths.push_back(los_path(tx, rx, wavelength));
  std::vector<ScattererState> clutter;
  for (const auto& c : scene.clutter) clutter.push_back({c.position, Vec3::Zero(), c.amplitude, JonesMatrix::Identity()});
  for (auto& p : paths_from_states(clutter, tx, rx, wavelength)) paths.push_back(std::move(p));
  if (include_targets) {
    for (const auto& target : scene.targets) {
      for (auto& p : target_paths(target.model, tx, rx, t, wavelength)) paths.push_back(std::move(p));
    }
  }
  return select_polarization(std::move(paths), Polarization::kH, Polarization::kH);
}

SlowTimeCube synthesize_link(const RunConfig& c, std::size_t index, bool include_targets) {
  const auto& link = c.scene.links.at(index);
  const double lambda = c.waveform.wavelength();
  SlowTimeCube cube;
  if (c.processing.mode == SynthMode::kGeometric) {
    PathCallback callback = [&c, link, lambda, include_targets](double t) {
      return scene_paths(c.scene, link, t, lambda, include_targets);
    };
    cube = synth_cfr(callback, c.waveform, SynthMode::kGeometric, c.scene.start_time);
  } else {
    cube = synth_cfr(scene_paths(c.scene, link, c.scene.start_time, lambda, include_targets), c.waveform,
                     SynthMode::kFixed, c.scene.start_time);
  }
  if (c.noise.enabled()) {
    // Background (target-free) cubes draw from streams after the scene cubes.
    const std::uint64_t stream = include_targets ? index : c.scene.links.size() + index;
    cube = add_noise(cube, c.noise.snr_db, *c.noise.seed, stream);
  }
  return cube;
}

RunResult run(const std::string& subcommand, const RunConfig& config, const RunInputs& inputs) {
  RunResult r;
  r.summary["subcommand"] = subcommand;
  r.summary["library_version"] = library_version();
  r.summary["config"] = config_to_json(config);
  try {
    if (subcommand == "simulate") {
      run_simulate(config, r);
    } else if (subcommand == "ddmap") {
      run_ddmap(config, inputs, r);
    } else if (subcommand == "spectrogram") {
      run_spectrogram(config, inputs, r);
    } else if (subcommand == "clean") {
      run_clean(config, inputs, r);
    } else if (subcommand == "localize") {
      run_localize(config, inputs, r);
    } else if (subcommand == "reflectivity") {
      run_reflectivity(config, r);
    } else if (subcommand == "flyover") {
      run_flyover(config, r);
    } else if (subcommand == "focus") {
      run_focus(config, r);
    } else if (subcommand == "linkbudget") {
      run_linkbudget(config, r);
    } else {
      throw UsageError("unknown subcommand '" + subcommand + "'");
    }
  } catch (const ConfigError& e) {
    rethrow_in(e, subcommand);
  } catch (const GeometryError& e) {
    rethrow_in(e, subcommand);
  } catch (const UsageError& e) {
    rethrow_in(e, subcommand);
  } catch (const NumericalError& e) {
    rethrow_in(e, subcommand);
  } catch (const IoError& e) {
    rethrow_in(e, subcommand);
  }
  json names = json::array();
  for (const auto& d : r.archive.datasets()) names.push_back(d.name);
  r.summary["datasets"] = names;
  if (r.numerical_failure) r.summary["numerical_failure"] = *r.numerical_failure;
  return r;
}

std::vector<std::filesystem::path> write_result(const RunResult& result, const std::string& subcommand,
                                                const std::filesystem::path& directory, const std::string& format) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create output directory '" + directory.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  if (format == "bin") {
    const auto path = directory / (subcommand + ".bisim");
    result.archive.write(path);
    written.push_back(path);
  } else if (format == "csv") {
    for (const auto& d : result.archive.datasets()) {
      if (d.shape.size() > 2) continue;  // reported in the summary below
      std::string stem = d.name;
      std::replace(stem.begin(), stem.end(), '/', '_');
      const auto path = directory / (subcommand + "." + stem + ".csv");
      export_csv(result.archive, d.name, path);
      written.push_back(path);
    }
  } else {
    throw UsageError("unknown output format '" + format + "'");
  }

  json summary = result.summary;
  if (format == "csv") {
    json skipped = json::array();
    for (const auto& d : result.archive.datasets()) {
      if (d.shape.size() > 2) skipped.push_back(d.name);
    }
    if (!skipped.empty()) summary["csv_skipped_datasets"] = skipped;
  }
  const auto summary_path = directory / (subcommand + ".summary.json");
  std::ofstream out(summary_path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + summary_path.string() + "' for writing");
  out << summary.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + summary_path.string() + "'");
  written.push_back(summary_path);
  return written;
}

}  // namespace bisim
