#include "bisim/scattering.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "bisim/errors.hpp"
#include "bisim/fft.hpp"
#include "bisim/parallel.hpp"

namespace bisim {
namespace {

// Orthonormal pair spanning the rotor disc, e1 × e2 = axis.
std::pair<Vec3, Vec3> disc_basis(const Vec3& axis) {
  const Vec3 ref = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = (ref - ref.dot(axis) * axis).normalized();
  return {e1, axis.cross(e1)};
}

void check_strictly_increasing(const std::vector<double>& values, const char* name) {
  if (values.empty()) throw ConfigError(std::string("angle grid axis '") + name + "' is empty");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > values[i - 1])) {
      throw ConfigError(std::string("angle grid axis '") + name + "' must be strictly increasing");
    }
  }
}

double max_extent(const std::vector<ScattererState>& states, const Vec3& center) {
  double extent = 0.0;
  for (const auto& s : states) extent = std::max(extent, (s.position - center).norm());
  return extent;
}

// Windowed, zero-padded inverse transform of one Jones element sequence,
// delay-centred. `out` has n_points·oversample samples.
void to_delay_profile(std::vector<Complex>& spectrum, const std::vector<double>& window,
                      ComplexVector& out) {
  const std::size_t n = window.size();
  for (std::size_t i = 0; i < n; ++i) spectrum[i] *= window[i];
  std::fill(spectrum.begin() + static_cast<std::ptrdiff_t>(n), spectrum.end(), Complex{0.0, 0.0});
  fft_inverse(spectrum, out);
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= scale;
  fftshift(out);
}

std::size_t padded_length(const FrequencyBand& band, const ScanOptions& options) {
  if (options.oversample == 0) throw ConfigError("scan oversample factor must be at least 1");
  return band.n_points * options.oversample;
}

std::vector<double> centred_delay_axis(const FrequencyBand& band, std::size_t n) {
  const double bin = 1.0 / (static_cast<double>(n) * band.step());
  std::vector<double> axis(n);
  const auto zero = static_cast<double>(n / 2);
  for (std::size_t i = 0; i < n; ++i) axis[i] = (static_cast<double>(i) - zero) * bin;
  return axis;
}

}  // namespace

void Rotor::validate() const {
  if (!(blade_radius > 0.0)) throw ConfigError("rotor: blade radius must be positive");
  if (n_blades < 1) throw ConfigError("rotor: needs at least one blade");
  if (samples_per_blade < 2) throw ConfigError("rotor: needs at least two samples per blade");
  if (std::abs(axis.norm() - 1.0) > 1e-9) throw ConfigError("rotor: axis must be a unit vector");
  if (!std::isfinite(rate)) throw ConfigError("rotor: rotation rate must be finite");
}

double Rotor::sample_spacing() const {
  return blade_radius / static_cast<double>(samples_per_blade - 1);
}

NodePose target_reference(const Target& target, double t) {
  return std::visit([t](const auto& tgt) { return pose_at(tgt.trajectory, t); }, target);
}

std::vector<ScattererState> scatterer_states(const Target& target, double t) {
  std::vector<ScattererState> states;
  if (const auto* rigid = std::get_if<RigidTarget>(&target)) {
    if (rigid->scatterers.empty()) throw ConfigError("rigid target has no scatterers");
    const NodePose body = pose_at(rigid->trajectory, t);
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(rigid->yaw, Vec3::UnitZ()).toRotationMatrix();
    states.reserve(rigid->scatterers.size());
    for (const auto& s : rigid->scatterers) {
      states.push_back({body.position + rot * s.offset, body.velocity, s.amplitude, s.jones});
    }
    return states;
  }

  const auto& rotor = std::get<Rotor>(target);
  rotor.validate();
  const NodePose host = pose_at(rotor.trajectory, t);
  const Vec3 hub = host.position + rotor.hub_offset;
  const auto [e1, e2] = disc_basis(rotor.axis);
  states.reserve(rotor.n_blades * rotor.samples_per_blade);
  for (std::size_t b = 0; b < rotor.n_blades; ++b) {
    const double phi = rotor.initial_angle + rotor.rate * t +
                       kTwoPi * static_cast<double>(b) / static_cast<double>(rotor.n_blades);
    const Vec3 radial = std::cos(phi) * e1 + std::sin(phi) * e2;
    const Vec3 tangential = -std::sin(phi) * e1 + std::cos(phi) * e2;
    for (std::size_t j = 0; j < rotor.samples_per_blade; ++j) {
      const double r = rotor.blade_radius * static_cast<double>(j) /
                       static_cast<double>(rotor.samples_per_blade - 1);
      states.push_back({hub + r * radial, host.velocity + rotor.rate * r * tangential,
                        rotor.sample_amplitude, rotor.jones});
    }
  }
  return states;
}

std::vector<PathParameterSet> paths_from_states(const std::vector<ScattererState>& states,
                                                const NodePose& tx, const NodePose& rx,
                                                double wavelength) {
  if (!(wavelength > 0.0)) throw UsageError("target_paths: wavelength must be positive");
  std::vector<PathParameterSet> paths;
  paths.reserve(states.size());
  for (const auto& s : states) {
    const Vec3 to_tx = s.position - tx.position;
    const Vec3 to_rx = s.position - rx.position;
    const double d_tx = to_tx.norm();
    const double d_rx = to_rx.norm();
    if (d_tx < 1e-9 || d_rx < 1e-9) throw GeometryError("scatterer coincides with an antenna");
    PathParameterSet p;
    p.delay = (d_tx + d_rx) / kSpeedOfLight;
    p.doppler = bistatic_doppler(tx, rx, s.position, s.velocity, wavelength);
    const double carrier_phase = -kTwoPi * (d_tx + d_rx) / wavelength;
    p.gain = s.amplitude * wavelength / (4.0 * kPi * d_tx * d_rx) * std::polar(1.0, carrier_phase);
    p.departure = to_tx / d_tx;
    p.arrival = to_rx / d_rx;
    p.jones = s.jones;
    paths.push_back(p);
  }
  return paths;
}

std::vector<PathParameterSet> target_paths(const Target& target, const NodePose& tx,
                                           const NodePose& rx, double t, double wavelength) {
  return paths_from_states(scatterer_states(target, t), tx, rx, wavelength);
}

std::vector<PathParameterSet> select_polarization(std::vector<PathParameterSet> paths,
                                                  Polarization tx, Polarization rx) {
  for (auto& p : paths) {
    if (p.jones) p.gain *= (*p.jones)(static_cast<int>(rx), static_cast<int>(tx));
  }
  return paths;
}

void AngleGrid::validate() const {
  check_strictly_increasing(az_tx, "az_tx");
  check_strictly_increasing(el_tx, "el_tx");
  check_strictly_increasing(az_rx, "az_rx");
  check_strictly_increasing(el_rx, "el_rx");
}

double FrequencyBand::step() const {
  return n_points > 1 ? (f_hi - f_lo) / static_cast<double>(n_points - 1) : f_hi - f_lo;
}

std::vector<double> FrequencyBand::frequencies() const {
  std::vector<double> f(n_points);
  for (std::size_t i = 0; i < n_points; ++i) f[i] = f_lo + static_cast<double>(i) * step();
  return f;
}

void FrequencyBand::validate() const {
  if (!(f_lo > 0.0) || !(f_hi > f_lo)) throw ConfigError("band: need 0 < f_lo < f_hi");
  if (n_points < 2) throw ConfigError("band: need at least two frequency points");
}

std::vector<JonesMatrix> bistatic_response(const std::vector<ScattererState>& states,
                                           const Vec3& center, const Vec3& tx_pos,
                                           const Vec3& rx_pos, std::span<const double> frequencies) {
  const double d_tx = (center - tx_pos).norm();
  const double d_rx = (center - rx_pos).norm();
  const double tau_ref = (d_tx + d_rx) / kSpeedOfLight;
  std::vector<JonesMatrix> response(frequencies.size(), JonesMatrix::Zero());
  for (const auto& s : states) {
    const double di_tx = (s.position - tx_pos).norm();
    const double di_rx = (s.position - rx_pos).norm();
    if (di_tx < 1e-9 || di_rx < 1e-9) throw GeometryError("scatterer coincides with an antenna");
    const double excess = (di_tx + di_rx) / kSpeedOfLight - tau_ref;
    const JonesMatrix weighted = s.amplitude * (d_tx * d_rx / (di_tx * di_rx)) * s.jones;
    for (std::size_t n = 0; n < frequencies.size(); ++n) {
      response[n] += weighted * std::polar(1.0, -kTwoPi * frequencies[n] * excess);
    }
  }
  return response;
}

ReflectivityTensor::ReflectivityTensor(AngleGrid grid, std::vector<double> delay_axis,
                                       double d_tx, double d_rx, FrequencyBand band)
    : grid_(std::move(grid)),
      delay_axis_(std::move(delay_axis)),
      d_tx_(d_tx),
      d_rx_(d_rx),
      band_(band),
      data_(grid_.size() * delay_axis_.size() * 4) {}

std::size_t ReflectivityTensor::flat_index(std::size_t i_az_tx, std::size_t i_el_tx,
                                           std::size_t i_az_rx, std::size_t i_el_rx) const {
  return ((i_az_tx * grid_.el_tx.size() + i_el_tx) * grid_.az_rx.size() + i_az_rx) *
             grid_.el_rx.size() +
         i_el_rx;
}

JonesMatrix ReflectivityTensor::at(std::size_t i_az_tx, std::size_t i_el_tx, std::size_t i_az_rx,
                                   std::size_t i_el_rx, std::size_t delay_bin) const {
  const std::size_t base =
      (flat_index(i_az_tx, i_el_tx, i_az_rx, i_el_rx) * delay_axis_.size() + delay_bin) * 4;
  JonesMatrix j;
  j << data_[base], data_[base + 1], data_[base + 2], data_[base + 3];
  return j;
}

ComplexVector ReflectivityTensor::profile(std::size_t grid_point, Polarization tx,
                                          Polarization rx) const {
  const std::size_t n_delay = delay_axis_.size();
  const std::size_t element = static_cast<std::size_t>(rx) * 2 + static_cast<std::size_t>(tx);
  ComplexVector out(n_delay);
  for (std::size_t d = 0; d < n_delay; ++d) out[d] = data_[(grid_point * n_delay + d) * 4 + element];
  return out;
}

std::vector<std::size_t> ReflectivityTensor::shape() const {
  return {grid_.az_tx.size(), grid_.el_tx.size(), grid_.az_rx.size(), grid_.el_rx.size(),
          delay_axis_.size(), 2, 2};
}

ReflectivityTensor reflectivity_scan(const Target& target, const AngleGrid& grid, double d_tx,
                                     double d_rx, const FrequencyBand& band,
                                     const ScanOptions& options) {
  if (grid.size() == 0) throw ConfigError("reflectivity_scan: angle grid is empty");
  grid.validate();
  band.validate();
  const auto states = scatterer_states(target, options.time);
  const Vec3 center = target_reference(target, options.time).position;
  const double extent = max_extent(states, center);
  if (!(d_tx > extent) || !(d_rx > extent)) {
    throw ConfigError("reflectivity_scan: antenna radii must exceed the target extent");
  }

  const std::size_t n_delay = padded_length(band, options);
  ReflectivityTensor tensor(grid, centred_delay_axis(band, n_delay), d_tx, d_rx, band);
  const auto freqs = band.frequencies();
  const auto window = make_window(options.window, band.n_points);
  const std::size_t n_el_tx = grid.el_tx.size();
  const std::size_t n_az_rx = grid.az_rx.size();
  const std::size_t n_el_rx = grid.el_rx.size();

  parallel_for(grid.size(), [&](std::size_t flat) {
    std::size_t rest = flat;
    const std::size_t i_el_rx = rest % n_el_rx;
    rest /= n_el_rx;
    const std::size_t i_az_rx = rest % n_az_rx;
    rest /= n_az_rx;
    const std::size_t i_el_tx = rest % n_el_tx;
    const std::size_t i_az_tx = rest / n_el_tx;

    const Vec3 tx = center + d_tx * direction_from_angles(grid.az_tx[i_az_tx], grid.el_tx[i_el_tx]);
    const Vec3 rx = center + d_rx * direction_from_angles(grid.az_rx[i_az_rx], grid.el_rx[i_el_rx]);
    const auto response = bistatic_response(states, center, tx, rx, freqs);

    std::vector<Complex> spectrum(n_delay);
    ComplexVector delay(n_delay);
    Complex* out = tensor.raw().data() + flat * n_delay * 4;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        for (std::size_t n = 0; n < band.n_points; ++n) spectrum[n] = response[n](r, c);
        to_delay_profile(spectrum, window, delay);
        for (std::size_t d = 0; d < n_delay; ++d) out[d * 4 + static_cast<std::size_t>(r * 2 + c)] = delay[d];
      }
    }
  });
  return tensor;
}

std::vector<double> AngleSweep::angles() const {
  if (!(step > 0.0) || stop < start) throw ConfigError("angle sweep: need step > 0 and stop ≥ start");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = start + static_cast<double>(i) * step;
  return out;
}

FlyoverMap flyover_scan(const Target& target, double fixed_angle_deg, const AngleSweep& sweep,
                        double d_tx, double d_rx, const FrequencyBand& band,
                        const ScanOptions& options) {
  band.validate();
  FlyoverMap map;
  map.angles = sweep.angles();
  if (map.angles.empty()) throw ConfigError("flyover_scan: empty sweep");
  const auto states = scatterer_states(target, options.time);
  const Vec3 center = target_reference(target, options.time).position;
  const double extent = max_extent(states, center);
  if (!(d_tx > extent) || !(d_rx > extent)) {
    throw ConfigError("flyover_scan: antenna radii must exceed the target extent");
  }
  const std::size_t n_delay = padded_length(band, options);
  map.delay_axis = centred_delay_axis(band, n_delay);
  map.data = ComplexMatrix::Zero(static_cast<Eigen::Index>(map.angles.size()),
                                 static_cast<Eigen::Index>(n_delay));
  const auto freqs = band.frequencies();
  const auto window = make_window(options.window, band.n_points);
  const Vec3 tx = center + d_tx * direction_from_angles(fixed_angle_deg, 0.0);

  parallel_for(map.angles.size(), [&](std::size_t i) {
    const Vec3 rx = center + d_rx * direction_from_angles(fixed_angle_deg + map.angles[i], 0.0);
    const auto response = bistatic_response(states, center, tx, rx, freqs);
    std::vector<Complex> spectrum(n_delay);
    for (std::size_t n = 0; n < band.n_points; ++n) spectrum[n] = response[n](0, 0);
    ComplexVector delay(n_delay);
    to_delay_profile(spectrum, window, delay);
    auto row = map.data.row(static_cast<Eigen::Index>(i));
    for (std::size_t d = 0; d < n_delay; ++d) row[static_cast<Eigen::Index>(d)] = delay[d];
  });
  return map;
}

double delay_extent(std::span<const Complex> profile, std::span<const double> delay_axis,
                    double gate_center, double gate_width, double threshold_db) {
  if (profile.size() != delay_axis.size()) throw UsageError("delay_extent: size mismatch");
  if (!(threshold_db < 0.0)) throw UsageError("delay_extent: threshold must be below 0 dB");
  const double lo = gate_center - 0.5 * gate_width;
  const double hi = gate_center + 0.5 * gate_width;
  std::size_t first = profile.size();
  std::size_t last = 0;
  double peak = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (delay_axis[i] < lo || delay_axis[i] > hi) continue;
    first = std::min(first, i);
    last = i;
    peak = std::max(peak, std::norm(profile[i]));
  }
  if (first > last || peak <= 0.0) return 0.0;
  const auto level = [&](std::size_t i) { return to_db_power(std::norm(profile[i]) / peak); };
  std::size_t a = first;
  while (level(a) < threshold_db) ++a;
  std::size_t b = last;
  while (level(b) < threshold_db) --b;
  // Linear-in-dB interpolation towards the neighbouring (below-threshold) samples.
  const auto edge = [&](std::size_t in, std::size_t out) {
    const double t = (level(in) - threshold_db) / (level(in) - level(out));
    return delay_axis[in] + t * (delay_axis[out] - delay_axis[in]);
  };
  const double start = a > first ? edge(a, a - 1) : delay_axis[a];
  const double stop = b < last ? edge(b, b + 1) : delay_axis[b];
  return stop - start;
}

double point_response_extent(const FrequencyBand& band, const ScanOptions& options, double threshold_db) {
  band.validate();
  const std::size_t n = padded_length(band, options);
  std::vector<Complex> spectrum(n, Complex{1.0, 0.0});
  ComplexVector profile(n);
  to_delay_profile(spectrum, make_window(options.window, band.n_points), profile);
  const auto axis = centred_delay_axis(band, n);
  return delay_extent(profile, axis, 0.0, axis.back() - axis.front(), threshold_db);
}

double equivalent_rcs(Complex scattering_length) {
  return 4.0 * kPi * std::norm(scattering_length);
}

double scattering_length_for_rcs(double rcs) {
  if (rcs < 0.0) throw UsageError("RCS must be non-negative");
  return std::sqrt(rcs / (4.0 * kPi));
}

LinkBudgetResult link_budget(const LinkBudget& b) {
  if (!(b.d_tx > 0.0) || !(b.d_rx > 0.0)) throw UsageError("link_budget: distances must be positive");
  if (!(b.wavelength > 0.0)) throw UsageError("link_budget: wavelength must be positive");
  if (!(b.rcs > 0.0)) throw UsageError("link_budget: RCS must be positive");
  if (b.n_subcarriers < 1 || b.n_symbols < 1) throw UsageError("link_budget: integration counts must be ≥ 1");
  const double four_pi_cubed = std::pow(4.0 * kPi, 3);
  const double ratio = b.wavelength * b.wavelength * b.rcs /
                       (four_pi_cubed * b.d_tx * b.d_tx * b.d_rx * b.d_rx);
  LinkBudgetResult r;
  r.received_power_dbm = b.tx_power_dbm + b.tx_gain_dbi + b.rx_gain_dbi + 10.0 * std::log10(ratio);
  r.processing_gain_db = 10.0 * std::log10(static_cast<double>(b.n_subcarriers) *
                                           static_cast<double>(b.n_symbols));
  r.post_integration_power_dbm = r.received_power_dbm + r.processing_gain_db;
  return r;
}

}  // namespace bisim
