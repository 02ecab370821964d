#pragma once

#include <variant>
#include <vector>

#include "bisim/channel.hpp"
#include "bisim/geometry.hpp"
#include "bisim/types.hpp"

namespace bisim {

/// Point scatterer of an extended target. `amplitude` is a complex scattering
/// length in metres (σ = 4π|s|²); `jones` maps incident (Tx) to scattered (Rx)
/// polarization in the (H, V) basis, entry (rx, tx).
struct PointScatterer {
  Vec3 offset = Vec3::Zero();  // body frame, m
  Complex amplitude{1.0, 0.0};
  JonesMatrix jones = JonesMatrix::Identity();
};

/// Cloud of point scatterers translating along a track, body frame yawed by `yaw`.
struct RigidTarget {
  std::vector<PointScatterer> scatterers;
  Trajectory trajectory = Trajectory::stationary(Vec3::Zero());
  double yaw = 0.0;  // rad about +z
};

/// Rotating propeller sampled as uniform line arrays from hub (r = 0) to tip (r = R).
struct Rotor {
  Vec3 hub_offset = Vec3::Zero();  // relative to the host track position
  Vec3 axis = Vec3::UnitZ();
  double blade_radius = 0.12;  // m
  double rate = 625.0;         // rad/s, positive = counter-clockwise about axis
  std::size_t n_blades = 2;
  std::size_t samples_per_blade = 32;
  Complex sample_amplitude{0.01, 0.0};
  JonesMatrix jones = JonesMatrix::Identity();
  double initial_angle = 0.0;  // rad, blade 0 at t = 0
  Trajectory trajectory = Trajectory::stationary(Vec3::Zero());

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  /// Largest distance between neighbouring samples on one blade.
  double sample_spacing() const;
};

using Target = std::variant<RigidTarget, Rotor>;

struct ScattererState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Complex amplitude{0.0, 0.0};
  JonesMatrix jones = JonesMatrix::Identity();
};

/// Reference point (track position) of a target at time t.
NodePose target_reference(const Target& target, double t);

std::vector<ScattererState> scatterer_states(const Target& target, double t);

/// One bounce off every scatterer, spherical wavefronts on both legs:
/// τ = (d_tx + d_rx)/c, a = s·λ/(4π d_tx d_rx)·e^{−j2π cτ/λ}, Doppler from
/// the scatterer's own velocity. Throws GeometryError on coincidence.
std::vector<PathParameterSet> paths_from_states(const std::vector<ScattererState>& states,
                                                const NodePose& tx, const NodePose& rx,
                                                double wavelength);

std::vector<PathParameterSet> target_paths(const Target& target, const NodePose& tx,
                                           const NodePose& rx, double t, double wavelength);

enum class Polarization { kH = 0, kV = 1 };

/// Scales each path's gain by its Jones entry (rx, tx); paths without Jones are unchanged.
std::vector<PathParameterSet> select_polarization(std::vector<PathParameterSet> paths,
                                                  Polarization tx, Polarization rx);

struct AngleGrid {
  std::vector<double> az_tx, el_tx, az_rx, el_rx;  // deg, strictly increasing
  std::size_t size() const { return az_tx.size() * el_tx.size() * az_rx.size() * el_rx.size(); }
  void validate() const;
};

struct FrequencyBand {
  double f_lo = 2e9;
  double f_hi = 18e9;
  std::size_t n_points = 801;

  double step() const;
  std::vector<double> frequencies() const;
  void validate() const;
};

/// Distance-calibrated bistatic reflectivity (scattering length, m) of a
/// target centred at `center`, seen from antennas at tx_pos and rx_pos:
/// R(f) = Σ s_i·J_i·(d_tx d_rx)/(d_tx,i d_rx,i)·e^{−j2πf(τ_i − τ_ref)}, with
/// d_tx, d_rx and τ_ref = (d_tx + d_rx)/c taken to the centre. The channel
/// gain follows as R·λ/(4π d_tx d_rx)·e^{−j2πfτ_ref}.
std::vector<JonesMatrix> bistatic_response(const std::vector<ScattererState>& states,
                                           const Vec3& center, const Vec3& tx_pos,
                                           const Vec3& rx_pos, std::span<const double> frequencies);

/// Delay-resolved, polarimetric reflectivity over a 4-D angle grid.
/// Storage is row-major [az_tx][el_tx][az_rx][el_rx][delay][2][2].
class ReflectivityTensor {
 public:
  ReflectivityTensor() = default;
  ReflectivityTensor(AngleGrid grid, std::vector<double> delay_axis, double d_tx, double d_rx,
                     FrequencyBand band);

  const AngleGrid& grid() const { return grid_; }
  const std::vector<double>& delay_axis() const { return delay_axis_; }  // s, relative to τ_ref
  double d_tx() const { return d_tx_; }
  double d_rx() const { return d_rx_; }
  const FrequencyBand& band() const { return band_; }

  std::size_t flat_index(std::size_t i_az_tx, std::size_t i_el_tx, std::size_t i_az_rx,
                         std::size_t i_el_rx) const;
  JonesMatrix at(std::size_t i_az_tx, std::size_t i_el_tx, std::size_t i_az_rx,
                 std::size_t i_el_rx, std::size_t delay_bin) const;
  /// Delay profile of one angle point, one polarization pair.
  ComplexVector profile(std::size_t grid_point, Polarization tx, Polarization rx) const;

  std::vector<Complex>& raw() { return data_; }
  const std::vector<Complex>& raw() const { return data_; }
  std::vector<std::size_t> shape() const;

 private:
  AngleGrid grid_;
  std::vector<double> delay_axis_;
  double d_tx_ = 0.0;
  double d_rx_ = 0.0;
  FrequencyBand band_;
  std::vector<Complex> data_;
};

struct ScanOptions {
  Window window = Window::kHann;
  double time = 0.0;            // target snapshot time, s
  std::size_t oversample = 1;   // zero-padding factor of the delay transform
};

/// Places Tx and Rx at radii d_tx, d_rx around the target reference point for
/// every grid point, sweeps the band and inverse-transforms to delay (centred
/// on τ_ref). Throws ConfigError on an empty grid or radii inside the target.
ReflectivityTensor reflectivity_scan(const Target& target, const AngleGrid& grid, double d_tx,
                                     double d_rx, const FrequencyBand& band,
                                     const ScanOptions& options = {});

struct AngleSweep {
  double start = 10.0;  // deg
  double stop = 180.0;
  double step = 1.0;
  std::vector<double> angles() const;
};

/// (bistatic angle × delay) H–H reflectivity with one gantry fixed and the other swept.
struct FlyoverMap {
  std::vector<double> angles;       // deg, relative to the fixed gantry
  std::vector<double> delay_axis;   // s, relative to τ_ref
  ComplexMatrix data;               // angles × delays
};

/// Tx gantry at (fixed_angle, 0° elevation); Rx at fixed_angle + β for each swept β.
FlyoverMap flyover_scan(const Target& target, double fixed_angle_deg, const AngleSweep& sweep,
                        double d_tx, double d_rx, const FrequencyBand& band,
                        const ScanOptions& options = {});

/// Width (s) of the region inside [center − width/2, center + width/2] whose
/// power lies within threshold_db of the in-gate peak, from the first to the
/// last crossing (linear-in-dB interpolation). Zero for an all-zero gate.
double delay_extent(std::span<const Complex> profile, std::span<const double> delay_axis,
                    double gate_center, double gate_width, double threshold_db = -10.0);

/// delay_extent of a single point scatterer under the same band, window and
/// oversampling: the system response width to subtract from a target extent.
double point_response_extent(const FrequencyBand& band, const ScanOptions& options,
                             double threshold_db = -10.0);

/// σ = 4π|s|² (m²).
double equivalent_rcs(Complex scattering_length);
/// |s| giving the requested RCS.
double scattering_length_for_rcs(double rcs);

struct LinkBudget {
  double tx_power_dbm = 30.0;
  double tx_gain_dbi = 0.0;
  double rx_gain_dbi = 0.0;
  double wavelength = kSpeedOfLight / 3.7e9;
  double d_tx = 100.0;
  double d_rx = 100.0;
  double rcs = 1.0;  // m²
  std::size_t n_subcarriers = 1280;
  std::size_t n_symbols = 2048;
};

struct LinkBudgetResult {
  double received_power_dbm = 0.0;
  double processing_gain_db = 0.0;
  double post_integration_power_dbm = 0.0;
};

/// Bistatic radar equation plus coherent integration gain 10·log10(K·M).
/// Throws UsageError on non-positive distances, wavelength or RCS.
LinkBudgetResult link_budget(const LinkBudget& budget);

}  // namespace bisim
