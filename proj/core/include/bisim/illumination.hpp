#pragma once

#include <span>
#include <vector>

#include "bisim/channel.hpp"
#include "bisim/geometry.hpp"
#include "bisim/types.hpp"

namespace bisim {

/// Conjugate of the Tx→target spectrum scaled to unit energy, the frequency
/// domain form of the time-mirrored conjugate impulse response. Throws
/// UsageError for an all-zero input.
ComplexVector time_reversal_prefilter(std::span<const Complex> tx_to_target_cfr);

struct FocusingReport {
  double focused_peak = 0.0;       // peak delay-bin power with the prefilter
  double unfocused_peak = 0.0;     // peak delay-bin power with a flat unit-energy spectrum
  double unfocused_energy = 0.0;   // total received energy with the flat spectrum
  double gain = 0.0;               // focused_peak / unfocused_peak (≥ 1)
  ComplexVector focused_profile;   // received delay profile at the target
  ComplexVector unfocused_profile;
};

/// Received delay profiles at the target for a unit-energy transmit spectrum,
/// with and without time-reversal predistortion.
FocusingReport focusing_gain(std::span<const Complex> tx_to_target_cfr);

struct DopplerCompensation {
  std::vector<PathParameterSet> paths;  // Dopplers after per-path offsets
  std::vector<double> offsets;          // Hz, −f_D,i + f_ref
  double reference = 0.0;               // power-weighted mean Doppler, Hz
  double spread_before = 0.0;           // power-weighted RMS Doppler spread, Hz
  double spread_after = 0.0;
};

/// Per-path frequency predistortion that aligns every illumination path on
/// the power-weighted mean Doppler. Throws UsageError for an empty path list.
DopplerCompensation doppler_precompensate(const std::vector<PathParameterSet>& paths);

/// Power-weighted RMS Doppler spread of a path set.
double doppler_spread(const std::vector<PathParameterSet>& paths);

/// One-way illumination paths from a Tx to a moving point: the direct path
/// plus one bounce off each static clutter point (scattering length in m).
struct ClutterPoint {
  Vec3 position = Vec3::Zero();
  Complex amplitude{1.0, 0.0};
};

std::vector<PathParameterSet> illumination_paths(const NodePose& tx, const Vec3& target_position,
                                                 const Vec3& target_velocity,
                                                 const std::vector<ClutterPoint>& clutter,
                                                 double wavelength);

}  // namespace bisim
