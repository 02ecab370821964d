#include "bisim/illumination.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bisim/errors.hpp"
#include "bisim/fft.hpp"

namespace bisim {
namespace {

ComplexVector unitary_profile(const ComplexVector& spectrum) {
  ComplexVector out(spectrum.size());
  fft_inverse(spectrum, out);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spectrum.size()));
  for (auto& v : out) v *= scale;
  return out;
}

double peak_power(const ComplexVector& v) {
  double p = 0.0;
  for (const auto& x : v) p = std::max(p, std::norm(x));
  return p;
}

}  // namespace

ComplexVector time_reversal_prefilter(std::span<const Complex> cfr) {
  double energy = 0.0;
  for (const auto& h : cfr) energy += std::norm(h);
  if (!(energy > 0.0)) throw UsageError("time_reversal_prefilter: channel has zero energy");
  const double scale = 1.0 / std::sqrt(energy);
  ComplexVector out(cfr.size());
  std::transform(cfr.begin(), cfr.end(), out.begin(), [scale](Complex h) { return std::conj(h) * scale; });
  return out;
}

FocusingReport focusing_gain(std::span<const Complex> cfr) {
  const auto prefilter = time_reversal_prefilter(cfr);
  const std::size_t n = cfr.size();
  const double flat = 1.0 / std::sqrt(static_cast<double>(n));
  ComplexVector focused(n);
  ComplexVector unfocused(n);
  for (std::size_t k = 0; k < n; ++k) {
    focused[k] = prefilter[k] * cfr[k];
    unfocused[k] = flat * cfr[k];
  }
  FocusingReport r;
  r.focused_profile = unitary_profile(focused);
  r.unfocused_profile = unitary_profile(unfocused);
  r.focused_peak = peak_power(r.focused_profile);
  r.unfocused_peak = peak_power(r.unfocused_profile);
  r.unfocused_energy = 0.0;
  for (const auto& x : r.unfocused_profile) r.unfocused_energy += std::norm(x);
  r.gain = r.focused_peak / r.unfocused_peak;
  return r;
}

double doppler_spread(const std::vector<PathParameterSet>& paths) {
  double total = 0.0;
  double mean = 0.0;
  for (const auto& p : paths) {
    total += std::norm(p.gain);
    mean += std::norm(p.gain) * p.doppler;
  }
  if (!(total > 0.0)) return 0.0;
  mean /= total;
  double var = 0.0;
  for (const auto& p : paths) var += std::norm(p.gain) * (p.doppler - mean) * (p.doppler - mean);
  return std::sqrt(var / total);
}

DopplerCompensation doppler_precompensate(const std::vector<PathParameterSet>& paths) {
  if (paths.empty()) throw UsageError("doppler_precompensate: no paths");
  DopplerCompensation out;
  double total = 0.0;
  for (const auto& p : paths) {
    total += std::norm(p.gain);
    out.reference += std::norm(p.gain) * p.doppler;
  }
  out.reference = total > 0.0 ? out.reference / total : paths.front().doppler;
  out.spread_before = doppler_spread(paths);
  out.paths = paths;
  out.offsets.reserve(paths.size());
  for (auto& p : out.paths) {
    const double offset = -p.doppler + out.reference;
    out.offsets.push_back(offset);
    p.doppler += offset;
  }
  out.spread_after = doppler_spread(out.paths);
  return out;
}

std::vector<PathParameterSet> illumination_paths(const NodePose& tx, const Vec3& target_position,
                                                 const Vec3& target_velocity,
                                                 const std::vector<ClutterPoint>& clutter,
                                                 double wavelength) {
  if (!(wavelength > 0.0)) throw UsageError("illumination_paths: wavelength must be positive");
  std::vector<PathParameterSet> paths;
  paths.reserve(clutter.size() + 1);

  const Vec3 u_direct = unit_vector(tx.position, target_position);
  const double d = (target_position - tx.position).norm();
  PathParameterSet direct;
  direct.delay = d / kSpeedOfLight;
  direct.doppler = -u_direct.dot(target_velocity - tx.velocity) / wavelength;
  direct.gain = wavelength / (4.0 * kPi * d) * std::polar(1.0, -kTwoPi * d / wavelength);
  direct.departure = u_direct;
  direct.arrival = -u_direct;
  paths.push_back(direct);

  for (const auto& c : clutter) {
    const Vec3 u1 = unit_vector(tx.position, c.position);
    const Vec3 u2 = unit_vector(c.position, target_position);
    const double d1 = (c.position - tx.position).norm();
    const double d2 = (target_position - c.position).norm();
    PathParameterSet p;
    p.delay = (d1 + d2) / kSpeedOfLight;
    // The clutter point is static: only Tx motion on leg 1 and target motion on leg 2 count.
    p.doppler = -(-u1.dot(tx.velocity) + u2.dot(target_velocity)) / wavelength;
    p.gain = c.amplitude * wavelength / (4.0 * kPi * d1 * d2) *
             std::polar(1.0, -kTwoPi * (d1 + d2) / wavelength);
    p.departure = u1;
    p.arrival = -u2;
    paths.push_back(p);
  }
  return paths;
}

}  // namespace bisim
