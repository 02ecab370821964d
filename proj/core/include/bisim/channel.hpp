#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bisim/types.hpp"

namespace bisim {

/// OFDM numerology. Subcarrier k sits at f_c + (k − K/2)·Δf.
struct WaveformConfig {
  double carrier_hz = 3.7e9;
  double bandwidth_hz = 160e6;
  std::size_t n_subcarriers = 1280;
  double symbol_duration = 8e-6;  // s
  std::size_t n_symbols = 2048;

  /// Builds a config whose symbol duration is the orthogonal 1/Δf.
  static WaveformConfig from_numerology(double carrier_hz, double bandwidth_hz,
                                        std::size_t n_subcarriers, std::size_t n_symbols);

  double subcarrier_spacing() const { return bandwidth_hz / static_cast<double>(n_subcarriers); }
  double wavelength() const { return wavelength_of(carrier_hz); }
  double observation_time() const { return symbol_duration * static_cast<double>(n_symbols); }
  double delay_resolution() const { return 1.0 / bandwidth_hz; }
  double doppler_resolution() const { return 1.0 / observation_time(); }

  /// Throws ConfigError unless K, M ≥ 1, values positive and Δf·T_sym = 1 to 1e−12.
  void validate() const;
};

/// One propagation path, the unit of channel composition.
struct PathParameterSet {
  double delay = 0.0;    // s, ≥ 0
  double doppler = 0.0;  // Hz
  Complex gain{0.0, 0.0};
  Vec3 departure = Vec3::UnitX();  // unit vector leaving the Tx
  Vec3 arrival = Vec3::UnitX();    // unit vector from the Rx towards the last interaction
  std::optional<JonesMatrix> jones;
};

/// Channel frequency response over (symbol × subcarrier).
struct SlowTimeCube {
  ComplexMatrix data;  // n_symbols × n_subcarriers
  WaveformConfig waveform;
  double timestamp = 0.0;  // time of symbol 0, s

  double energy() const { return data.squaredNorm(); }
  double mean_power() const {
    return data.size() ? data.squaredNorm() / static_cast<double>(data.size()) : 0.0;
  }
};

enum class SynthMode { kFixed, kGeometric };

/// Re-evaluates the full path set at absolute time t (s). Gains carry the
/// carrier phase e^{−j2π f_c τ(t)}.
using PathCallback = std::function<std::vector<PathParameterSet>(double t)>;
using PathSource = std::variant<std::vector<PathParameterSet>, PathCallback>;

/// Fixed mode: H[m,k] = Σ a·e^{−j2π(k−K/2)Δf τ}·e^{+j2π f_D m T_sym} from one
/// path snapshot. Geometric mode: paths re-evaluated at t = timestamp + m·T_sym.
/// Throws UsageError when the source kind does not match the mode.
SlowTimeCube synth_cfr(const PathSource& paths, const WaveformConfig& waveform, SynthMode mode,
                       double timestamp = 0.0);

inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

/// Adds circular complex white Gaussian noise with variance mean|H|²/10^(snr/10).
/// Row m draws from a stream derived from (seed, stream, m), so output does not
/// depend on the worker count. snr_db = +∞ returns the input unchanged.
SlowTimeCube add_noise(const SlowTimeCube& cube, double snr_db, std::uint64_t seed,
                       std::uint64_t stream = 0);

enum class Window { kRectangular, kHann, kGaussian };

const char* window_name(Window w);
std::optional<Window> parse_window(const std::string& name);
/// Window coefficients of length n; the Gaussian uses σ = n/6 samples.
std::vector<double> make_window(Window w, std::size_t n);

/// Inverse DFT over subcarriers, h[n] = (1/K) Σ H[k] e^{+j2πkn/K}; bin n is
/// delay n/B. Hann tapering is applied in the frequency domain.
ComplexVector cir_from_cfr(std::span<const Complex> row, Window window = Window::kRectangular);

struct NyquistReport {
  bool ok = false;
  double spatial_step = 0.0;  // m travelled per symbol
};

/// ok iff v_max·T_sym < λ/2.
NyquistReport nyquist_check(double max_speed, double wavelength, double symbol_duration);

}  // namespace bisim
