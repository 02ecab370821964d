#pragma once

#include <span>
#include <vector>

#include "bisim/channel.hpp"
#include "bisim/types.hpp"

namespace bisim {

/// Delay × Doppler transform of a slow-time cube. Both transforms are unitary
/// (1/√K, 1/√M) so that with rectangular windows map energy equals cube energy.
struct DelayDopplerMap {
  ComplexMatrix data;                // delay bins × Doppler bins
  std::vector<double> delay_axis;    // s, bin n at n/B
  std::vector<double> doppler_axis;  // Hz, zero at column M/2
  Window fast_window = Window::kRectangular;
  Window slow_window = Window::kRectangular;
  double los_delay = 0.0;  // s, subtracted to form excess delays

  std::size_t zero_doppler_column() const { return doppler_axis.size() / 2; }
};

struct MapWindows {
  Window fast = Window::kRectangular;
  Window slow = Window::kRectangular;
};

/// Throws UsageError for fewer than two symbols.
DelayDopplerMap delay_doppler_map(const SlowTimeCube& cube, const MapWindows& windows = {});

/// Elementwise measurement − background. Throws UsageError on shape or waveform mismatch.
SlowTimeCube background_subtract(const SlowTimeCube& measurement, const SlowTimeCube& background);

struct DelayProfile {
  ComplexVector samples;
  std::vector<double> delay_axis;  // s
};

enum class GateShape { kHard, kRaisedCosine };

struct GateOptions {
  GateShape shape = GateShape::kHard;
  double taper = 0.25;  // raised-cosine edge length as a fraction of the width
};

/// Zeroes bins outside [center − width/2, center + width/2]. A raised-cosine
/// gate additionally tapers the inner edges. Throws UsageError if the gate
/// misses the delay axis entirely.
DelayProfile time_gate(const DelayProfile& profile, double center, double width,
                       const GateOptions& options = {});

struct CleanOptions {
  std::size_t oversample = 8;     // zero-padding factor of the coarse delay search
  std::size_t max_cycles = 50;    // joint re-refinement sweeps after each new path
  double floor_margin_db = 3.0;  // a peak closer than this to the expected noise maximum is noise
};

struct CleanResult {
  SlowTimeCube residual;
  std::vector<PathParameterSet> removed;  // zero Doppler, LS gains
  std::vector<bool> at_noise_floor;       // per removed path
};

/// Iterative CLEAN of static (zero-Doppler) paths from the slow-time average.
CleanResult subtract_dominant_paths(const SlowTimeCube& cube, std::size_t n_paths,
                                    const CleanOptions& options = {});

struct Spectrogram {
  RealMatrix data;                   // frames × fft_size, dB re. map peak
  std::vector<double> time_axis;     // s, frame start
  std::vector<double> doppler_axis;  // Hz
  std::size_t fft_size = 2048;
  std::size_t hop = 32;
  Window window = Window::kGaussian;
  double gaussian_sigma = 2048.0 / 6.0;  // samples
};

struct StftOptions {
  std::size_t fft_size = 2048;
  std::size_t hop = 32;
  Window window = Window::kGaussian;
};

/// Sliding windowed FFT over slow time. Throws UsageError if the series is
/// shorter than one FFT or the hop is zero.
Spectrogram stft_spectrogram(std::span<const Complex> series, double symbol_duration,
                             const StftOptions& options = {});

struct SpectralSupport {
  double lower = 0.0;  // Hz
  double upper = 0.0;  // Hz
  std::vector<double> mean_db;  // time-averaged spectrum, dB re. its peak
};

/// Outermost Doppler frequencies at which the frame-averaged (linear power)
/// spectrum crosses level_db relative to its peak, interpolated linearly in dB
/// between bins.
SpectralSupport spectral_support(const Spectrogram& spectrogram, double level_db = -20.0);

/// Slow-time series of one delay bin (unitary inverse transform of each row).
ComplexVector slow_time_series(const SlowTimeCube& cube, std::size_t delay_bin);

struct Detection {
  double delay = 0.0;    // s (parabolically refined)
  double doppler = 0.0;  // Hz (parabolically refined)
  double power_db = 0.0;
  double excess_delay = 0.0;  // s
  std::size_t delay_bin = 0;
  std::size_t doppler_bin = 0;
};

/// Local maxima at least threshold_db above the median map magnitude,
/// strongest first.
std::vector<Detection> detect_peaks(const DelayDopplerMap& map, double threshold_db,
                                    bool exclude_zero_doppler);

}  // namespace bisim
