#include "bisim/channel.hpp"

#include <cmath>
#include <random>

#include "bisim/errors.hpp"
#include "bisim/fft.hpp"
#include "bisim/parallel.hpp"

namespace bisim {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// e^{−j2π(k−K/2)Δf τ} for all k. Computed by a rotating phasor re-anchored
// every few bins so the rounding drift stays at a few ulps.
void delay_ramp(double delay, double spacing, std::size_t n, Complex* out) {
  constexpr std::size_t kAnchorEvery = 32;
  const double half = static_cast<double>(n / 2);
  const Complex step = std::polar(1.0, -kTwoPi * spacing * delay);
  Complex value;
  for (std::size_t k = 0; k < n; ++k) {
    if (k % kAnchorEvery == 0) {
      value = std::polar(1.0, -kTwoPi * (static_cast<double>(k) - half) * spacing * delay);
    } else {
      value *= step;
    }
    out[k] = value;
  }
}

void check_paths(const std::vector<PathParameterSet>& paths) {
  for (const auto& p : paths) {
    if (!(p.delay >= 0.0) || !std::isfinite(p.delay)) {
      throw UsageError("synth_cfr: path delay must be finite and non-negative");
    }
  }
}

}  // namespace

WaveformConfig WaveformConfig::from_numerology(double carrier_hz, double bandwidth_hz,
                                               std::size_t n_subcarriers, std::size_t n_symbols) {
  WaveformConfig w;
  w.carrier_hz = carrier_hz;
  w.bandwidth_hz = bandwidth_hz;
  w.n_subcarriers = n_subcarriers;
  w.n_symbols = n_symbols;
  w.symbol_duration = static_cast<double>(n_subcarriers) / bandwidth_hz;
  return w;
}

void WaveformConfig::validate() const {
  if (n_subcarriers < 1 || n_symbols < 1) {
    throw ConfigError("waveform: subcarrier and symbol counts must be at least 1");
  }
  if (!(carrier_hz > 0.0) || !(bandwidth_hz > 0.0) || !(symbol_duration > 0.0)) {
    throw ConfigError("waveform: carrier, bandwidth and symbol duration must be positive");
  }
  const double product = subcarrier_spacing() * symbol_duration;
  if (std::abs(product - 1.0) > 1e-12) {
    throw ConfigError("waveform: symbol duration must equal 1/subcarrier spacing (orthogonality)");
  }
}

SlowTimeCube synth_cfr(const PathSource& paths, const WaveformConfig& waveform, SynthMode mode,
                       double timestamp) {
  waveform.validate();
  const std::size_t n_sym = waveform.n_symbols;
  const std::size_t n_sc = waveform.n_subcarriers;
  const double spacing = waveform.subcarrier_spacing();
  const double t_sym = waveform.symbol_duration;

  SlowTimeCube cube;
  cube.waveform = waveform;
  cube.timestamp = timestamp;
  cube.data = ComplexMatrix::Zero(static_cast<Eigen::Index>(n_sym), static_cast<Eigen::Index>(n_sc));

  if (mode == SynthMode::kFixed) {
    const auto* fixed = std::get_if<std::vector<PathParameterSet>>(&paths);
    if (fixed == nullptr) {
      throw UsageError("synth_cfr: fixed mode needs a path snapshot, not a time-varying callback");
    }
    check_paths(*fixed);
    ComplexMatrix ramps(static_cast<Eigen::Index>(fixed->size()), static_cast<Eigen::Index>(n_sc));
    const double half = static_cast<double>(n_sc / 2);
    for (std::size_t i = 0; i < fixed->size(); ++i) {
      for (std::size_t k = 0; k < n_sc; ++k) {
        ramps(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            std::polar(1.0, -kTwoPi * (static_cast<double>(k) - half) * spacing * (*fixed)[i].delay);
      }
    }
    parallel_for(n_sym, [&](std::size_t m) {
      auto row = cube.data.row(static_cast<Eigen::Index>(m));
      for (std::size_t i = 0; i < fixed->size(); ++i) {
        const auto& p = (*fixed)[i];
        const Complex phasor =
            p.gain * std::polar(1.0, kTwoPi * p.doppler * static_cast<double>(m) * t_sym);
        row += phasor * ramps.row(static_cast<Eigen::Index>(i));
      }
    });
    return cube;
  }

  const auto* callback = std::get_if<PathCallback>(&paths);
  if (callback == nullptr || !*callback) {
    throw UsageError("synth_cfr: geometric mode needs a scene callback");
  }
  parallel_for(n_sym, [&](std::size_t m) {
    const double t = timestamp + static_cast<double>(m) * t_sym;
    const auto snapshot = (*callback)(t);
    check_paths(snapshot);
    ComplexVector ramp(n_sc);
    Complex* row = cube.data.row(static_cast<Eigen::Index>(m)).data();
    for (const auto& p : snapshot) {
      delay_ramp(p.delay, spacing, n_sc, ramp.data());
      for (std::size_t k = 0; k < n_sc; ++k) row[k] += p.gain * ramp[k];
    }
  });
  return cube;
}

SlowTimeCube add_noise(const SlowTimeCube& cube, double snr_db, std::uint64_t seed,
                       std::uint64_t stream) {
  if (std::isinf(snr_db) && snr_db > 0.0) return cube;
  if (std::isnan(snr_db)) throw UsageError("add_noise: SNR is NaN");
  SlowTimeCube out = cube;
  const double variance = cube.mean_power() / std::pow(10.0, snr_db / 10.0);
  const double sigma = std::sqrt(0.5 * variance);
  const auto rows = static_cast<std::size_t>(cube.data.rows());
  const std::uint64_t base = splitmix64(seed) ^ splitmix64(~stream);
  parallel_for(rows, [&](std::size_t m) {
    std::mt19937_64 rng(splitmix64(base + static_cast<std::uint64_t>(m)));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto row = out.data.row(static_cast<Eigen::Index>(m));
    for (Eigen::Index k = 0; k < row.size(); ++k) {
      const double re = normal(rng);
      const double im = normal(rng);
      row[k] += Complex(sigma * re, sigma * im);
    }
  });
  return out;
}

const char* window_name(Window w) {
  switch (w) {
    case Window::kRectangular:
      return "rectangular";
    case Window::kHann:
      return "hann";
    case Window::kGaussian:
      return "gaussian";
  }
  return "rectangular";
}

std::optional<Window> parse_window(const std::string& name) {
  if (name == "rectangular" || name == "none" || name == "rect") return Window::kRectangular;
  if (name == "hann") return Window::kHann;
  if (name == "gaussian") return Window::kGaussian;
  return std::nullopt;
}

std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (n < 2) return out;
  const double last = static_cast<double>(n - 1);
  switch (w) {
    case Window::kRectangular:
      break;
    case Window::kHann:
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) / last));
      }
      break;
    case Window::kGaussian: {
      const double sigma = static_cast<double>(n) / 6.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = (static_cast<double>(i) - 0.5 * last) / sigma;
        out[i] = std::exp(-0.5 * x * x);
      }
      break;
    }
  }
  return out;
}

ComplexVector cir_from_cfr(std::span<const Complex> row, Window window) {
  ComplexVector in(row.begin(), row.end());
  if (window != Window::kRectangular) {
    const auto w = make_window(window, in.size());
    for (std::size_t k = 0; k < in.size(); ++k) in[k] *= w[k];
  }
  ComplexVector out(in.size());
  fft_inverse(in, out);
  const double scale = in.empty() ? 1.0 : 1.0 / static_cast<double>(in.size());
  for (auto& v : out) v *= scale;
  return out;
}

NyquistReport nyquist_check(double max_speed, double wavelength, double symbol_duration) {
  NyquistReport r;
  r.spatial_step = max_speed * symbol_duration;
  r.ok = r.spatial_step < 0.5 * wavelength;
  return r;
}

}  // namespace bisim
