#include "bisim/echo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bisim/errors.hpp"
#include "bisim/fft.hpp"
#include "bisim/parallel.hpp"

namespace bisim {
namespace {

bool same_waveform(const WaveformConfig& a, const WaveformConfig& b) {
  return a.carrier_hz == b.carrier_hz && a.bandwidth_hz == b.bandwidth_hz &&
         a.n_subcarriers == b.n_subcarriers && a.symbol_duration == b.symbol_duration &&
         a.n_symbols == b.n_symbols;
}

double parabolic_offset(double left, double centre, double right) {
  const double denom = left - 2.0 * centre + right;
  if (denom == 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

// Static-path fitting on the slow-time-averaged response.
class StaticPathFitter {
 public:
  StaticPathFitter(std::vector<Complex> average, double spacing)
      : average_(std::move(average)), spacing_(spacing), half_(static_cast<double>(average_.size() / 2)) {}

  std::size_t size() const { return average_.size(); }

  // Σ_k y_k·e^{+j2π(k−K/2)Δf τ}: correlation with the unit delay ramp.
  static Complex correlate(const std::vector<Complex>& y, double delay, double spacing, double half) {
    const Complex step = std::polar(1.0, kTwoPi * spacing * delay);
    Complex value;
    Complex acc;
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (k % 32 == 0) {
        value = std::polar(1.0, kTwoPi * (static_cast<double>(k) - half) * spacing * delay);
      } else {
        value *= step;
      }
      acc += y[k] * value;
    }
    return acc;
  }

  static void add_ramp(std::vector<Complex>& y, Complex gain, double delay, double spacing,
                       double half) {
    for (std::size_t k = 0; k < y.size(); ++k) {
      y[k] += gain * std::polar(1.0, -kTwoPi * (static_cast<double>(k) - half) * spacing * delay);
    }
  }

  // Golden-section maximization of |corr(τ)|² on [lo, hi]; keeps the start
  // point if the search does not beat it.
  double refine(const std::vector<Complex>& y, double start, double lo, double hi) const {
    const auto score = [&](double tau) { return std::norm(correlate(y, tau, spacing_, half_)); };
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo;
    double b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = score(c);
    double fd = score(d);
    for (int it = 0; it < 100 && (b - a) > 1e-7 / (spacing_ * static_cast<double>(size())); ++it) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kInvPhi * (b - a);
        fc = score(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kInvPhi * (b - a);
        fd = score(d);
      }
    }
    const double best = 0.5 * (a + b);
    return score(best) >= score(start) ? best : start;
  }

  double spacing() const { return spacing_; }
  double half() const { return half_; }
  const std::vector<Complex>& average() const { return average_; }

 private:
  std::vector<Complex> average_;
  double spacing_;
  double half_;
};

}  // namespace

DelayDopplerMap delay_doppler_map(const SlowTimeCube& cube, const MapWindows& windows) {
  const auto n_sym = static_cast<std::size_t>(cube.data.rows());
  const auto n_sc = static_cast<std::size_t>(cube.data.cols());
  if (n_sym < 2) throw UsageError("delay_doppler_map: need at least two symbols");
  const auto fast = make_window(windows.fast, n_sc);
  const auto slow = make_window(windows.slow, n_sym);

  // Fast time: per symbol, subcarriers → delay.
  ComplexMatrix delay_rows(static_cast<Eigen::Index>(n_sym), static_cast<Eigen::Index>(n_sc));
  const double fast_scale = 1.0 / std::sqrt(static_cast<double>(n_sc));
  parallel_for(n_sym, [&](std::size_t m) {
    ComplexVector in(n_sc);
    ComplexVector out(n_sc);
    for (std::size_t k = 0; k < n_sc; ++k) {
      in[k] = cube.data(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) * fast[k];
    }
    fft_inverse(in, out);
    for (std::size_t k = 0; k < n_sc; ++k) {
      delay_rows(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = out[k] * fast_scale;
    }
  });

  DelayDopplerMap map;
  map.fast_window = windows.fast;
  map.slow_window = windows.slow;
  map.data.resize(static_cast<Eigen::Index>(n_sc), static_cast<Eigen::Index>(n_sym));
  const double slow_scale = 1.0 / std::sqrt(static_cast<double>(n_sym));
  // Slow time: per delay bin, symbols → Doppler, zero Doppler centred.
  parallel_for(n_sc, [&](std::size_t n) {
    ComplexVector in(n_sym);
    ComplexVector out(n_sym);
    for (std::size_t m = 0; m < n_sym; ++m) {
      in[m] = delay_rows(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) * slow[m];
    }
    fft_forward(in, out);
    fftshift(out);
    for (std::size_t j = 0; j < n_sym; ++j) {
      map.data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = out[j] * slow_scale;
    }
  });

  const double bandwidth = cube.waveform.bandwidth_hz;
  map.delay_axis.resize(n_sc);
  for (std::size_t n = 0; n < n_sc; ++n) map.delay_axis[n] = static_cast<double>(n) / bandwidth;
  const double doppler_bin = 1.0 / (static_cast<double>(n_sym) * cube.waveform.symbol_duration);
  map.doppler_axis.resize(n_sym);
  const auto zero = static_cast<double>(n_sym / 2);
  for (std::size_t j = 0; j < n_sym; ++j) {
    map.doppler_axis[j] = (static_cast<double>(j) - zero) * doppler_bin;
  }
  return map;
}

SlowTimeCube background_subtract(const SlowTimeCube& measurement, const SlowTimeCube& background) {
  if (measurement.data.rows() != background.data.rows() ||
      measurement.data.cols() != background.data.cols()) {
    throw UsageError("background_subtract: cube shapes differ");
  }
  if (!same_waveform(measurement.waveform, background.waveform)) {
    throw UsageError("background_subtract: waveform configurations differ");
  }
  SlowTimeCube out = measurement;
  out.data -= background.data;
  return out;
}

DelayProfile time_gate(const DelayProfile& profile, double center, double width,
                       const GateOptions& options) {
  if (profile.samples.size() != profile.delay_axis.size()) {
    throw UsageError("time_gate: profile and axis sizes differ");
  }
  if (!(width > 0.0)) throw UsageError("time_gate: width must be positive");
  const double lo = center - 0.5 * width;
  const double hi = center + 0.5 * width;
  if (profile.delay_axis.empty() || hi < profile.delay_axis.front() ||
      lo > profile.delay_axis.back()) {
    throw UsageError("time_gate: gate lies outside the delay axis");
  }
  DelayProfile out = profile;
  const double taper = options.taper * width;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const double d = out.delay_axis[i];
    if (d < lo || d > hi) {
      out.samples[i] = 0.0;
      continue;
    }
    if (options.shape == GateShape::kRaisedCosine && taper > 0.0) {
      const double edge = std::min(d - lo, hi - d);
      if (edge < taper) out.samples[i] *= 0.5 * (1.0 - std::cos(kPi * edge / taper));
    }
  }
  return out;
}

CleanResult subtract_dominant_paths(const SlowTimeCube& cube, std::size_t n_paths,
                                    const CleanOptions& options) {
  CleanResult result;
  result.residual = cube;
  if (n_paths == 0) return result;

  const auto n_sym = static_cast<std::size_t>(cube.data.rows());
  const auto n_sc = static_cast<std::size_t>(cube.data.cols());
  std::vector<Complex> average(n_sc);
  for (std::size_t k = 0; k < n_sc; ++k) {
    average[k] = cube.data.col(static_cast<Eigen::Index>(k)).mean();
  }
  const double spacing = cube.waveform.subcarrier_spacing();
  const double half = static_cast<double>(n_sc / 2);
  StaticPathFitter fitter(average, spacing);
  const double k_count = static_cast<double>(n_sc);
  const std::size_t pad = std::max<std::size_t>(1, options.oversample);
  const double fine_bin = 1.0 / (spacing * k_count * static_cast<double>(pad));

  std::vector<double> delays;
  std::vector<Complex> gains;

  const auto residual_of = [&](std::size_t skip) {
    std::vector<Complex> y = average;
    for (std::size_t i = 0; i < delays.size(); ++i) {
      if (i != skip) StaticPathFitter::add_ramp(y, -gains[i], delays[i], spacing, half);
    }
    return y;
  };

  for (std::size_t iter = 0; iter < n_paths; ++iter) {
    const auto y = residual_of(delays.size());
    // Coarse search on the zero-padded delay profile.
    ComplexVector padded(n_sc * pad);
    std::copy(y.begin(), y.end(), padded.begin());
    ComplexVector profile(padded.size());
    fft_inverse(padded, profile);
    std::vector<double> power(profile.size());
    for (std::size_t i = 0; i < profile.size(); ++i) power[i] = std::norm(profile[i]);
    const auto peak_it = std::max_element(power.begin(), power.end());
    const auto peak = static_cast<std::size_t>(peak_it - power.begin());

    std::vector<double> sorted = power;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                     sorted.end());
    const double median = sorted[sorted.size() / 2];
    // Largest of N exponential noise bins sits near median·ln N / ln 2.
    const double noise_max = median * std::log(static_cast<double>(sorted.size())) / std::numbers::ln2;
    const bool at_floor =
        *peak_it <= 0.0 || *peak_it < noise_max * std::pow(10.0, options.floor_margin_db / 10.0);

    const std::size_t n = power.size();
    const double offset =
        parabolic_offset(power[(peak + n - 1) % n], power[peak], power[(peak + 1) % n]);
    double tau = (static_cast<double>(peak) + offset) * fine_bin;
    tau = fitter.refine(y, tau, tau - fine_bin, tau + fine_bin);
    delays.push_back(tau);
    gains.push_back(StaticPathFitter::correlate(y, tau, spacing, half) / k_count);
    result.at_noise_floor.push_back(at_floor);

    // Joint re-refinement of every path against the others.
    for (std::size_t cycle = 0; cycle < options.max_cycles && delays.size() > 1; ++cycle) {
      double largest_move = 0.0;
      for (std::size_t j = 0; j < delays.size(); ++j) {
        const auto yj = residual_of(j);
        const double updated = fitter.refine(yj, delays[j], delays[j] - fine_bin, delays[j] + fine_bin);
        largest_move = std::max(largest_move, std::abs(updated - delays[j]));
        delays[j] = updated;
        gains[j] = StaticPathFitter::correlate(yj, updated, spacing, half) / k_count;
      }
      if (largest_move * cube.waveform.bandwidth_hz < 1e-12) break;
    }
  }

  std::vector<Complex> model(n_sc, Complex{});
  for (std::size_t i = 0; i < delays.size(); ++i) {
    StaticPathFitter::add_ramp(model, gains[i], delays[i], spacing, half);
    PathParameterSet p;
    p.delay = delays[i];
    p.doppler = 0.0;
    p.gain = gains[i];
    result.removed.push_back(p);
  }
  const Eigen::Map<const Eigen::Matrix<Complex, 1, Eigen::Dynamic>> model_row(model.data(),
                                                                             static_cast<Eigen::Index>(n_sc));
  for (std::size_t m = 0; m < n_sym; ++m) result.residual.data.row(static_cast<Eigen::Index>(m)) -= model_row;
  return result;
}

Spectrogram stft_spectrogram(std::span<const Complex> series, double symbol_duration,
                             const StftOptions& options) {
  if (options.fft_size == 0 || options.hop == 0) {
    throw UsageError("stft_spectrogram: fft size and hop must be positive");
  }
  if (series.size() < options.fft_size) {
    throw UsageError("stft_spectrogram: series shorter than one FFT frame");
  }
  const std::size_t len = options.fft_size;
  const std::size_t frames = (series.size() - len) / options.hop + 1;
  const auto window = make_window(options.window, len);

  Spectrogram s;
  s.fft_size = len;
  s.hop = options.hop;
  s.window = options.window;
  s.gaussian_sigma = static_cast<double>(len) / 6.0;
  s.data.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(len));

  parallel_for(frames, [&](std::size_t f) {
    ComplexVector in(len);
    ComplexVector out(len);
    const std::size_t start = f * options.hop;
    for (std::size_t n = 0; n < len; ++n) in[n] = series[start + n] * window[n];
    fft_forward(in, out);
    fftshift(out);
    for (std::size_t j = 0; j < len; ++j) {
      s.data(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j)) = std::norm(out[j]);
    }
  });

  const double peak = s.data.maxCoeff();
  for (Eigen::Index i = 0; i < s.data.size(); ++i) {
    double& v = s.data.data()[i];
    v = peak > 0.0 ? to_db_power(v / peak) : -300.0;
  }

  s.time_axis.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    s.time_axis[f] = static_cast<double>(f * options.hop) * symbol_duration;
  }
  s.doppler_axis.resize(len);
  const double bin = 1.0 / (static_cast<double>(len) * symbol_duration);
  const auto zero = static_cast<double>(len / 2);
  for (std::size_t j = 0; j < len; ++j) s.doppler_axis[j] = (static_cast<double>(j) - zero) * bin;
  return s;
}

SpectralSupport spectral_support(const Spectrogram& s, double level_db) {
  const auto frames = s.data.rows();
  const auto bins = s.data.cols();
  if (frames == 0 || bins == 0) throw UsageError("spectral_support: empty spectrogram");
  if (!(level_db <= 0.0)) throw UsageError("spectral_support: level must be at or below 0 dB");
  SpectralSupport out;
  out.mean_db.assign(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> mean(static_cast<std::size_t>(bins), 0.0);
  for (Eigen::Index j = 0; j < bins; ++j) {
    double acc = 0.0;
    for (Eigen::Index f = 0; f < frames; ++f) acc += std::pow(10.0, s.data(f, j) / 10.0);
    mean[static_cast<std::size_t>(j)] = acc / static_cast<double>(frames);
  }
  const double peak = *std::max_element(mean.begin(), mean.end());
  for (std::size_t j = 0; j < mean.size(); ++j) out.mean_db[j] = to_db_power(mean[j] / peak);

  const auto& db = out.mean_db;
  const auto& axis = s.doppler_axis;
  const auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double t = (db[inside] - level_db) / (db[inside] - db[outside]);
    return axis[inside] + t * (axis[outside] - axis[inside]);
  };
  std::size_t hi = db.size() - 1;
  while (db[hi] < level_db) --hi;  // the peak bin is ≥ level_db, so this stops
  std::size_t lo = 0;
  while (db[lo] < level_db) ++lo;
  out.upper = hi + 1 < db.size() ? crossing(hi, hi + 1) : axis[hi];
  out.lower = lo > 0 ? crossing(lo, lo - 1) : axis[lo];
  return out;
}

ComplexVector slow_time_series(const SlowTimeCube& cube, std::size_t delay_bin) {
  const auto n_sym = static_cast<std::size_t>(cube.data.rows());
  const auto n_sc = static_cast<std::size_t>(cube.data.cols());
  if (delay_bin >= n_sc) throw UsageError("slow_time_series: delay bin out of range");
  ComplexVector series(n_sym);
  parallel_for(n_sym, [&](std::size_t m) {
    // Single-bin inverse DFT: Σ_k H[k]·e^{+j2πkn/K}/√K.
    Complex acc;
    for (std::size_t k = 0; k < n_sc; ++k) {
      const double phase = kTwoPi * static_cast<double>((k * delay_bin) % n_sc) / static_cast<double>(n_sc);
      acc += cube.data(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) * std::polar(1.0, phase);
    }
    series[m] = acc / std::sqrt(static_cast<double>(n_sc));
  });
  return series;
}

std::vector<Detection> detect_peaks(const DelayDopplerMap& map, double threshold_db,
                                    bool exclude_zero_doppler) {
  if (!std::isfinite(threshold_db)) throw UsageError("detect_peaks: threshold must be finite");
  const Eigen::Index rows = map.data.rows();
  const Eigen::Index cols = map.data.cols();
  std::vector<Detection> detections;
  if (rows == 0 || cols == 0) return detections;

  RealMatrix magnitude = map.data.cwiseAbs();
  std::vector<double> sorted(magnitude.data(), magnitude.data() + magnitude.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                   sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double level = median * std::pow(10.0, threshold_db / 20.0);
  const auto zero_col = static_cast<Eigen::Index>(map.zero_doppler_column());

  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (exclude_zero_doppler && c == zero_col) continue;
      const double v = magnitude(r, c);
      if (!(v > level)) continue;
      // Both axes are periodic, so the neighbourhood wraps around the edges.
      const auto at = [&](Eigen::Index rr, Eigen::Index cc) {
        return magnitude((rr + rows) % rows, (cc + cols) % cols);
      };
      bool is_max = true;
      for (Eigen::Index dr = -1; dr <= 1 && is_max; ++dr) {
        for (Eigen::Index dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if ((rows < 3 && dr != 0) || (cols < 3 && dc != 0)) continue;
          const double w = at(r + dr, c + dc);
          // Plateaus resolve to the first cell in raster order.
          const bool before = dr < 0 || (dr == 0 && dc < 0);
          if (before ? w >= v : w > v) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      Detection d;
      d.delay_bin = static_cast<std::size_t>(r);
      d.doppler_bin = static_cast<std::size_t>(c);
      const double delay_step = map.delay_axis.size() > 1 ? map.delay_axis[1] - map.delay_axis[0] : 0.0;
      const double doppler_step =
          map.doppler_axis.size() > 1 ? map.doppler_axis[1] - map.doppler_axis[0] : 0.0;
      d.delay = map.delay_axis[d.delay_bin] +
                (rows >= 3 ? parabolic_offset(at(r - 1, c), v, at(r + 1, c)) : 0.0) * delay_step;
      d.doppler = map.doppler_axis[d.doppler_bin] +
                  (cols >= 3 ? parabolic_offset(at(r, c - 1), v, at(r, c + 1)) : 0.0) * doppler_step;
      d.power_db = to_db_magnitude(map.data(r, c));
      d.excess_delay = d.delay - map.los_delay;
      detections.push_back(d);
    }
  }
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.power_db > b.power_db; });
  return detections;
}

}  // namespace bisim
