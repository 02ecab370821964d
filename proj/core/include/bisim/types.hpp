#pragma once

#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Core>

namespace bisim {

using Complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using JonesMatrix = Eigen::Matrix2cd;

/// Row-major complex matrix; rows are the outer (slow) index.
using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ComplexVector = std::vector<Complex>;

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline double wavelength_of(double frequency_hz) { return kSpeedOfLight / frequency_hz; }

/// 20·log10|x| with a −300 dB floor for exact zeros.
double to_db_magnitude(Complex x);
/// 10·log10(p) with a −300 dB floor for p ≤ 0.
double to_db_power(double p);

}  // namespace bisim
