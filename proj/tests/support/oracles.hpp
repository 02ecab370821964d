#pragma once

// Reference computations written directly from the physics, sharing no code
// with the library. Tests compare library output against these.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace oracle {

using Vec3 = Eigen::Vector3d;
using cd = std::complex<double>;

inline constexpr double c0 = 299'792'458.0;
inline constexpr double pi = std::numbers::pi;

struct Mover {
  Vec3 p0 = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 at(double t) const { return p0 + v * t; }
};

inline double bistatic_range(const Vec3& tx, const Vec3& rx, const Vec3& p) {
  return (p - tx).norm() + (p - rx).norm();
}

inline double excess_range(const Vec3& tx, const Vec3& rx, const Vec3& p) {
  return bistatic_range(tx, rx, p) - (tx - rx).norm();
}

/// −(1/λ)·dR_b/dt by central difference with step dt around t. Evaluated in
/// long double: in double the rounding of |p| (≈1e−13 m at 400 m) over a 2 µs
/// step alone reaches 1e−6 of a 1 Hz Doppler at centimetre wavelengths.
inline double fd_doppler(const Mover& tx, const Mover& rx, const Mover& tgt, double lambda, double t = 0.0,
                         double dt = 1e-6) {
  using ld = long double;
  const auto range = [&](ld s) {
    ld total = 0.0L;
    for (const Mover* node : {&tx, &rx}) {
      ld sq = 0.0L;
      for (int i = 0; i < 3; ++i) {
        const ld d = (static_cast<ld>(tgt.p0[i]) + static_cast<ld>(tgt.v[i]) * s) -
                     (static_cast<ld>(node->p0[i]) + static_cast<ld>(node->v[i]) * s);
        sq += d * d;
      }
      total += std::sqrt(sq);
    }
    return total;
  };
  const ld t0 = t;
  const ld h = dt;
  return static_cast<double>(-(range(t0 + h) - range(t0 - h)) / (2.0L * h) / static_cast<ld>(lambda));
}

/// Analytic bistatic Doppler of a point with velocity v, static nodes.
inline double doppler_static_nodes(const Vec3& tx, const Vec3& rx, const Vec3& p, const Vec3& v, double lambda) {
  const Vec3 g = (p - tx).normalized() + (p - rx).normalized();
  return -g.dot(v) / lambda;
}

/// Largest |Doppler| of a rotor tip over one revolution (static nodes).
inline double rotor_tip_bound(const Vec3& hub, const Vec3& axis, double radius, double rate, const Vec3& tx,
                              const Vec3& rx, double lambda, std::size_t steps = 200'000) {
  const Vec3 n = axis.normalized();
  Vec3 e1 = n.unitOrthogonal();
  Vec3 e2 = n.cross(e1);
  double best = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double phi = 2.0 * pi * static_cast<double>(i) / static_cast<double>(steps);
    const Vec3 arm = radius * (std::cos(phi) * e1 + std::sin(phi) * e2);
    const Vec3 v = rate * n.cross(arm);
    best = std::max(best, std::abs(doppler_static_nodes(tx, rx, hub + arm, v, lambda)));
  }
  return best;
}

/// Bistatic radar equation, dBm, unity antenna gains.
inline double radar_equation_dbm(double pt_dbm, double lambda, double rcs, double d_tx, double d_rx) {
  const double fourpi3 = std::pow(4.0 * pi, 3);
  return pt_dbm + 10.0 * std::log10(lambda * lambda * rcs / (fourpi3 * d_tx * d_tx * d_rx * d_rx));
}

/// Naive DFT, sign −1 forward, no scaling.
inline std::vector<cd> dft(const std::vector<cd>& x, int sign = -1) {
  const std::size_t n = x.size();
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc{0.0, 0.0};
    for (std::size_t m = 0; m < n; ++m) {
      const double arg = sign * 2.0 * pi * static_cast<double>((k * m) % n) / static_cast<double>(n);
      acc += x[m] * cd(std::cos(arg), std::sin(arg));
    }
    out[k] = acc;
  }
  return out;
}

/// |Dirichlet kernel| (1/K)|Σ_k e^{j2πkx/K}| at fractional bin offset x.
inline double dirichlet(double x, std::size_t k) {
  if (std::abs(x) < 1e-15) return 1.0;
  const double kk = static_cast<double>(k);
  return std::abs(std::sin(pi * x) / (kk * std::sin(pi * x / kk)));
}

/// Nearest map bins of a path: delay bin in [0, K), Doppler column with 0 Hz at M/2.
struct BinPair {
  long delay = 0;
  long doppler = 0;
};
inline BinPair predicted_bins(double delay, double doppler, double bandwidth, std::size_t k, std::size_t m,
                              double t_sym) {
  const long kk = static_cast<long>(k);
  long d = std::lround(delay * bandwidth) % kk;
  if (d < 0) d += kk;
  const long f = static_cast<long>(m / 2) + std::lround(doppler * static_cast<double>(m) * t_sym);
  return {d, f};
}

/// sqrt(tr((JᵀJ)⁻¹)) of the 2-D bistatic-range Jacobian; ∞ when singular.
inline double position_gdop_2d(const std::vector<std::pair<Vec3, Vec3>>& links, const Vec3& p) {
  Eigen::MatrixXd j(static_cast<Eigen::Index>(links.size()), 2);
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Vec3 g = (p - links[i].first).normalized() + (p - links[i].second).normalized();
    j(static_cast<Eigen::Index>(i), 0) = g.x();
    j(static_cast<Eigen::Index>(i), 1) = g.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const auto s = svd.singularValues();
  if (s.size() < 2 || s(1) < 1e-12 * std::max(1.0, s(0))) return std::numeric_limits<double>::infinity();
  return std::sqrt(1.0 / (s(0) * s(0)) + 1.0 / (s(1) * s(1)));
}

/// Power-weighted RMS spread of (power, frequency) pairs.
inline double weighted_spread(const std::vector<double>& power, const std::vector<double>& freq) {
  double w = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < power.size(); ++i) {
    w += power[i];
    mean += power[i] * freq[i];
  }
  mean /= w;
  double var = 0.0;
  for (std::size_t i = 0; i < power.size(); ++i) var += power[i] * (freq[i] - mean) * (freq[i] - mean);
  return std::sqrt(var / w);
}

/// Outermost level crossings of a dB spectrum relative to its peak, linear-in-dB interpolation.
struct Support {
  double lower = 0.0;
  double upper = 0.0;
};
inline Support level_support(const std::vector<double>& freq, const std::vector<double>& db, double level) {
  const double peak = *std::max_element(db.begin(), db.end());
  std::vector<double> rel(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) rel[i] = db[i] - peak;
  std::size_t lo = 0;
  while (rel[lo] < level) ++lo;
  std::size_t hi = rel.size() - 1;
  while (rel[hi] < level) --hi;
  Support s{freq[lo], freq[hi]};
  if (lo > 0) {
    const double a = (level - rel[lo - 1]) / (rel[lo] - rel[lo - 1]);
    s.lower = freq[lo - 1] + a * (freq[lo] - freq[lo - 1]);
  }
  if (hi + 1 < rel.size()) {
    const double a = (level - rel[hi + 1]) / (rel[hi] - rel[hi + 1]);
    s.upper = freq[hi + 1] + a * (freq[hi] - freq[hi + 1]);
  }
  return s;
}

}  // namespace oracle
