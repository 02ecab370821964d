#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <bisim/channel.hpp>
#include <bisim/echo.hpp>
#include <bisim/errors.hpp>
#include <bisim/illumination.hpp>

#include "oracles.hpp"

using namespace bisim;

namespace {

ComplexVector on_grid_channel(std::mt19937_64& rng, std::size_t k, std::size_t n_paths, bool equal_power) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::size_t> bins(k);
  for (std::size_t i = 0; i < k; ++i) bins[i] = i;
  std::shuffle(bins.begin(), bins.end(), rng);
  ComplexVector h(k, {0, 0});
  for (std::size_t i = 0; i < n_paths; ++i) {
    const Complex a = std::polar(equal_power ? 1.0 : 0.1 + u(rng), kTwoPi * u(rng));
    for (std::size_t n = 0; n < k; ++n) {
      h[n] += a * std::polar(1.0, -kTwoPi * static_cast<double>((n * bins[i]) % k) / static_cast<double>(k));
    }
  }
  return h;
}

PathParameterSet path(double doppler, Complex gain, double delay = 0.0) {
  PathParameterSet p;
  p.doppler = doppler;
  p.gain = gain;
  p.delay = delay;
  return p;
}

}  // namespace

TEST(Prefilter, UnitEnergyConjugate) {
  std::mt19937_64 rng(18);
  const auto h = on_grid_channel(rng, 256, 5, false);
  const auto p = time_reversal_prefilter(h);
  double e = 0;
  for (const auto& x : p) e += std::norm(x);
  EXPECT_NEAR(e, 1.0, 1e-12);
  // The cascade H·P is real and non-negative; so is the prefilter of that cascade.
  ComplexVector cascade(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    cascade[k] = h[k] * p[k];
    EXPECT_NEAR(cascade[k].imag(), 0.0, 1e-12);
    EXPECT_GE(cascade[k].real(), -1e-15);
  }
  for (const auto& x : time_reversal_prefilter(cascade)) {
    EXPECT_NEAR(x.imag(), 0.0, 1e-12);
    EXPECT_GE(x.real(), -1e-15);
  }
  // Applied twice the prefilter gives back the normalized channel, not an identity response.
  const auto twice = time_reversal_prefilter(p);
  double diff = 0;
  for (std::size_t k = 0; k < h.size(); ++k) diff += std::norm(twice[k] - Complex(1, 0) / std::sqrt(256.0));
  EXPECT_GT(diff, 1e-3);
  EXPECT_THROW(time_reversal_prefilter(ComplexVector(8, 0.0)), UsageError);
}

TEST(Focusing, SinglePathGivesOneFocusedPeak) {
  std::mt19937_64 rng(19);
  const auto h = on_grid_channel(rng, 128, 1, true);
  const auto r = focusing_gain(h);
  EXPECT_NEAR(r.gain, 1.0, 1e-12);
  double others = 0;
  for (std::size_t n = 1; n < r.focused_profile.size(); ++n) others += std::norm(r.focused_profile[n]);
  EXPECT_LT(others, 1e-24);
}

TEST(Focusing, GainEqualsPathCount) {
  std::mt19937_64 rng(20);
  for (const std::size_t n : {2u, 3u, 8u, 17u}) {
    const auto r = focusing_gain(on_grid_channel(rng, 512, n, true));
    EXPECT_NEAR(r.gain, static_cast<double>(n), 1e-9 * static_cast<double>(n));
  }
}

TEST(Focusing, GainAtLeastOneForAnyChannel) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    ComplexVector h(97);
    for (auto& x : h) x = {g(rng), g(rng)};
    EXPECT_GE(focusing_gain(h).gain, 1.0 - 1e-12);
  }
}

TEST(DopplerCompensation, SinglePath) {
  const auto c = doppler_precompensate({path(321.0, {0.5, 0.5})});
  EXPECT_EQ(c.spread_before, 0.0);
  EXPECT_EQ(c.spread_after, 0.0);
  EXPECT_EQ(c.offsets[0], 0.0);
  EXPECT_THROW(doppler_precompensate({}), UsageError);
}

TEST(DopplerCompensation, TwoPathsSpreadFormula) {
  const double f1 = 100, f2 = -250, p1 = 4, p2 = 1;
  const auto c = doppler_precompensate({path(f1, {2, 0}), path(f2, {0, 1})});
  EXPECT_NEAR(c.spread_before, std::abs(f1 - f2) * std::sqrt(p1 * p2) / (p1 + p2), 1e-12);
  EXPECT_NEAR(c.spread_after, 0.0, 1e-12);
  EXPECT_NEAR(c.reference, (p1 * f1 + p2 * f2) / (p1 + p2), 1e-12);
}

TEST(DopplerCompensation, PreservesPowerAndNeverWidens) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1000, 1000), a(0.01, 3);
  for (int i = 0; i < 100; ++i) {
    std::vector<PathParameterSet> paths;
    std::vector<double> power, freq;
    for (int k = 0; k < 1 + i % 9; ++k) {
      paths.push_back(path(u(rng), std::polar(a(rng), u(rng))));
      power.push_back(std::norm(paths.back().gain));
      freq.push_back(paths.back().doppler);
    }
    const auto c = doppler_precompensate(paths);
    double before = 0, after = 0;
    for (std::size_t k = 0; k < paths.size(); ++k) {
      before += std::norm(paths[k].gain);
      after += std::norm(c.paths[k].gain);
      EXPECT_NEAR(c.paths[k].doppler, c.reference, 1e-9);
    }
    EXPECT_EQ(before, after);
    EXPECT_NEAR(c.spread_before, oracle::weighted_spread(power, freq), 1e-9);
    EXPECT_LE(c.spread_after, c.spread_before + 1e-12);
    EXPECT_NEAR(doppler_spread(c.paths), 0.0, 1e-9);
  }
}

TEST(DopplerCompensation, MapShowsOneRidge) {
  const auto w = WaveformConfig::from_numerology(3.7e9, 160e6, 64, 64);
  const double bin = 1.0 / (64 * w.symbol_duration);
  const std::vector<PathParameterSet> paths{path(3 * bin, {1, 0}, 5 / 160e6), path(-9 * bin, {1, 0}, 20 / 160e6),
                                            path(12 * bin, {1, 0}, 41 / 160e6)};
  const auto occupied = [&](const std::vector<PathParameterSet>& ps) {
    const auto map = delay_doppler_map(synth_cfr(ps, w, SynthMode::kFixed));
    const double total = map.data.squaredNorm();
    int cols = 0;
    for (Eigen::Index c = 0; c < map.data.cols(); ++c) cols += map.data.col(c).squaredNorm() > 1e-6 * total;
    return cols;
  };
  // Equal powers: the reference is the mean, 2 bins, which stays on the grid.
  EXPECT_EQ(occupied(paths), 3);
  EXPECT_EQ(occupied(doppler_precompensate(paths).paths), 1);
}

TEST(IlluminationPaths, DirectAndClutterLegs) {
  const double lambda = kSpeedOfLight / 3.7e9;
  const NodePose tx{{0, 0, 10}, Vec3::Zero(), "tx"};
  const Vec3 p(40, 30, 10), v(-8, 0, 0);
  const auto paths = illumination_paths(tx, p, v, {{{20, -10, 0}, {2, 0}}}, lambda);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_NEAR(paths[0].delay, 50.0 / kSpeedOfLight, 1e-18);
  EXPECT_NEAR(std::abs(paths[0].gain), lambda / (4 * kPi * 50.0), 1e-15);
  EXPECT_NEAR(paths[0].doppler, 8 * 0.8 / lambda, 1e-9);  // closing at 6.4 m/s
  const Vec3 c(20, -10, 0);
  const double d1 = (c - tx.position).norm(), d2 = (p - c).norm();
  EXPECT_NEAR(paths[1].delay, (d1 + d2) / kSpeedOfLight, 1e-18);
  EXPECT_NEAR(paths[1].doppler, -(p - c).normalized().dot(v) / lambda, 1e-9);
}
