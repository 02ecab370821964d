#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <bisim/channel.hpp>
#include <bisim/errors.hpp>
#include <bisim/scattering.hpp>

#include "oracles.hpp"

using namespace bisim;

namespace {

constexpr double kLambda = kSpeedOfLight / 3.7e9;

RigidTarget two_points(const Vec3& half_offset, Complex s = {0.05, 0.0}) {
  RigidTarget t;
  t.scatterers = {{half_offset, s, JonesMatrix::Identity()}, {-half_offset, s, JonesMatrix::Identity()}};
  return t;
}

JonesMatrix random_symmetric_jones(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  JonesMatrix j;
  j(0, 0) = {g(rng), g(rng)};
  j(1, 1) = {g(rng), g(rng)};
  j(0, 1) = j(1, 0) = Complex{g(rng), g(rng)};
  return j;
}

}  // namespace

TEST(ScattererStates, RotorIsPeriodic) {
  Rotor r;
  r.initial_angle = 0.3;
  const double period = kTwoPi / r.rate;
  const auto a = scatterer_states(r, 0.0123);
  const auto b = scatterer_states(r, 0.0123 + period);
  ASSERT_EQ(a.size(), r.n_blades * r.samples_per_blade);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LT((a[i].position - b[i].position).norm(), 1e-12);
    EXPECT_LT((a[i].velocity - b[i].velocity).norm(), 1e-9);
  }
}

TEST(ScattererStates, RotorSpeedIsOmegaR) {
  Rotor r;
  r.axis = Vec3(1, 2, 2).normalized();
  const auto states = scatterer_states(r, 0.004);
  for (const auto& s : states) {
    const Vec3 arm = s.position - r.hub_offset;
    EXPECT_NEAR(s.velocity.norm(), r.rate * arm.norm(), 1e-9);
    EXPECT_NEAR(s.velocity.dot(r.axis), 0.0, 1e-9);
    EXPECT_NEAR(s.velocity.dot(arm), 0.0, 1e-9);
  }
  const auto& tip = states[r.samples_per_blade - 1];
  EXPECT_NEAR(tip.velocity.norm(), r.rate * r.blade_radius, 1e-12 * r.rate * r.blade_radius);
}

TEST(ScattererStates, RigidTargetSharesTrackVelocity) {
  auto t = two_points({0.1, 0.2, 0.0});
  t.trajectory = Trajectory({{0.0, {0, 0, 0}}, {10.0, {30, -40, 5}}});
  for (const auto& s : scatterer_states(t, 2.5)) EXPECT_TRUE(s.velocity.isApprox(Vec3(3, -4, 0.5)));
}

TEST(RotorValidation, Errors) {
  Rotor r;
  r.samples_per_blade = 1;
  EXPECT_THROW(r.validate(), ConfigError);
  r = {};
  r.axis = {0, 0, 2};
  EXPECT_THROW(r.validate(), ConfigError);
  r = {};
  r.blade_radius = 0.0;
  EXPECT_THROW(r.validate(), ConfigError);
}

TEST(TargetPaths, SingleScattererGainMatchesRadarEquation) {
  RigidTarget t;
  const Complex s{0.4, 0.3};
  t.scatterers = {{Vec3::Zero(), s, JonesMatrix::Identity()}};
  const double d = 50.0;
  const NodePose tx{{-d, 0, 0}, Vec3::Zero(), ""}, rx{{0, d, 0}, Vec3::Zero(), ""};
  const auto paths = target_paths(t, tx, rx, 0.0, kLambda);
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_NEAR(std::abs(paths[0].gain), std::abs(s) * kLambda / (4 * kPi * d * d), 1e-18);
  EXPECT_NEAR(paths[0].delay, 2 * d / kSpeedOfLight, 1e-18);
  const double rcs = equivalent_rcs(s);
  EXPECT_NEAR(20 * std::log10(std::abs(paths[0].gain)), oracle::radar_equation_dbm(0.0, kLambda, rcs, d, d), 1e-9);
  EXPECT_TRUE(paths[0].departure.isApprox(Vec3::UnitX()));
}

TEST(TargetPaths, DoublingDistancesCostsTwelveDb) {
  RigidTarget t;
  t.scatterers = {{Vec3::Zero(), {1, 0}, JonesMatrix::Identity()}};
  const auto gain = [&](double k) {
    return std::abs(target_paths(t, {{-30 * k, 0, 0}, Vec3::Zero(), ""}, {{0, 45 * k, 0}, Vec3::Zero(), ""}, 0, kLambda)[0].gain);
  };
  EXPECT_NEAR(gain(1) / gain(2), 4.0, 1e-12);
  EXPECT_NEAR(20 * std::log10(gain(1) / gain(2)), 12.0412, 1e-4);
}

TEST(TargetPaths, ThirtyCentimetreTargetFitsTwoNanoseconds) {
  // Worst case: scatterers along the bisector of a monostatic pair.
  for (const double beta : {0.0, 30.0, 90.0, 150.0}) {
    const Vec3 tx = 5 * direction_from_angles(0, 0);
    const Vec3 rx = 5 * direction_from_angles(beta, 0);
    const Vec3 bisector = (tx.normalized() + rx.normalized()).normalized();
    const auto paths = target_paths(two_points(0.15 * bisector), {tx, Vec3::Zero(), ""}, {rx, Vec3::Zero(), ""}, 0, kLambda);
    const double spread = std::abs(paths[0].delay - paths[1].delay);
    // About 2L·cos(β/2)/c: 2.001 ns monostatic, under 2 ns once the pair opens up.
    const Vec3 half = 0.15 * bisector;
    EXPECT_NEAR(spread, std::abs(oracle::bistatic_range(tx, rx, -half) - oracle::bistatic_range(tx, rx, half)) / kSpeedOfLight,
                1e-17);
    if (beta > 0) EXPECT_LE(spread, 2e-9);
  }
}

TEST(TargetPaths, DopplerFromScattererVelocity) {
  auto t = two_points({0.1, 0, 0});
  t.trajectory = Trajectory({{-1.0, {20, 10, 0}}, {1.0, {20, 30, 0}}});
  const NodePose tx{{0, 0, 0}, Vec3::Zero(), ""}, rx{{50, 0, 0}, Vec3::Zero(), ""};
  const auto paths = target_paths(t, tx, rx, 0.0, kLambda);
  const Vec3 p0 = Vec3(20, 20, 0) + Vec3(0.1, 0, 0);
  EXPECT_NEAR(paths[0].doppler, oracle::doppler_static_nodes(tx.position, rx.position, p0, {0, 10, 0}, kLambda), 1e-9);
}

TEST(Polarization, SelectsJonesEntry) {
  PathParameterSet p;
  p.gain = {2, 0};
  JonesMatrix j;
  j << Complex(1, 0), Complex(0, 1), Complex(3, 0), Complex(4, 0);
  p.jones = j;
  const auto out = select_polarization({p}, Polarization::kH, Polarization::kV);
  EXPECT_EQ(out[0].gain, Complex(6, 0));  // entry (rx = V, tx = H)
}

TEST(ReflectivityScan, CentredIsotropicScattererIsFlat) {
  RigidTarget t;
  t.scatterers = {{Vec3::Zero(), {0.2, 0.1}, JonesMatrix::Identity()}};
  const AngleGrid grid{{0, 45, 90}, {-20, 0, 30}, {10, 100, 200}, {0, 40}};
  const FrequencyBand band{2e9, 18e9, 101};
  const auto tensor = reflectivity_scan(t, grid, 3.0, 4.0, band);
  const auto ref = tensor.profile(0, Polarization::kH, Polarization::kH);
  for (std::size_t p = 1; p < grid.size(); ++p) {
    const auto prof = tensor.profile(p, Polarization::kH, Polarization::kH);
    for (std::size_t n = 0; n < prof.size(); ++n) EXPECT_LT(std::abs(prof[n] - ref[n]), 1e-12);
  }
}

TEST(ReflectivityScan, ReciprocityUnderSwap) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  RigidTarget t;
  for (int i = 0; i < 6; ++i) t.scatterers.push_back({{u(rng), u(rng), u(rng)}, {0.05, 0.01}, random_symmetric_jones(rng)});
  const AngleGrid grid{{0, 60}, {0, 20}, {0, 60}, {0, 20}};
  const auto tensor = reflectivity_scan(t, grid, 3.0, 3.0, {2e9, 18e9, 81});
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t e = 0; e < 2; ++e) {
      for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t f = 0; f < 2; ++f) {
          for (std::size_t d = 0; d < tensor.delay_axis().size(); d += 9) {
            EXPECT_LT((tensor.at(a, e, b, f, d) - tensor.at(b, f, a, e, d).transpose()).norm(), 1e-12);
          }
        }
      }
    }
  }
}

TEST(ReflectivityScan, TwoPointFringeMatchesInterferometer) {
  // Far field: |R(f)| = 2|s|·|cos(π f (e_tx + e_rx)·D / c)| for scatterers at ±D/2.
  const Vec3 half(0, 0.15, 0);
  const auto t = two_points(half, {1, 0});
  const double f0 = 10e9, d = 1e5;
  const std::vector<double> f{f0};
  for (double az = 0; az < 180; az += 3.7) {
    const Vec3 etx = direction_from_angles(0, 0), erx = direction_from_angles(az, 0);
    const auto r = bistatic_response(scatterer_states(t, 0), Vec3::Zero(), d * etx, d * erx, f);
    const double expected = 2.0 * std::abs(std::cos(kPi * f0 * (etx + erx).dot(2 * half) / kSpeedOfLight));
    EXPECT_NEAR(std::abs(r[0](0, 0)), expected, 2e-3);
  }
}

TEST(ReflectivityScan, InvariantUnderJointRotation) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  std::vector<ScattererState> states;
  for (int i = 0; i < 5; ++i) states.push_back({{u(rng), u(rng), u(rng)}, Vec3::Zero(), {0.1, 0.02 * i}, JonesMatrix::Identity()});
  const Vec3 tx(3, 0.5, 1), rx(-1, 2.5, -0.5);
  const auto freqs = FrequencyBand{2e9, 18e9, 33}.frequencies();
  const auto ref = bistatic_response(states, Vec3::Zero(), tx, rx, freqs);
  const Eigen::Matrix3d rot = Eigen::Quaterniond::UnitRandom().toRotationMatrix();
  auto moved = states;
  for (auto& s : moved) s.position = rot * s.position;
  const auto got = bistatic_response(moved, Vec3::Zero(), rot * tx, rot * rx, freqs);
  for (std::size_t n = 0; n < freqs.size(); ++n) EXPECT_LT((got[n] - ref[n]).norm(), 1e-10);
}

TEST(ReflectivityScan, MonostaticDiagonalIsBackscatterPattern) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  RigidTarget t;
  for (int i = 0; i < 4; ++i) t.scatterers.push_back({{u(rng), u(rng), u(rng)}, {0.05, 0.0}, JonesMatrix::Identity()});
  const double d = 3.0;
  const std::vector<double> f{9e9};
  for (const double az : {0.0, 40.0, 130.0}) {
    const Vec3 pos = d * direction_from_angles(az, 10.0);
    const auto r = bistatic_response(scatterer_states(t, 0), Vec3::Zero(), pos, pos, f);
    Complex expected{0, 0};
    for (const auto& s : t.scatterers) {
      const double di = (s.offset - pos).norm();
      expected += s.amplitude * (d * d) / (di * di) * std::polar(1.0, -kTwoPi * f[0] * 2.0 * (di - d) / kSpeedOfLight);
    }
    EXPECT_LT(std::abs(r[0](0, 0) - expected), 1e-12);
  }
}

TEST(ReflectivityScan, Errors) {
  const auto t = two_points({0.1, 0, 0});
  EXPECT_THROW(reflectivity_scan(t, AngleGrid{{}, {0}, {0}, {0}}, 3, 3, {}), ConfigError);
  EXPECT_THROW(reflectivity_scan(t, AngleGrid{{0}, {0}, {90}, {0}}, 0.05, 3, {}), ConfigError);
  EXPECT_THROW(reflectivity_scan(t, AngleGrid{{0, 0}, {0}, {90}, {0}}, 3, 3, {}), ConfigError);
}

TEST(Flyover, CentredPointGivesFlatTrace) {
  RigidTarget t;
  t.scatterers = {{Vec3::Zero(), {0.05, 0}, JonesMatrix::Identity()}};
  const auto map = flyover_scan(t, 0.0, {10, 180, 10}, 3, 3, {2e9, 18e9, 201});
  ASSERT_EQ(map.angles.size(), 18u);
  EXPECT_DOUBLE_EQ(map.angles.back(), 180.0);
  for (Eigen::Index i = 0; i < map.data.rows(); ++i) {
    Eigen::Index best = 0;
    map.data.row(i).cwiseAbs().maxCoeff(&best);
    EXPECT_NEAR(map.delay_axis[static_cast<std::size_t>(best)], 0.0, 1e-15);
    EXPECT_LT((map.data.row(i) - map.data.row(0)).norm(), 1e-12);
  }
}

TEST(Flyover, BaselineTargetSpreadShrinksTowardForwardScatter) {
  // Target along the fixed gantry's axis: (1 + cos β)·0.3 m of projected length.
  const auto t = two_points({0.15, 0, 0});
  const FrequencyBand band{2e9, 18e9, 801};
  const ScanOptions opt{Window::kHann, 0.0, 8};
  const auto map = flyover_scan(t, 0.0, {10, 170, 160}, 3, 3, band, opt);
  const double system = point_response_extent(band, opt);
  std::vector<double> spread;
  for (Eigen::Index i = 0; i < 2; ++i) {
    ComplexVector row(map.data.row(i).begin(), map.data.row(i).end());
    spread.push_back(std::max(0.0, delay_extent(row, map.delay_axis, 0.0, 2.2e-9) - system));
  }
  EXPECT_LT(spread[1], spread[0]);
  EXPECT_LE(spread[0], 2e-9);
  const double geometric = (1 + std::cos(10 * kPi / 180)) * 0.3 / kSpeedOfLight;
  EXPECT_NEAR(spread[0], geometric, 1.0 / (band.f_hi - band.f_lo));
}

TEST(DelayExtent, PointResponseAndThreshold) {
  std::vector<double> axis{-2, -1, 0, 1, 2};
  ComplexVector prof{0.0, 0.1, 1.0, 0.1, 0.0};
  // −10 dB of the peak lies between bins where power falls from 0 dB to −20 dB.
  EXPECT_NEAR(delay_extent(prof, axis, 0.0, 10.0, -10.0), 1.0, 1e-12);
  EXPECT_EQ(delay_extent(ComplexVector(5, 0.0), axis, 0.0, 10.0), 0.0);
  EXPECT_THROW(delay_extent(prof, axis, 0.0, 10.0, 0.0), UsageError);
}

TEST(LinkBudget, RcsAndProcessingGain) {
  EXPECT_NEAR(equivalent_rcs({1.0 / (2.0 * std::sqrt(kPi)), 0.0}), 1.0, 1e-15);
  EXPECT_NEAR(scattering_length_for_rcs(1.0), 1.0 / (2.0 * std::sqrt(kPi)), 1e-15);
  LinkBudget b;
  const auto r = link_budget(b);
  EXPECT_NEAR(r.processing_gain_db, 10 * std::log10(1280.0 * 2048.0), 1e-12);
  EXPECT_NEAR(r.processing_gain_db, 64.2, 0.05);
  EXPECT_NEAR(r.received_power_dbm, oracle::radar_equation_dbm(30, b.wavelength, 1.0, 100, 100), 1e-9);
  b.d_tx = 0;
  EXPECT_THROW(link_budget(b), UsageError);
}

TEST(RotorDoppler, SamplesBoundedByTipAndFillDensely) {
  Rotor r;
  r.samples_per_blade = 256;
  const Vec3 tx(20, 0, 0), rx(0, 17.32, 10);
  const double bound = oracle::rotor_tip_bound(Vec3::Zero(), r.axis, r.blade_radius, r.rate, tx, rx, kLambda);
  std::vector<double> all;
  for (int i = 0; i < 64; ++i) {
    const double t = i * (kTwoPi / r.rate) / 64.0;
    for (const auto& s : scatterer_states(r, t)) {
      const double f = oracle::doppler_static_nodes(tx, rx, s.position, s.velocity, kLambda);
      EXPECT_LE(std::abs(f), bound * (1 + 1e-9));
      all.push_back(f);
    }
  }
  std::sort(all.begin(), all.end());
  double gap = 0;
  for (std::size_t i = 1; i < all.size(); ++i) gap = std::max(gap, all[i] - all[i - 1]);
  EXPECT_LT(gap, bound / 50.0);
  EXPECT_GT(all.back(), 0.99 * bound);
  EXPECT_LT(all.front(), -0.99 * bound);
}
