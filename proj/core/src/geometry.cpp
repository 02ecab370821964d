#include "bisim/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "bisim/errors.hpp"

namespace bisim {
namespace {

// Closer than this to an antenna the spherical-wave model is singular.
constexpr double kCoincidenceTolerance = 1e-9;  // m

}  // namespace

double to_db_magnitude(Complex x) {
  const double mag = std::abs(x);
  return mag > 0.0 ? std::max(-300.0, 20.0 * std::log10(mag)) : -300.0;
}

double to_db_power(double p) { return p > 0.0 ? std::max(-300.0, 10.0 * std::log10(p)) : -300.0; }

Trajectory::Trajectory(std::vector<Waypoint> waypoints) : waypoints_(std::move(waypoints)) {
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    if (!(waypoints_[i].time > waypoints_[i - 1].time)) {
      throw ConfigError("trajectory waypoint times must be strictly increasing");
    }
  }
  for (const auto& w : waypoints_) {
    if (!w.position.allFinite() || !std::isfinite(w.time)) {
      throw ConfigError("trajectory waypoint is not finite");
    }
  }
}

Trajectory Trajectory::stationary(const Vec3& position) { return Trajectory({{0.0, position}}); }

NodePose pose_at(const Trajectory& trajectory, double t) {
  const auto& w = trajectory.waypoints();
  if (w.empty()) throw ConfigError("pose_at: empty trajectory");
  NodePose pose;
  if (w.size() == 1 || t < w.front().time) {
    pose.position = w.front().position;
    return pose;
  }
  if (t >= w.back().time) {
    pose.position = w.back().position;
    return pose;
  }
  // First waypoint strictly after t; the segment starting at or before t wins ties.
  auto next = std::upper_bound(w.begin(), w.end(), t,
                               [](double value, const Waypoint& wp) { return value < wp.time; });
  const auto& b = *next;
  const auto& a = *(next - 1);
  const double span = b.time - a.time;
  const double frac = (t - a.time) / span;
  pose.position = a.position + frac * (b.position - a.position);
  pose.velocity = (b.position - a.position) / span;
  return pose;
}

NodePose NodeMotion::state_at(double t) const {
  NodePose pose = std::visit(
      [t](const auto& m) -> NodePose {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NodePose>) {
          NodePose p = m;
          p.position = m.position + t * m.velocity;
          return p;
        } else {
          return pose_at(m, t);
        }
      },
      motion);
  pose.node_id = id;
  return pose;
}

Vec3 unit_vector(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  const double n = d.norm();
  if (n < kCoincidenceTolerance) throw GeometryError("point coincides with an antenna");
  return d / n;
}

Vec3 direction_from_angles(double azimuth_deg, double elevation_deg) {
  const double az = deg2rad(azimuth_deg);
  const double el = deg2rad(elevation_deg);
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

BistaticRange bistatic_range(const Vec3& tx, const Vec3& rx, const Vec3& target) {
  const double d_tx = (target - tx).norm();
  const double d_rx = (target - rx).norm();
  if (d_tx < kCoincidenceTolerance || d_rx < kCoincidenceTolerance) {
    throw GeometryError("bistatic_range: target coincides with an antenna");
  }
  BistaticRange r;
  r.bistatic = d_tx + d_rx;
  // Triangle inequality guarantees ≥ 0 mathematically; clamp rounding noise.
  r.excess = std::max(0.0, r.bistatic - (tx - rx).norm());
  return r;
}

double bistatic_doppler(const NodePose& tx, const NodePose& rx, const Vec3& target_position,
                        const Vec3& target_velocity, double wavelength) {
  if (!(wavelength > 0.0)) throw UsageError("bistatic_doppler: wavelength must be positive");
  const Vec3 u_tx = unit_vector(tx.position, target_position);
  const Vec3 u_rx = unit_vector(rx.position, target_position);
  const double range_rate =
      u_tx.dot(target_velocity - tx.velocity) + u_rx.dot(target_velocity - rx.velocity);
  return -range_rate / wavelength;
}

std::vector<Vec3> iso_range_ellipse(const Vec3& tx, const Vec3& rx, double bistatic_range,
                                    std::size_t n_points) {
  if (tx.z() != 0.0 || rx.z() != 0.0) {
    throw GeometryError("iso_range_ellipse: foci must lie in the z = 0 plane");
  }
  const double baseline = (rx - tx).norm();
  if (!(bistatic_range > baseline)) {
    throw GeometryError("iso_range_ellipse: bistatic range must exceed the baseline");
  }
  const double a = 0.5 * bistatic_range;
  const double c = 0.5 * baseline;
  const double b = std::sqrt((a - c) * (a + c));
  const Vec3 center = 0.5 * (tx + rx);
  const double heading = baseline > 0.0 ? std::atan2(rx.y() - tx.y(), rx.x() - tx.x()) : 0.0;
  const double ch = std::cos(heading);
  const double sh = std::sin(heading);

  std::vector<Vec3> points;
  points.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double theta = kTwoPi * static_cast<double>(i) / static_cast<double>(n_points);
    const double ex = a * std::cos(theta);
    const double ey = b * std::sin(theta);
    points.emplace_back(center.x() + ch * ex - sh * ey, center.y() + sh * ex + ch * ey, 0.0);
  }
  return points;
}

}  // namespace bisim
