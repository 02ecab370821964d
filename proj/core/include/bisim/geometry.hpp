#pragma once

#include <string>
#include <variant>
#include <vector>

#include "bisim/types.hpp"

namespace bisim {

/// Instantaneous kinematic state of a radio node or scatterer (ENU frame).
struct NodePose {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();  // m/s
  std::string node_id;
};

struct Waypoint {
  double time = 0.0;  // s
  Vec3 position = Vec3::Zero();
};

/// Piecewise-linear track. Outside the waypoint span the position is clamped
/// and the velocity is zero; at an interior waypoint the following segment's
/// slope is used.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<Waypoint> waypoints);

  static Trajectory stationary(const Vec3& position);

  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  bool empty() const { return waypoints_.empty(); }

 private:
  std::vector<Waypoint> waypoints_;
};

/// Throws ConfigError for an empty trajectory.
NodePose pose_at(const Trajectory& trajectory, double t);

/// Motion model of a node: either a constant-velocity pose (position given at
/// t = 0) or a waypoint trajectory.
struct NodeMotion {
  std::string id;
  std::variant<NodePose, Trajectory> motion;

  NodePose state_at(double t) const;
};

struct BistaticRange {
  double bistatic = 0.0;  // |tgt − tx| + |tgt − rx|, m
  double excess = 0.0;    // bistatic − |tx − rx|, m (≥ 0)
};

/// Throws GeometryError if the target coincides with either antenna.
BistaticRange bistatic_range(const Vec3& tx, const Vec3& rx, const Vec3& target);

/// Bistatic Doppler in Hz of a moving point seen over a moving Tx/Rx pair:
/// f_D = −(1/λ)·d/dt(|p − p_tx| + |p − p_rx|). A shrinking bistatic range
/// gives a positive Doppler.
double bistatic_doppler(const NodePose& tx, const NodePose& rx, const Vec3& target_position,
                        const Vec3& target_velocity, double wavelength);

/// Points of the z = 0 iso-range ellipse with foci tx and rx. Throws
/// GeometryError when bistatic_range does not exceed the baseline or a focus
/// lies off the z = 0 plane.
std::vector<Vec3> iso_range_ellipse(const Vec3& tx, const Vec3& rx, double bistatic_range,
                                    std::size_t n_points);

/// Unit vector from `from` to `to`; throws GeometryError on coincidence.
Vec3 unit_vector(const Vec3& from, const Vec3& to);

/// Direction for azimuth (from +x towards +y) and elevation (above the xy plane), degrees.
Vec3 direction_from_angles(double azimuth_deg, double elevation_deg);

}  // namespace bisim
