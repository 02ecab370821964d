#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "bisim/geometry.hpp"
#include "bisim/types.hpp"

namespace bisim {

/// One link's measured excess delay and bistatic Doppler.
struct BistaticObservation {
  std::string tx_id;
  std::string rx_id;
  double excess_delay = 0.0;  // s, ≥ 0
  double doppler = 0.0;       // Hz
  double wavelength = kSpeedOfLight / 3.7e9;
  double timestamp = 0.0;
  double weight = 1.0;
};

using NodeTable = std::map<std::string, NodePose>;

struct LocalizeOptions {
  int dim = 2;  // 2 solves in the z = 0 plane
  double grid_cell = 1.0;  // m
  double grid_scale = 1.5;
  std::size_t max_grid_cells = 4'000'000;  // cell size grows beyond this
  std::size_t max_iterations = 100;
  double step_tolerance = 1e-9;  // m
  double ambiguity_tolerance = 0.1;  // rms metres above the best solution
  std::size_t max_candidates = 64;
};

inline constexpr double kInfiniteCondition = std::numeric_limits<double>::infinity();

struct StateEstimate {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double position_rms = 0.0;  // m
  double velocity_rms = 0.0;  // Hz
  double position_condition = kInfiniteCondition;
  double velocity_condition = kInfiniteCondition;
  std::size_t velocity_rank = 0;
  std::vector<Vec3> blind_directions;  // unobservable velocity subspace
  bool ambiguous = false;
  bool degenerate = false;
  bool converged = true;
  std::size_t iterations = 0;
  std::vector<Vec3> alternates;  // other solutions of comparable residual
};

/// Weighted bistatic-range least squares: coarse grid search then damped
/// Gauss–Newton from every grid local minimum. Throws UsageError without
/// observations and ConfigError on unknown node ids.
StateEstimate localize(const std::vector<BistaticObservation>& observations, const NodeTable& nodes,
                       const LocalizeOptions& options = {});

/// Weighted least squares for v from f_D = −(1/λ)(û_tx + û_rx)·v (node motion
/// compensated). Rank-deficient systems return the minimum-norm solution and
/// the blind directions. Fills only the velocity part of the estimate.
StateEstimate estimate_velocity(const std::vector<BistaticObservation>& observations,
                                const Vec3& position, const NodeTable& nodes, int dim = 2);

/// localize followed by estimate_velocity at the located position.
StateEstimate fuse(const std::vector<BistaticObservation>& observations, const NodeTable& nodes,
                   const LocalizeOptions& options = {});

struct LinkGeometry {
  Vec3 tx = Vec3::Zero();
  Vec3 rx = Vec3::Zero();
  double wavelength = kSpeedOfLight / 3.7e9;
};

struct GeometryCondition {
  double position_gdop = kInfiniteCondition;     // sqrt(tr((JᵀJ)⁻¹)), m per m
  double position_condition = kInfiniteCondition;  // σ_max/σ_min of J
  double velocity_gdop = kInfiniteCondition;     // sqrt(tr((GᵀG)⁻¹)), m/s per Hz
  double velocity_condition = kInfiniteCondition;  // σ_max/σ_min of G
  std::size_t position_rank = 0;
  std::size_t velocity_rank = 0;
};

/// Conditioning of the range Jacobian J (rows û_tx + û_rx) and the Doppler
/// matrix G (rows (û_tx + û_rx)/λ) at a hypothesized position. ∞ marks a
/// rank-deficient (blind or degenerate) geometry.
GeometryCondition geometry_condition(const std::vector<LinkGeometry>& links, const Vec3& position,
                                     int dim = 2);

}  // namespace bisim
