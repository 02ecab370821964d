#include "bisim/fusion.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "bisim/errors.hpp"
#include "bisim/parallel.hpp"

namespace bisim {
namespace {

struct ResolvedLink {
  NodePose tx;
  NodePose rx;
  double measured_range = 0.0;  // bistatic, m
  double sqrt_weight = 1.0;
  double wavelength = 0.0;
  double doppler = 0.0;
};

std::vector<ResolvedLink> resolve(const std::vector<BistaticObservation>& observations,
                                  const NodeTable& nodes) {
  std::vector<ResolvedLink> links;
  links.reserve(observations.size());
  for (const auto& o : observations) {
    const auto tx = nodes.find(o.tx_id);
    const auto rx = nodes.find(o.rx_id);
    if (tx == nodes.end()) throw ConfigError("observation references unknown node '" + o.tx_id + "'");
    if (rx == nodes.end()) throw ConfigError("observation references unknown node '" + o.rx_id + "'");
    if (!(o.weight > 0.0)) throw UsageError("observation weight must be positive");
    if (!(o.wavelength > 0.0)) throw UsageError("observation wavelength must be positive");
    if (o.excess_delay < 0.0) throw UsageError("observation excess delay must be non-negative");
    ResolvedLink l;
    l.tx = tx->second;
    l.rx = rx->second;
    l.measured_range = kSpeedOfLight * o.excess_delay + (l.tx.position - l.rx.position).norm();
    l.sqrt_weight = std::sqrt(o.weight);
    l.wavelength = o.wavelength;
    l.doppler = o.doppler;
    links.push_back(l);
  }
  return links;
}

Vec3 lift(const Eigen::VectorXd& p) {
  return p.size() == 2 ? Vec3(p[0], p[1], 0.0) : Vec3(p[0], p[1], p[2]);
}

double cost_at(const std::vector<ResolvedLink>& links, const Vec3& p) {
  double cost = 0.0;
  for (const auto& l : links) {
    const double r = (p - l.tx.position).norm() + (p - l.rx.position).norm() - l.measured_range;
    cost += l.sqrt_weight * l.sqrt_weight * r * r;
  }
  return cost;
}

Vec3 safe_unit(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  const double n = d.norm();
  return n > 1e-12 ? Vec3(d / n) : Vec3::Zero();
}

// Rows √w·(û_tx + û_rx) restricted to the first `dim` coordinates.
Eigen::MatrixXd range_jacobian(const std::vector<ResolvedLink>& links, const Vec3& p, int dim) {
  Eigen::MatrixXd j(static_cast<Eigen::Index>(links.size()), dim);
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Vec3 g = safe_unit(links[i].tx.position, p) + safe_unit(links[i].rx.position, p);
    for (int c = 0; c < dim; ++c) j(static_cast<Eigen::Index>(i), c) = links[i].sqrt_weight * g[c];
  }
  return j;
}

struct Refined {
  Vec3 position;
  double cost = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

Refined levenberg_marquardt(const std::vector<ResolvedLink>& links, const Vec3& start,
                            const LocalizeOptions& options) {
  const int dim = options.dim;
  Eigen::VectorXd p(dim);
  for (int c = 0; c < dim; ++c) p[c] = start[c];
  double cost = cost_at(links, lift(p));
  double mu = -1.0;
  Refined out;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    const Vec3 pos = lift(p);
    const Eigen::MatrixXd j = range_jacobian(links, pos, dim);
    Eigen::VectorXd r(static_cast<Eigen::Index>(links.size()));
    for (std::size_t i = 0; i < links.size(); ++i) {
      const auto& l = links[i];
      r[static_cast<Eigen::Index>(i)] =
          l.sqrt_weight *
          ((pos - l.tx.position).norm() + (pos - l.rx.position).norm() - l.measured_range);
    }
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    if (mu < 0.0) mu = 1e-3 * std::max(1e-12, jtj.trace() / dim);
    const Eigen::MatrixXd damped = jtj + mu * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::VectorXd step = -damped.ldlt().solve(g);
    const Eigen::VectorXd candidate = p + step;
    const double candidate_cost = cost_at(links, lift(candidate));
    if (candidate_cost < cost) {
      p = candidate;
      cost = candidate_cost;
      mu /= 10.0;
    } else {
      mu *= 10.0;
    }
    if (step.norm() < options.step_tolerance || cost == 0.0) {
      out.converged = true;
      break;
    }
  }
  out.position = lift(p);
  out.cost = cost;
  return out;
}

struct Box {
  Vec3 lo;
  Vec3 hi;
};

// Every point of a link's ellipsoid lies within R/2 of the link centre, so a
// consistent target sits inside the intersection of those boxes.
Box search_box(const std::vector<ResolvedLink>& links, const LocalizeOptions& options) {
  Vec3 lo = Vec3::Constant(-std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 ulo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 uhi = -ulo;
  for (const auto& l : links) {
    const Vec3 c = 0.5 * (l.tx.position + l.rx.position);
    const double h = 0.5 * l.measured_range;
    lo = lo.cwiseMax(c - Vec3::Constant(h));
    hi = hi.cwiseMin(c + Vec3::Constant(h));
    ulo = ulo.cwiseMin(c - Vec3::Constant(h));
    uhi = uhi.cwiseMax(c + Vec3::Constant(h));
  }
  if ((hi.array() < lo.array()).any()) {
    lo = ulo;
    hi = uhi;
  }
  const Vec3 centre = 0.5 * (lo + hi);
  Vec3 half = 0.5 * options.grid_scale * (hi - lo);
  half = half.cwiseMax(Vec3::Constant(options.grid_cell));
  return {centre - half, centre + half};
}

}  // namespace

StateEstimate localize(const std::vector<BistaticObservation>& observations, const NodeTable& nodes,
                       const LocalizeOptions& options) {
  if (observations.empty()) throw UsageError("localize: no observations");
  if (options.dim != 2 && options.dim != 3) throw UsageError("localize: dim must be 2 or 3");
  const auto links = resolve(observations, nodes);
  const int dim = options.dim;

  const Box box = search_box(links, options);
  double cell = options.grid_cell;
  std::array<std::size_t, 3> counts{1, 1, 1};
  for (;;) {
    std::size_t total = 1;
    for (int c = 0; c < dim; ++c) {
      counts[static_cast<std::size_t>(c)] =
          static_cast<std::size_t>(std::ceil((box.hi[c] - box.lo[c]) / cell)) + 1;
      total *= counts[static_cast<std::size_t>(c)];
    }
    if (total <= options.max_grid_cells) break;
    cell *= 1.5;
  }
  const std::size_t nx = counts[0];
  const std::size_t ny = counts[1];
  const std::size_t nz = dim == 3 ? counts[2] : 1;
  const auto point = [&](std::size_t ix, std::size_t iy, std::size_t iz) {
    return Vec3(box.lo.x() + static_cast<double>(ix) * cell, box.lo.y() + static_cast<double>(iy) * cell,
                dim == 3 ? box.lo.z() + static_cast<double>(iz) * cell : 0.0);
  };
  std::vector<double> grid(nx * ny * nz);
  parallel_for(nz * ny, [&](std::size_t slab) {
    const std::size_t iz = slab / ny;
    const std::size_t iy = slab % ny;
    for (std::size_t ix = 0; ix < nx; ++ix) {
      grid[(iz * ny + iy) * nx + ix] = cost_at(links, point(ix, iy, iz));
    }
  });

  // Grid local minima, lowest cost first (ties by cell index).
  std::vector<std::size_t> minima;
  for (std::size_t iz = 0; iz < nz; ++iz) {
    for (std::size_t iy = 0; iy < ny; ++iy) {
      for (std::size_t ix = 0; ix < nx; ++ix) {
        const std::size_t idx = (iz * ny + iy) * nx + ix;
        const double v = grid[idx];
        bool is_min = true;
        for (int dz = (dim == 3 ? -1 : 0); dz <= (dim == 3 ? 1 : 0) && is_min; ++dz) {
          for (int dy = -1; dy <= 1 && is_min; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (dx == 0 && dy == 0 && dz == 0) continue;
              const auto jx = static_cast<std::ptrdiff_t>(ix) + dx;
              const auto jy = static_cast<std::ptrdiff_t>(iy) + dy;
              const auto jz = static_cast<std::ptrdiff_t>(iz) + dz;
              if (jx < 0 || jy < 0 || jz < 0 || jx >= static_cast<std::ptrdiff_t>(nx) ||
                  jy >= static_cast<std::ptrdiff_t>(ny) || jz >= static_cast<std::ptrdiff_t>(nz)) {
                continue;
              }
              const double w = grid[(static_cast<std::size_t>(jz) * ny + static_cast<std::size_t>(jy)) * nx +
                                    static_cast<std::size_t>(jx)];
              if (w < v) {
                is_min = false;
                break;
              }
            }
          }
        }
        if (is_min) minima.push_back(idx);
      }
    }
  }
  std::stable_sort(minima.begin(), minima.end(),
                   [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  if (minima.size() > options.max_candidates) minima.resize(options.max_candidates);

  std::vector<Refined> solutions;
  for (const std::size_t idx : minima) {
    const std::size_t ix = idx % nx;
    const std::size_t iy = (idx / nx) % ny;
    const std::size_t iz = idx / (nx * ny);
    Refined r = levenberg_marquardt(links, point(ix, iy, iz), options);
    const bool duplicate = std::any_of(solutions.begin(), solutions.end(), [&](const Refined& s) {
      return (s.position - r.position).norm() < std::max(1e-3, 0.01 * cell);
    });
    if (!duplicate) solutions.push_back(r);
  }
  std::stable_sort(solutions.begin(), solutions.end(),
                   [](const Refined& a, const Refined& b) { return a.cost < b.cost; });

  const double n_links = static_cast<double>(links.size());
  const auto rms = [&](double cost) { return std::sqrt(cost / n_links); };
  StateEstimate est;
  const Refined& best = solutions.front();
  est.position = best.position;
  est.position_rms = rms(best.cost);
  est.converged = best.converged;
  est.iterations = best.iterations;
  for (std::size_t i = 1; i < solutions.size(); ++i) {
    if (rms(solutions[i].cost) <= est.position_rms + options.ambiguity_tolerance) {
      est.alternates.push_back(solutions[i].position);
    }
  }

  const Eigen::MatrixXd j = range_jacobian(links, est.position, dim);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > 1e-9 * std::max(smax, 1e-300)) ++rank;
  }
  est.degenerate = rank < static_cast<std::size_t>(dim);
  est.position_condition = est.degenerate ? kInfiniteCondition : smax / sv[sv.size() - 1];
  est.ambiguous = !est.alternates.empty() || links.size() < static_cast<std::size_t>(dim) ||
                  est.degenerate;
  return est;
}

StateEstimate estimate_velocity(const std::vector<BistaticObservation>& observations,
                                const Vec3& position, const NodeTable& nodes, int dim) {
  if (observations.empty()) throw UsageError("estimate_velocity: no observations");
  if (dim != 2 && dim != 3) throw UsageError("estimate_velocity: dim must be 2 or 3");
  const auto links = resolve(observations, nodes);
  const auto n = static_cast<Eigen::Index>(links.size());
  Eigen::MatrixXd g(n, dim);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& l = links[static_cast<std::size_t>(i)];
    const Vec3 u_tx = unit_vector(l.tx.position, position);
    const Vec3 u_rx = unit_vector(l.rx.position, position);
    const Vec3 row = -(u_tx + u_rx) / l.wavelength;
    for (int c = 0; c < dim; ++c) g(i, c) = l.sqrt_weight * row[c];
    const double node_term = (u_tx.dot(l.tx.velocity) + u_rx.dot(l.rx.velocity)) / l.wavelength;
    y[i] = l.sqrt_weight * (l.doppler - node_term);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  const Eigen::VectorXd uty = svd.matrixU().transpose() * y;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > 1e-10 * std::max(smax, 1e-300)) {
      v += svd.matrixV().col(i) * (uty[i] / sv[i]);
      ++rank;
    }
  }

  StateEstimate est;
  est.position = position;
  est.velocity = lift(v);
  est.velocity_rank = rank;
  est.velocity_condition =
      rank == static_cast<std::size_t>(dim) ? smax / sv[sv.size() - 1] : kInfiniteCondition;
  for (Eigen::Index i = static_cast<Eigen::Index>(rank); i < dim; ++i) {
    est.blind_directions.push_back(lift(svd.matrixV().col(i)));
  }
  const Eigen::VectorXd resid = g * v - y;
  est.velocity_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  return est;
}

StateEstimate fuse(const std::vector<BistaticObservation>& observations, const NodeTable& nodes,
                   const LocalizeOptions& options) {
  StateEstimate est = localize(observations, nodes, options);
  const StateEstimate vel = estimate_velocity(observations, est.position, nodes, options.dim);
  est.velocity = vel.velocity;
  est.velocity_rms = vel.velocity_rms;
  est.velocity_rank = vel.velocity_rank;
  est.velocity_condition = vel.velocity_condition;
  est.blind_directions = vel.blind_directions;
  return est;
}

GeometryCondition geometry_condition(const std::vector<LinkGeometry>& links, const Vec3& position,
                                     int dim) {
  if (links.empty()) throw UsageError("geometry_condition: no links");
  if (dim != 2 && dim != 3) throw UsageError("geometry_condition: dim must be 2 or 3");
  const auto n = static_cast<Eigen::Index>(links.size());
  Eigen::MatrixXd j(n, dim);
  Eigen::MatrixXd g(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& l = links[static_cast<std::size_t>(i)];
    const Vec3 row = unit_vector(l.tx, position) + unit_vector(l.rx, position);
    for (int c = 0; c < dim; ++c) {
      j(i, c) = row[c];
      g(i, c) = row[c] / l.wavelength;
    }
  }
  const auto analyse = [dim](const Eigen::MatrixXd& m, double& gdop, double& cond, std::size_t& rank) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv[i] > 1e-9 * std::max(smax, 1e-300)) ++rank;
    }
    if (rank < static_cast<std::size_t>(dim)) {
      gdop = kInfiniteCondition;
      cond = kInfiniteCondition;
      return;
    }
    double trace = 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) trace += 1.0 / (sv[i] * sv[i]);
    gdop = std::sqrt(trace);
    cond = smax / sv[sv.size() - 1];
  };
  GeometryCondition out;
  analyse(j, out.position_gdop, out.position_condition, out.position_rank);
  analyse(g, out.velocity_gdop, out.velocity_condition, out.velocity_rank);
  return out;
}

}  // namespace bisim
