#pragma once

#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cv2x/rng.hpp"

namespace cv2x {

struct Position2D {
  double x = 0.0;
  double y = 0.0;
};

struct Velocity2D {
  double vx = 0.0;
  double vy = 0.0;
};

/// Euclidean distance between two points.
inline double distance(const Position2D& a, const Position2D& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Magnitude of the velocity difference.
inline double relative_speed(const Velocity2D& a, const Velocity2D& b) {
  return std::hypot(a.vx - b.vx, a.vy - b.vy);
}

inline double speed(const Velocity2D& v) { return std::hypot(v.vx, v.vy); }

enum class BoundaryPolicy { kUTurn, kWrap };

inline BoundaryPolicy boundary_policy_from_string(const std::string& s) {
  if (s == "u_turn") return BoundaryPolicy::kUTurn;
  if (s == "wrap") return BoundaryPolicy::kWrap;
  throw std::runtime_error("unknown boundary_policy: '" + s + "'");
}

inline std::string to_string(BoundaryPolicy p) {
  return p == BoundaryPolicy::kUTurn ? "u_turn" : "wrap";
}

/// Square region of interest crossed by a grid of two-way roads.
///
/// Roads are modeled as centerlines spanning the full square: `rows`
/// horizontal roads at evenly spaced interior y positions and `cols`
/// vertical roads at interior x positions. lane_offset is kept for
/// configurability but defaults to 0 (single centerline per road).
struct RoadGrid {
  double roi_side = 450.0;
  int rows = 4;
  int cols = 4;
  double lane_offset = 0.0;

  double row_y(int i) const { return roi_side * (i + 1) / (rows + 1); }
  double col_x(int j) const { return roi_side * (j + 1) / (cols + 1); }
  int road_count() const { return rows + cols; }

  void validate() const {
    if (roi_side <= 0) throw std::runtime_error("roi_side must be > 0");
    if (rows < 0 || cols < 0 || rows + cols < 1)
      throw std::runtime_error("road grid needs at least one road");
    if (lane_offset < 0) throw std::runtime_error("lane_offset must be >= 0");
  }

  double diagonal() const { return roi_side * std::sqrt(2.0); }

  bool inside(const Position2D& p, double tol = 1e-9) const {
    return p.x >= -tol && p.x <= roi_side + tol && p.y >= -tol &&
           p.y <= roi_side + tol;
  }

  /// True when the point lies on a road centerline (within lane_offset+tol).
  bool on_road(const Position2D& p, double tol = 1e-9) const {
    if (!inside(p, tol)) return false;
    const double band = lane_offset + tol;
    for (int i = 0; i < rows; ++i)
      if (std::abs(p.y - row_y(i)) <= band) return true;
    for (int j = 0; j < cols; ++j)
      if (std::abs(p.x - col_x(j)) <= band) return true;
    return false;
  }
};

struct Vehicle {
  int id = 0;
  Position2D pos;
  Velocity2D vel;
  double tx_power_dbm = 26.0;
};

/// Closest point to p on any road centerline of the grid.
inline Position2D snap_to_road(const RoadGrid& grid, const Position2D& p) {
  const double cx = std::min(std::max(p.x, 0.0), grid.roi_side);
  const double cy = std::min(std::max(p.y, 0.0), grid.roi_side);
  Position2D best{cx, grid.rows > 0 ? grid.row_y(0) : cy};
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.rows; ++i) {
    const Position2D cand{cx, grid.row_y(i)};
    const double d = distance(p, cand);
    if (d < best_d) {
      best_d = d;
      best = cand;
    }
  }
  for (int j = 0; j < grid.cols; ++j) {
    const Position2D cand{grid.col_x(j), cy};
    const double d = distance(p, cand);
    if (d < best_d) {
      best_d = d;
      best = cand;
    }
  }
  return best;
}

/// Place n vehicles uniformly over the road segments with speeds drawn
/// uniformly from [v_min, v_max] and a uniform direction sign (two-way
/// roads). Deterministic for a fixed rng state.
inline std::vector<Vehicle> drop_vehicles(const RoadGrid& grid, int n,
                                          SimRng& rng, double v_min = 5.0,
                                          double v_max = 15.0,
                                          double tx_power_dbm = 26.0) {
  grid.validate();
  if (n < 1) throw std::invalid_argument("drop_vehicles: n must be >= 1");
  if (v_min < 0 || v_max < v_min)
    throw std::invalid_argument("drop_vehicles: bad speed range");
  std::vector<Vehicle> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const int road = static_cast<int>(rng.uniform_int(0, grid.road_count() - 1));
    const double along = rng.uniform(0.0, grid.roi_side);
    const double s = rng.uniform(v_min, v_max);
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    Vehicle v;
    v.id = k;
    v.tx_power_dbm = tx_power_dbm;
    if (road < grid.rows) {
      v.pos = {along, grid.row_y(road)};
      v.vel = {sign * s, 0.0};
    } else {
      v.pos = {grid.col_x(road - grid.rows), along};
      v.vel = {0.0, sign * s};
    }
    out.push_back(v);
  }
  return out;
}

namespace detail {

// Directions a vehicle can take, as axis/sign pairs.
struct Heading {
  bool horizontal;
  double sign;
};

inline Heading heading_of(const Velocity2D& v) {
  if (std::abs(v.vx) > 0.0) return {true, v.vx > 0 ? 1.0 : -1.0};
  return {false, v.vy > 0 ? 1.0 : -1.0};
}

// Distance to the nearest intersection strictly ahead, or +inf.
inline double next_intersection(const RoadGrid& grid, double along,
                                double sign, bool horizontal, double* at) {
  const int n = horizontal ? grid.cols : grid.rows;
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) {
    const double c = horizontal ? grid.col_x(j) : grid.row_y(j);
    const double dist = (c - along) * sign;
    if (dist > 1e-9 && dist < best) {
      best = dist;
      *at = c;
    }
  }
  return best;
}

}  // namespace detail

/// Advance all vehicles by dt seconds. A vehicle reaching an intersection
/// picks a continuing direction (straight or either turn, never reverse)
/// uniformly at random; at the RoI boundary it U-turns or wraps per policy.
inline void advance(const RoadGrid& grid, std::vector<Vehicle>& vehicles,
                    double dt, SimRng& rng,
                    BoundaryPolicy policy = BoundaryPolicy::kUTurn) {
  if (dt <= 0) throw std::invalid_argument("advance: dt must be > 0");
  for (Vehicle& v : vehicles) {
    const double s = speed(v.vel);
    if (s == 0.0) continue;
    double remaining = s * dt;
    // guard against pathological configs; plenty for any sane dt
    for (int hop = 0; hop < 64 && remaining > 1e-12; ++hop) {
      const detail::Heading h = detail::heading_of(v.vel);
      double& along = h.horizontal ? v.pos.x : v.pos.y;
      double cross_at = 0.0;
      const double d_int =
          detail::next_intersection(grid, along, h.sign, h.horizontal, &cross_at);
      const double boundary = h.sign > 0 ? grid.roi_side : 0.0;
      const double d_bnd = (boundary - along) * h.sign;
      if (remaining < d_int && remaining < d_bnd) {
        along += h.sign * remaining;
        remaining = 0.0;
      } else if (d_int <= d_bnd) {
        along = cross_at;
        remaining -= d_int;
        // 0 = straight, 1/2 = turn onto the crossing road
        const int choice = static_cast<int>(rng.uniform_int(0, 2));
        if (choice != 0) {
          const double turn_sign = choice == 1 ? 1.0 : -1.0;
          if (h.horizontal)
            v.vel = {0.0, turn_sign * s};
          else
            v.vel = {turn_sign * s, 0.0};
        }
      } else {
        along = boundary;
        remaining -= d_bnd;
        if (policy == BoundaryPolicy::kUTurn) {
          if (h.horizontal)
            v.vel.vx = -v.vel.vx;
          else
            v.vel.vy = -v.vel.vy;
        } else {
          along = h.sign > 0 ? 0.0 : grid.roi_side;
        }
      }
    }
  }
}

}  // namespace cv2x
