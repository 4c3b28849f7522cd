#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cv2x/geometry.hpp"
#include "cv2x/io.hpp"
#include "cv2x/regression.hpp"

namespace cv2x {

/// Receivers closer than this to the transmitter drop out of the step
/// (their moving direction is undefined).
inline constexpr double kCoLocationGuardM = 1e-6;

struct GbmuConfig {
  double step_size = 1.0;          // delta, meters per unit gradient
  double pos_threshold = 1e-3;     // stop when a step moves less than this
  long max_iterations = 10000;
  double interferer_threshold_m = 200.0;  // NSV awareness range
  bool road_snap = false;          // keep the iterate on the road grid
  long resnapshot_every = 0;       // 0 = receivers frozen for the whole run

  void validate() const {
    if (step_size <= 0) throw std::runtime_error("gbmu: step_size must be > 0");
    if (pos_threshold <= 0) throw std::runtime_error("gbmu: pos_threshold must be > 0");
    if (max_iterations < 1) throw std::runtime_error("gbmu: max_iterations must be >= 1");
    if (interferer_threshold_m <= 0)
      throw std::runtime_error("gbmu: interferer_threshold_m must be > 0");
  }
};

/// What the transmitter knows about one target receiver: its position, its
/// NSV bucket, and where its main (closest co-resource) interferer sits.
/// One-hop information only.
struct ReceiverView {
  int id = 0;
  Position2D pos;
  int nsv = 0;
  Position2D main_interferer_pos;

  double interferer_distance() const { return distance(pos, main_interferer_pos); }
};

/// Log-fair aggregate utility: sum of ln(predicted success probability)
/// over all receivers. Finite by the prediction clamp floor.
inline double utility(const Position2D& tx_pos,
                      std::span<const ReceiverView> receivers,
                      const CoefficientTable& table) {
  if (receivers.empty())
    throw std::invalid_argument("utility: receiver set must be non-empty");
  double u = 0.0;
  for (const ReceiverView& r : receivers) {
    const double d = distance(tx_pos, r.pos);
    u += std::log(predict_p(table, r.nsv, std::max(d, kCoLocationGuardM),
                            r.interferer_distance()));
  }
  return u;
}

/// Gradient of the log-utility with respect to one link's signal distance:
/// alpha / (d * p). Negative for alpha < 0, which moves the transmitter
/// toward the receiver once composed with the receiver->transmitter unit
/// vector, and shrinks as p grows (the fairness property).
inline double gradient(double d_m, double p, double alpha) {
  if (d_m <= 0.0) throw std::invalid_argument("gradient: d must be > 0");
  if (p <= 0.0) throw std::invalid_argument("gradient: p must be > 0");
  return alpha / d_m / p;
}

/// Per-receiver working values of one iteration.
struct GbmuLinkState {
  int receiver_id = 0;
  double d_m = 0.0;
  double p = 0.0;
  double g = 0.0;
  double tx = 0.0, ty = 0.0;  // unit vector receiver -> transmitter
  bool skipped = false;       // co-located receiver, term dropped
};

struct GbmuState {
  Position2D tx_pos;
  long iteration = 0;
  double utility_value = 0.0;
  std::vector<GbmuLinkState> links;
};

/// One iteration of the position update. Receiver views are read-only: the
/// optimizer runs on a frozen snapshot, while d and p are recomputed from
/// the moving transmitter each call. Returns the displacement in meters.
inline double gbmu_step(GbmuState& state, std::span<const ReceiverView> receivers,
                        const CoefficientTable& table, const GbmuConfig& config) {
  if (receivers.empty())
    throw std::invalid_argument("gbmu_step: receiver set must be non-empty");
  state.links.clear();
  state.links.reserve(receivers.size());

  double sum_x = 0.0, sum_y = 0.0;
  int kept = 0;
  for (const ReceiverView& r : receivers) {
    GbmuLinkState link;
    link.receiver_id = r.id;
    link.d_m = distance(state.tx_pos, r.pos);
    if (link.d_m < kCoLocationGuardM) {
      link.skipped = true;
      state.links.push_back(link);
      continue;
    }
    const CoefficientRow& row = table.effective_row(r.nsv);
    link.p = predict_p(table, r.nsv, link.d_m, r.interferer_distance());
    link.g = gradient(link.d_m, link.p, row.alpha);
    link.tx = (state.tx_pos.x - r.pos.x) / link.d_m;
    link.ty = (state.tx_pos.y - r.pos.y) / link.d_m;
    // wanted position for this receiver
    sum_x += state.tx_pos.x + config.step_size * link.tx * link.g;
    sum_y += state.tx_pos.y + config.step_size * link.ty * link.g;
    kept += 1;
    state.links.push_back(link);
  }

  Position2D next = state.tx_pos;
  if (kept > 0) next = {sum_x / kept, sum_y / kept};  // centroid of wanted positions

  const double moved = distance(state.tx_pos, next);
  state.tx_pos = next;
  state.iteration += 1;
  state.utility_value = utility(state.tx_pos, receivers, table);
  return moved;
}

struct GbmuTracePoint {
  long iteration = 0;
  double utility = 0.0;
  double displacement_m = 0.0;
};

struct GbmuResult {
  Position2D final_pos;
  std::vector<GbmuTracePoint> trace;  // trace[0] is the initial state
  bool converged = false;
  long iterations = 0;
};

/// Iterate gbmu_step until the displacement falls below pos_threshold or
/// max_iterations is reached. Pure in-node computation over the snapshot;
/// an optional refresh callback may replace the receiver views every
/// resnapshot_every iterations.
inline GbmuResult run_gbmu(
    const Position2D& initial_tx_pos, std::vector<ReceiverView> receivers,
    const CoefficientTable& table, const GbmuConfig& config,
    const RoadGrid* snap_grid = nullptr,
    const std::function<std::vector<ReceiverView>(long)>& refresh = {}) {
  config.validate();
  GbmuState state;
  state.tx_pos = initial_tx_pos;
  state.utility_value = utility(state.tx_pos, receivers, table);

  GbmuResult result;
  result.trace.push_back({0, state.utility_value, 0.0});
  for (long k = 1; k <= config.max_iterations; ++k) {
    if (config.resnapshot_every > 0 && refresh && k % config.resnapshot_every == 0)
      receivers = refresh(k);
    const Position2D prev = state.tx_pos;
    double moved = gbmu_step(state, receivers, table, config);
    if (config.road_snap && snap_grid) {
      state.tx_pos = snap_to_road(*snap_grid, state.tx_pos);
      state.utility_value = utility(state.tx_pos, receivers, table);
      moved = distance(prev, state.tx_pos);
    }
    result.trace.push_back({k, state.utility_value, moved});
    result.iterations = k;
    if (moved < config.pos_threshold) {
      result.converged = true;
      break;
    }
  }
  result.final_pos = state.tx_pos;
  return result;
}

/// Normalized utility gain of a trace: (U(k) - U(0)) / |U(0)|.
inline double utility_gain(std::span<const GbmuTracePoint> trace) {
  if (trace.empty()) throw std::invalid_argument("utility_gain: empty trace");
  const double u0 = trace.front().utility;
  if (u0 == 0.0)
    throw std::domain_error("utility_gain: undefined for U(0) = 0");
  return (trace.back().utility - u0) / std::abs(u0);
}

inline constexpr const char* kTraceCsvHeader = "iteration,utility,displacement_m";

inline std::string trace_to_csv(std::span<const GbmuTracePoint> trace) {
  std::ostringstream out;
  out << kTraceCsvHeader << '\n';
  for (const GbmuTracePoint& p : trace)
    out << p.iteration << ',' << format_double(p.utility) << ','
        << format_double(p.displacement_m) << '\n';
  return out.str();
}

}  // namespace cv2x
