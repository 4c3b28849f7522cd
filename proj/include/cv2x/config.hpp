#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cv2x/channel.hpp"
#include "cv2x/gbmu.hpp"
#include "cv2x/geometry.hpp"
#include "cv2x/io.hpp"
#include "cv2x/link_abstraction.hpp"
#include "cv2x/sps.hpp"

namespace cv2x {

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<const char*> allowed,
                       const std::string& section) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw std::runtime_error("config: unknown key '" + it.key() + "' in " + section);
  }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace detail

struct GeometryConfig {
  double roi_side = 450.0;
  int rows = 4;
  int cols = 4;
  double lane_offset = 0.0;
  int n_vehicles = 21;
  double v_min = 5.0;
  double v_max = 15.0;
  std::string boundary_policy = "u_turn";

  RoadGrid grid() const { return {roi_side, rows, cols, lane_offset}; }
  BoundaryPolicy policy() const { return boundary_policy_from_string(boundary_policy); }

  void validate() const {
    grid().validate();
    policy();
    if (n_vehicles < 1) throw std::runtime_error("config: n_vehicles must be >= 1");
    if (v_min < 0 || v_max < v_min) throw std::runtime_error("config: bad speed range");
  }
};

struct AbstractionConfig {
  std::string type = "logistic";  // "logistic" or "table"
  double midpoint_db = 2.0;
  double slope_db = 1.5;
  std::string table_path;

  LinkAbstraction build() const {
    if (type == "logistic") return LinkAbstraction::logistic(midpoint_db, slope_db);
    if (type == "table") return LinkAbstraction::from_csv(table_path);
    throw std::runtime_error("config: abstraction type must be 'logistic' or 'table'");
  }
};

struct SimConfig {
  long total_subframes = 10240;
  double subframe_duration_s = 1e-3;
  double nsv_threshold_m = 200.0;
  double arrival_rate = 1.0;      // packet per vehicle per SPS period
  double logging_range_m = 150.0; // urban PRR baseline; 0 = log every receiver
  int snapshot_tx_id = 0;         // transmitter whose last subframe is snapshotted

  void validate() const {
    if (total_subframes < 1) throw std::runtime_error("config: total_subframes must be >= 1");
    if (subframe_duration_s <= 0)
      throw std::runtime_error("config: subframe_duration_s must be > 0");
    if (nsv_threshold_m <= 0) throw std::runtime_error("config: nsv_threshold_m must be > 0");
    if (arrival_rate < 0 || arrival_rate > 1)
      throw std::runtime_error("config: arrival_rate outside [0,1]");
    if (logging_range_m < 0) throw std::runtime_error("config: logging_range_m must be >= 0");
  }
};

struct ScenarioConfig {
  std::uint64_t seed = 7;
  GeometryConfig geometry;
  ChannelParams channel;
  double tx_power_dbm = 26.0;
  AbstractionConfig abstraction;
  SpsConfig sps;
  SimConfig sim;
  GbmuConfig gbmu;

  void validate() const {
    geometry.validate();
    channel.validate();
    abstraction.build();
    sps.validate();
    sim.validate();
    gbmu.validate();
    if (sim.snapshot_tx_id < 0 || sim.snapshot_tx_id >= geometry.n_vehicles)
      throw std::runtime_error("config: snapshot_tx_id outside vehicle range");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["geometry"] = {{"roi_side", geometry.roi_side},
                     {"rows", geometry.rows},
                     {"cols", geometry.cols},
                     {"lane_offset", geometry.lane_offset},
                     {"n_vehicles", geometry.n_vehicles},
                     {"v_min", geometry.v_min},
                     {"v_max", geometry.v_max},
                     {"boundary_policy", geometry.boundary_policy}};
    j["channel"] = {{"k_ref", channel.k_ref},
                    {"d0", channel.d0},
                    {"omega", channel.omega},
                    {"carrier_hz", channel.carrier_hz},
                    {"noise_dbm", channel.noise_dbm},
                    {"noise_figure_db", channel.noise_figure_db},
                    {"coherence_gamma", channel.coherence_gamma},
                    {"tx_power_dbm", tx_power_dbm}};
    j["abstraction"] = {{"type", abstraction.type},
                        {"midpoint_db", abstraction.midpoint_db},
                        {"slope_db", abstraction.slope_db},
                        {"table_path", abstraction.table_path}};
    j["sps"] = {{"window_subframes", sps.window_subframes},
                {"channels", sps.channels},
                {"threshold_rsrp_dbm", sps.threshold_rsrp_dbm},
                {"sensing_floor_dbm", sps.sensing_floor_dbm},
                {"counter_min", sps.counter_min},
                {"counter_max", sps.counter_max},
                {"keep_probability", sps.keep_probability}};
    j["sim"] = {{"total_subframes", sim.total_subframes},
                {"subframe_duration_s", sim.subframe_duration_s},
                {"nsv_threshold_m", sim.nsv_threshold_m},
                {"arrival_rate", sim.arrival_rate},
                {"logging_range_m", sim.logging_range_m},
                {"snapshot_tx_id", sim.snapshot_tx_id}};
    j["gbmu"] = {{"step_size", gbmu.step_size},
                 {"pos_threshold", gbmu.pos_threshold},
                 {"max_iterations", gbmu.max_iterations},
                 {"interferer_threshold_m", gbmu.interferer_threshold_m},
                 {"road_snap", gbmu.road_snap},
                 {"resnapshot_every", gbmu.resnapshot_every}};
    return j;
  }

  static ScenarioConfig from_json(const nlohmann::json& j) {
    ScenarioConfig c;
    detail::check_keys(
        j, {"seed", "geometry", "channel", "abstraction", "sps", "sim", "gbmu"},
        "config root");
    detail::read_key(j, "seed", c.seed);
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      detail::check_keys(g,
                         {"roi_side", "rows", "cols", "lane_offset", "n_vehicles",
                          "v_min", "v_max", "boundary_policy"},
                         "geometry");
      detail::read_key(g, "roi_side", c.geometry.roi_side);
      detail::read_key(g, "rows", c.geometry.rows);
      detail::read_key(g, "cols", c.geometry.cols);
      detail::read_key(g, "lane_offset", c.geometry.lane_offset);
      detail::read_key(g, "n_vehicles", c.geometry.n_vehicles);
      detail::read_key(g, "v_min", c.geometry.v_min);
      detail::read_key(g, "v_max", c.geometry.v_max);
      detail::read_key(g, "boundary_policy", c.geometry.boundary_policy);
    }
    if (j.contains("channel")) {
      const auto& ch = j.at("channel");
      detail::check_keys(ch,
                         {"k_ref", "d0", "omega", "carrier_hz", "noise_dbm",
                          "noise_figure_db", "coherence_gamma", "tx_power_dbm"},
                         "channel");
      detail::read_key(ch, "k_ref", c.channel.k_ref);
      detail::read_key(ch, "d0", c.channel.d0);
      detail::read_key(ch, "omega", c.channel.omega);
      detail::read_key(ch, "carrier_hz", c.channel.carrier_hz);
      detail::read_key(ch, "noise_dbm", c.channel.noise_dbm);
      detail::read_key(ch, "noise_figure_db", c.channel.noise_figure_db);
      detail::read_key(ch, "coherence_gamma", c.channel.coherence_gamma);
      detail::read_key(ch, "tx_power_dbm", c.tx_power_dbm);
    }
    if (j.contains("abstraction")) {
      const auto& a = j.at("abstraction");
      detail::check_keys(a, {"type", "midpoint_db", "slope_db", "table_path"},
                         "abstraction");
      detail::read_key(a, "type", c.abstraction.type);
      detail::read_key(a, "midpoint_db", c.abstraction.midpoint_db);
      detail::read_key(a, "slope_db", c.abstraction.slope_db);
      detail::read_key(a, "table_path", c.abstraction.table_path);
    }
    if (j.contains("sps")) {
      const auto& s = j.at("sps");
      detail::check_keys(s,
                         {"window_subframes", "channels", "threshold_rsrp_dbm",
                          "sensing_floor_dbm", "counter_min", "counter_max",
                          "keep_probability"},
                         "sps");
      detail::read_key(s, "window_subframes", c.sps.window_subframes);
      detail::read_key(s, "channels", c.sps.channels);
      detail::read_key(s, "threshold_rsrp_dbm", c.sps.threshold_rsrp_dbm);
      detail::read_key(s, "sensing_floor_dbm", c.sps.sensing_floor_dbm);
      detail::read_key(s, "counter_min", c.sps.counter_min);
      detail::read_key(s, "counter_max", c.sps.counter_max);
      detail::read_key(s, "keep_probability", c.sps.keep_probability);
    }
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      detail::check_keys(s,
                         {"total_subframes", "subframe_duration_s", "nsv_threshold_m",
                          "arrival_rate", "logging_range_m", "snapshot_tx_id"},
                         "sim");
      detail::read_key(s, "total_subframes", c.sim.total_subframes);
      detail::read_key(s, "subframe_duration_s", c.sim.subframe_duration_s);
      detail::read_key(s, "nsv_threshold_m", c.sim.nsv_threshold_m);
      detail::read_key(s, "arrival_rate", c.sim.arrival_rate);
      detail::read_key(s, "logging_range_m", c.sim.logging_range_m);
      detail::read_key(s, "snapshot_tx_id", c.sim.snapshot_tx_id);
    }
    if (j.contains("gbmu")) {
      const auto& g = j.at("gbmu");
      detail::check_keys(g,
                         {"step_size", "pos_threshold", "max_iterations",
                          "interferer_threshold_m", "road_snap", "resnapshot_every"},
                         "gbmu");
      detail::read_key(g, "step_size", c.gbmu.step_size);
      detail::read_key(g, "pos_threshold", c.gbmu.pos_threshold);
      detail::read_key(g, "max_iterations", c.gbmu.max_iterations);
      detail::read_key(g, "interferer_threshold_m", c.gbmu.interferer_threshold_m);
      detail::read_key(g, "road_snap", c.gbmu.road_snap);
      detail::read_key(g, "resnapshot_every", c.gbmu.resnapshot_every);
    }
    c.validate();
    return c;
  }

  static ScenarioConfig load(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("config: cannot parse " + path + ": " + e.what());
    }
    return from_json(j);
  }

  void save(const std::string& path) const { write_file(path, to_json().dump(2) + "\n"); }
};

}  // namespace cv2x
