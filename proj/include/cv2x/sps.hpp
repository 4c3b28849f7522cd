#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cv2x/channel.hpp"
#include "cv2x/rng.hpp"

namespace cv2x {

/// One schedulable cell of the selection window.
struct Resource {
  int subframe = 0;
  int channel = 0;

  friend bool operator==(const Resource&, const Resource&) = default;
};

/// Selection window dimensions (default 8 subframes x 2 channels).
struct ResourceDims {
  int window_subframes = 8;
  int channels = 2;

  int total() const { return window_subframes * channels; }
  int index(const Resource& r) const { return r.subframe * channels + r.channel; }
  Resource at(int idx) const { return {idx / channels, idx % channels}; }

  void validate() const {
    if (window_subframes < 1 || channels < 1)
      throw std::runtime_error("resource window must have >= 1 subframe and channel");
  }
};

/// Per-resource sensing measurements of one vehicle over one window.
struct SensingRecord {
  Resource resource;
  double measured_rsrp_dbm = -std::numeric_limits<double>::infinity();
  double rssi_dbm = -std::numeric_limits<double>::infinity();
  bool reserved = false;
};

/// One transmission overheard on a resource, at the sensing node.
struct ObservedTransmission {
  double rx_power_w = 0.0;
  bool reserved = false;
};

struct ResourceObservation {
  Resource resource;
  std::vector<ObservedTransmission> transmissions;
};

/// Fold raw per-resource observations into the sensing table.
///
/// RSRP is the strongest decodable transmission (SCI decodable iff its power
/// at the sensor exceeds the sensing floor, else -inf). RSSI aggregates all
/// transmissions plus noise, so a silent resource reads the noise floor.
/// Every resource of the window must be observed exactly once.
inline std::vector<SensingRecord> sense(
    std::span<const ResourceObservation> observations, const ResourceDims& dims,
    double noise_w, double sensing_floor_dbm) {
  dims.validate();
  std::vector<SensingRecord> table(static_cast<std::size_t>(dims.total()));
  std::vector<bool> seen(table.size(), false);
  for (const ResourceObservation& obs : observations) {
    const Resource r = obs.resource;
    if (r.subframe < 0 || r.subframe >= dims.window_subframes || r.channel < 0 ||
        r.channel >= dims.channels)
      throw std::runtime_error("sense: resource outside the selection window");
    const int idx = dims.index(r);
    if (seen[static_cast<std::size_t>(idx)])
      throw std::runtime_error("sense: duplicate resource row");
    seen[static_cast<std::size_t>(idx)] = true;

    SensingRecord rec;
    rec.resource = r;
    double sum_w = 0.0;
    for (const ObservedTransmission& tx : obs.transmissions) {
      sum_w += tx.rx_power_w;
      const double p_dbm = watts_to_dbm(tx.rx_power_w);
      if (p_dbm >= sensing_floor_dbm) {
        rec.measured_rsrp_dbm = std::max(rec.measured_rsrp_dbm, p_dbm);
        rec.reserved = rec.reserved || tx.reserved;
      }
    }
    rec.rssi_dbm = watts_to_dbm(sum_w + noise_w);
    table[static_cast<std::size_t>(idx)] = rec;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw std::runtime_error("sense: missing resource row");
  return table;
}

/// Detail of one selection, for diagnostics and tests.
struct SpsSelectionInfo {
  double final_threshold_dbm = 0.0;
  std::vector<Resource> survivors;
  std::vector<Resource> best_three;
};

/// Three-step autonomous resource selection.
///
/// Step 1 excludes resources whose SCI was received (or which are reserved)
/// with measured RSRP above the threshold; the threshold is raised by 3 dB
/// until at least 20% of the window survives. Step 2 keeps the three
/// lowest-RSSI survivors (least occupied; ties broken by subframe then
/// channel). Step 3 picks one of those uniformly at random.
inline Resource sps_select(std::span<const SensingRecord> table,
                           double threshold_rsrp_dbm, SimRng& rng,
                           const ResourceDims& dims,
                           SpsSelectionInfo* info = nullptr) {
  dims.validate();
  if (static_cast<int>(table.size()) != dims.total())
    throw std::runtime_error("sps_select: incomplete sensing table");

  const int total = dims.total();
  double threshold = threshold_rsrp_dbm;
  std::vector<const SensingRecord*> survivors;
  for (;;) {
    survivors.clear();
    for (const SensingRecord& rec : table)
      if (!(rec.reserved && rec.measured_rsrp_dbm > threshold))
        survivors.push_back(&rec);
    if (5 * static_cast<int>(survivors.size()) >= total) break;
    threshold += 3.0;  // ratchet until enough candidates remain
  }

  std::sort(survivors.begin(), survivors.end(),
            [](const SensingRecord* a, const SensingRecord* b) {
              if (a->rssi_dbm != b->rssi_dbm) return a->rssi_dbm < b->rssi_dbm;
              if (a->resource.subframe != b->resource.subframe)
                return a->resource.subframe < b->resource.subframe;
              return a->resource.channel < b->resource.channel;
            });
  const std::size_t k = std::min<std::size_t>(3, survivors.size());
  const std::size_t pick = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));

  if (info) {
    info->final_threshold_dbm = threshold;
    info->survivors.clear();
    for (const SensingRecord* rec : survivors) info->survivors.push_back(rec->resource);
    info->best_three.clear();
    for (std::size_t i = 0; i < k; ++i)
      info->best_three.push_back(survivors[i]->resource);
  }
  return survivors[pick]->resource;
}

struct SpsConfig {
  int window_subframes = 8;
  int channels = 2;
  double threshold_rsrp_dbm = -110.0;
  double sensing_floor_dbm = -107.0;
  int counter_min = 5;
  int counter_max = 15;
  double keep_probability = 0.0;

  ResourceDims dims() const { return {window_subframes, channels}; }

  void validate() const {
    dims().validate();
    if (counter_min < 1 || counter_max < counter_min)
      throw std::runtime_error("sps: bad reselection counter range");
    if (keep_probability < 0.0 || keep_probability > 1.0)
      throw std::runtime_error("sps: keep_probability outside [0,1]");
  }
};

/// Per-vehicle scheduling state.
struct SpsState {
  std::optional<Resource> current_resource;
  int reselection_counter = 0;
  int period_subframes = 8;
};

/// Count down after a transmission. At zero the counter is redrawn uniformly
/// from [counter_min, counter_max]; with probability keep_probability the
/// current resource is retained anyway, otherwise reselection is signalled.
inline bool tick_sps(SpsState& state, SimRng& rng, const SpsConfig& cfg) {
  state.reselection_counter -= 1;
  if (state.reselection_counter > 0) return false;
  state.reselection_counter =
      static_cast<int>(rng.uniform_int(cfg.counter_min, cfg.counter_max));
  return !rng.bernoulli(cfg.keep_probability);
}

/// Half-duplex rule: a vehicle transmitting in a subframe cannot receive in it.
inline std::vector<int> half_duplex_filter(std::span<const int> all_vehicles,
                                           std::span<const int> transmitters) {
  std::vector<int> receivers;
  receivers.reserve(all_vehicles.size());
  for (int id : all_vehicles) {
    bool is_tx = false;
    for (int t : transmitters)
      if (t == id) {
        is_tx = true;
        break;
      }
    if (!is_tx) receivers.push_back(id);
  }
  return receivers;
}

}  // namespace cv2x
