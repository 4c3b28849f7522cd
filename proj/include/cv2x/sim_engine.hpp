#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cv2x/channel.hpp"
#include "cv2x/config.hpp"
#include "cv2x/geometry.hpp"
#include "cv2x/link_abstraction.hpp"
#include "cv2x/link_sample.hpp"
#include "cv2x/rng.hpp"
#include "cv2x/sps.hpp"

namespace cv2x {

/// Number of co-resource interferers within threshold_m of the receiver.
/// The boundary is inclusive: an interferer at exactly threshold_m counts.
inline int nsv_count(const Position2D& receiver,
                     std::span<const Position2D> co_resource_transmitters,
                     double threshold_m) {
  if (threshold_m <= 0) throw std::invalid_argument("nsv_count: threshold must be > 0");
  int n = 0;
  for (const Position2D& p : co_resource_transmitters)
    if (distance(receiver, p) <= threshold_m) ++n;
  return n;
}

/// Distance to the closest co-resource interferer, or sentinel_m (the RoI
/// diagonal) when the subframe carried none.
inline double main_interferer_distance(
    const Position2D& receiver,
    std::span<const Position2D> co_resource_transmitters, double sentinel_m) {
  double best = sentinel_m;
  for (const Position2D& p : co_resource_transmitters)
    best = std::min(best, distance(receiver, p));
  return best;
}

/// Per-node packet reception rate over a sample log: successes divided by
/// eligible receiver-packet pairs of that node's transmissions.
inline double compute_prr(std::span<const LinkSample> samples, int node) {
  long eligible = 0, successes = 0;
  for (const LinkSample& s : samples)
    if (s.tx_id == node) {
      ++eligible;
      if (s.received) ++successes;
    }
  if (eligible == 0)
    throw std::domain_error("compute_prr: node " + std::to_string(node) +
                            " never transmitted");
  return double(successes) / double(eligible);
}

struct PrrReport {
  std::map<int, double> per_node;
  double aggregate = 0.0;  // total successes / total eligible pairs
  double mean_per_node = 0.0;
  long total_samples = 0;

  nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [id, prr] : per_node) per[std::to_string(id)] = prr;
    return {{"per_node", per},
            {"aggregate", aggregate},
            {"mean_per_node", mean_per_node},
            {"total_samples", total_samples}};
  }
};

inline PrrReport make_prr_report(std::span<const LinkSample> samples) {
  PrrReport report;
  report.total_samples = long(samples.size());
  std::map<int, std::pair<long, long>> counts;  // node -> (eligible, successes)
  long all = 0, good = 0;
  for (const LinkSample& s : samples) {
    auto& c = counts[s.tx_id];
    ++c.first;
    if (s.received) ++c.second;
    ++all;
    if (s.received) ++good;
  }
  for (const auto& [id, c] : counts)
    report.per_node[id] = double(c.second) / double(c.first);
  report.aggregate = all > 0 ? double(good) / double(all) : 0.0;
  if (!report.per_node.empty()) {
    double sum = 0.0;
    for (const auto& [id, prr] : report.per_node) sum += prr;
    report.mean_per_node = sum / double(report.per_node.size());
  }
  return report;
}

/// Frozen context of the snapshot transmitter's last logged subframe; the
/// optimizer stage builds its receiver views and reception replays from it.
struct SnapshotContext {
  bool valid = false;
  long subframe = 0;
  int tx_id = 0;
  int tx_channel = 0;
  int n = 0;
  std::vector<Position2D> positions;  // index = vehicle id
  struct TxEntry {
    int id = 0;
    int channel = 0;
    double tx_power_dbm = 26.0;
  };
  std::vector<TxEntry> transmitters;  // includes tx_id
  std::vector<double> ch;             // fading amplitude, ch[tx * n + rx]

  double ch_at(int tx, int rx) const { return ch[size_t(tx) * n + rx]; }
};

/// Full context of one logged sample, for oracles that recompute the link
/// budget from scratch.
struct SampleDetail {
  LinkSample sample;
  Position2D tx_pos, rx_pos;
  double tx_power_dbm = 26.0;
  double signal_ch = 1.0;
  double signal_w = 0.0;
  double interference_w = 0.0;
  struct Interferer {
    int id = 0;
    Position2D pos;
    double tx_power_dbm = 26.0;
    double ch = 1.0;
    double rx_power_w = 0.0;
  };
  std::vector<Interferer> interferers;  // co-resource, any distance
};

using SampleObserver = std::function<void(const SampleDetail&)>;

struct RealizationResult {
  std::vector<LinkSample> samples;
  PrrReport prr;
  SnapshotContext snapshot;
  std::vector<Vehicle> final_vehicles;
};

namespace detail {

// Directed-pair fading with lazy per-subframe advancement.
class PairFading {
 public:
  PairFading() = default;
  explicit PairFading(std::uint64_t seed) : proc_(SimRng(seed)) {}

  double value_at(long subframe, double doppler_hz, double dt_s, double gamma) {
    if (last_subframe_ < 0) {
      last_subframe_ = subframe;
    } else if (subframe > last_subframe_) {
      const double span = double(subframe - last_subframe_) * dt_s;
      proc_->draw(doppler_hz, span, gamma);
      last_subframe_ = subframe;
    }
    return proc_->current().value;
  }

 private:
  std::optional<FadingProcess> proc_;
  long last_subframe_ = -1;
};

}  // namespace detail

/// Run one seeded network-level realization.
///
/// Time is divided into SPS periods of window_subframes. At each period
/// boundary every vehicle draws a packet arrival and, when flagged,
/// reselects its resource from the sensing table it accumulated over the
/// previous period (a transmitting vehicle hears nothing in its own
/// subframe, so those resources look silent to it). Within a subframe every
/// pending owner of the slot broadcasts; every other vehicle is a receiver,
/// with SINR summing co-channel transmitters only. One LinkSample is logged
/// per transmitter-receiver pair. Deterministic for a fixed seed.
inline RealizationResult run_realization(const ScenarioConfig& config,
                                         std::uint64_t seed,
                                         const SampleObserver& observer = {}) {
  config.validate();
  const RoadGrid grid = config.geometry.grid();
  const BoundaryPolicy policy = config.geometry.policy();
  const LinkAbstraction curve = config.abstraction.build();
  const ChannelParams& chp = config.channel;
  const ResourceDims dims = config.sps.dims();
  const int n = config.geometry.n_vehicles;
  const int period = config.sps.window_subframes;
  const double dt = config.sim.subframe_duration_s;
  const double sentinel = grid.diagonal();
  const double noise_w = chp.noise_watts();

  SimRng rng(derive_seed(seed, 0));
  std::vector<Vehicle> vehicles = drop_vehicles(
      grid, n, rng, config.geometry.v_min, config.geometry.v_max, config.tx_power_dbm);

  // one fading process per directed pair, seeded independently of use order
  std::vector<detail::PairFading> fading(size_t(n) * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b)
        fading[size_t(a) * n + b] =
            detail::PairFading(derive_seed(seed, 1 + std::uint64_t(a) * n + b));

  std::vector<SpsState> sps(n);
  for (auto& s : sps) s.period_subframes = period;
  std::vector<char> pending(n, 0);
  std::vector<char> needs_reselect(n, 1);
  std::vector<char> is_tx(n, 0);

  // per-vehicle, per-resource observations over the current period
  std::vector<std::vector<ResourceObservation>> heard(n);
  auto reset_heard = [&](int v) {
    heard[v].assign(dims.total(), {});
    for (int i = 0; i < dims.total(); ++i) heard[v][i].resource = dims.at(i);
  };
  for (int v = 0; v < n; ++v) reset_heard(v);

  RealizationResult result;
  result.samples.reserve(4096);
  result.snapshot.tx_id = config.sim.snapshot_tx_id;

  std::vector<int> transmitters;
  std::vector<double> power;  // power[ti * n + rx] for this subframe
  std::vector<double> chval;
  std::vector<Position2D> co_resource;

  for (long t = 0; t < config.sim.total_subframes; ++t) {
    const int slot = int(t % period);

    if (slot == 0) {
      // period boundary: arrivals and (re)selections, in vehicle order
      for (int v = 0; v < n; ++v) {
        pending[v] = rng.bernoulli(config.sim.arrival_rate) ? 1 : 0;
        SpsState& st = sps[v];
        if (needs_reselect[v] || !st.current_resource) {
          const auto table =
              sense(heard[v], dims, noise_w, config.sps.sensing_floor_dbm);
          st.current_resource =
              sps_select(table, config.sps.threshold_rsrp_dbm, rng, dims);
          if (st.reselection_counter <= 0)
            st.reselection_counter = int(
                rng.uniform_int(config.sps.counter_min, config.sps.counter_max));
          needs_reselect[v] = 0;
        }
        reset_heard(v);
      }
    }

    transmitters.clear();
    for (int v = 0; v < n; ++v) {
      is_tx[v] = pending[v] && sps[v].current_resource &&
                 sps[v].current_resource->subframe == slot;
      if (is_tx[v]) transmitters.push_back(v);
    }

    if (!transmitters.empty()) {
      const int tcount = int(transmitters.size());
      power.assign(size_t(tcount) * n, 0.0);
      chval.assign(size_t(tcount) * n, 0.0);
      for (int ti = 0; ti < tcount; ++ti) {
        const int tx = transmitters[ti];
        const Vehicle& a = vehicles[tx];
        for (int rx = 0; rx < n; ++rx) {
          if (rx == tx) continue;
          const Vehicle& b = vehicles[rx];
          const double d = distance(a.pos, b.pos);
          if (d <= 0.0) continue;  // co-located nodes cannot be separated
          const double dop = doppler(chp, relative_speed(a.vel, b.vel));
          const double ch =
              fading[size_t(tx) * n + rx].value_at(t, dop, dt, chp.coherence_gamma);
          power[size_t(ti) * n + rx] = rx_power(a.tx_power_dbm, pathloss(chp, d), {ch});
          chval[size_t(ti) * n + rx] = ch;
        }
      }

      // reception per (transmitter, eligible receiver)
      for (int ti = 0; ti < tcount; ++ti) {
        const int tx = transmitters[ti];
        const Vehicle& a = vehicles[tx];
        const int channel = sps[tx].current_resource->channel;
        for (int rx = 0; rx < n; ++rx) {
          if (rx == tx || is_tx[rx]) continue;  // half-duplex
          const Vehicle& b = vehicles[rx];
          const double d = distance(a.pos, b.pos);
          if (d <= 0.0) continue;
          if (config.sim.logging_range_m > 0.0 && d > config.sim.logging_range_m)
            continue;

          double interference = 0.0;
          co_resource.clear();
          SampleDetail detail;
          for (int oi = 0; oi < tcount; ++oi) {
            const int other = transmitters[oi];
            if (other == tx) continue;
            if (sps[other].current_resource->channel != channel) continue;
            interference += power[size_t(oi) * n + rx];
            co_resource.push_back(vehicles[other].pos);
            if (observer)
              detail.interferers.push_back({other, vehicles[other].pos,
                                            vehicles[other].tx_power_dbm,
                                            chval[size_t(oi) * n + rx],
                                            power[size_t(oi) * n + rx]});
          }

          const double signal = power[size_t(ti) * n + rx];
          const double s_db = sinr_db(signal, interference, chp);
          const double p = curve.success_probability(s_db);

          LinkSample sample;
          sample.tx_id = tx;
          sample.rx_id = rx;
          sample.subframe = t;
          sample.signal_distance_m = d;
          sample.main_interferer_distance_m =
              main_interferer_distance(b.pos, co_resource, sentinel);
          sample.nsv = nsv_count(b.pos, co_resource, config.sim.nsv_threshold_m);
          sample.sinr_db = s_db;
          sample.p_success = p;
          sample.received = rng.bernoulli(p);
          result.samples.push_back(sample);

          if (observer) {
            detail.sample = sample;
            detail.tx_pos = a.pos;
            detail.rx_pos = b.pos;
            detail.tx_power_dbm = a.tx_power_dbm;
            detail.signal_ch = chval[size_t(ti) * n + rx];
            detail.signal_w = signal;
            detail.interference_w = interference;
            observer(detail);
          }
        }
      }

      // sensing: every non-transmitting vehicle overhears this subframe
      for (int v = 0; v < n; ++v) {
        if (is_tx[v]) continue;
        for (int ti = 0; ti < tcount; ++ti) {
          const Resource res = *sps[transmitters[ti]].current_resource;
          heard[v][dims.index(res)].transmissions.push_back(
              {power[size_t(ti) * n + v], true});
        }
      }

      // frozen context of the designated transmitter's latest subframe
      if (is_tx[config.sim.snapshot_tx_id]) {
        SnapshotContext& snap = result.snapshot;
        snap.valid = true;
        snap.subframe = t;
        snap.tx_id = config.sim.snapshot_tx_id;
        snap.tx_channel = sps[snap.tx_id].current_resource->channel;
        snap.n = n;
        snap.positions.resize(n);
        for (int v = 0; v < n; ++v) snap.positions[v] = vehicles[v].pos;
        snap.transmitters.clear();
        for (int tx : transmitters)
          snap.transmitters.push_back({tx, sps[tx].current_resource->channel,
                                       vehicles[tx].tx_power_dbm});
        snap.ch.assign(size_t(n) * n, 0.0);
        for (int ti = 0; ti < tcount; ++ti)
          for (int rx = 0; rx < n; ++rx)
            snap.ch[size_t(transmitters[ti]) * n + rx] = chval[size_t(ti) * n + rx];
      }

      // reselection counters tick once per transmission
      for (int tx : transmitters) {
        pending[tx] = 0;
        if (tick_sps(sps[tx], rng, config.sps)) needs_reselect[tx] = 1;
      }
    }

    advance(grid, vehicles, dt, rng, policy);
  }

  result.prr = make_prr_report(result.samples);
  result.final_vehicles = vehicles;
  return result;
}

}  // namespace cv2x
