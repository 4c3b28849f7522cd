#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cv2x/gbmu.hpp"
#include "cv2x/regression.hpp"
#include "cv2x/sim_engine.hpp"

namespace cv2x {

/// Optimizer input: the transmitter position plus one-hop views of every
/// receiver, lifted out of a frozen realization subframe.
struct OptimizerSnapshot {
  int tx_id = 0;
  long subframe = 0;
  Position2D tx_pos;
  std::vector<ReceiverView> receivers;

  nlohmann::json to_json() const {
    nlohmann::json rx = nlohmann::json::array();
    for (const ReceiverView& r : receivers)
      rx.push_back({{"id", r.id},
                    {"pos", {{"x", r.pos.x}, {"y", r.pos.y}}},
                    {"nsv", r.nsv},
                    {"main_interferer_pos",
                     {{"x", r.main_interferer_pos.x}, {"y", r.main_interferer_pos.y}}}});
    return {{"tx_id", tx_id},
            {"subframe", subframe},
            {"tx_pos", {{"x", tx_pos.x}, {"y", tx_pos.y}}},
            {"receivers", rx}};
  }

  static OptimizerSnapshot from_json(const nlohmann::json& j) {
    OptimizerSnapshot s;
    s.tx_id = j.at("tx_id").get<int>();
    s.subframe = j.at("subframe").get<long>();
    s.tx_pos = {j.at("tx_pos").at("x").get<double>(), j.at("tx_pos").at("y").get<double>()};
    for (const auto& r : j.at("receivers")) {
      ReceiverView v;
      v.id = r.at("id").get<int>();
      v.pos = {r.at("pos").at("x").get<double>(), r.at("pos").at("y").get<double>()};
      v.nsv = r.at("nsv").get<int>();
      v.main_interferer_pos = {r.at("main_interferer_pos").at("x").get<double>(),
                               r.at("main_interferer_pos").at("y").get<double>()};
      s.receivers.push_back(v);
    }
    return s;
  }
};

/// Build receiver views from a frozen subframe: for each non-transmitting
/// vehicle, its NSV (co-channel interferers within threshold) and its main
/// interferer position. A receiver without any co-channel interferer gets a
/// virtual one at the sentinel distance so l stays finite.
inline OptimizerSnapshot build_receiver_views(const SnapshotContext& ctx,
                                              double nsv_threshold_m,
                                              double sentinel_m) {
  if (!ctx.valid)
    throw std::runtime_error(
        "snapshot: designated transmitter never transmitted; increase "
        "total_subframes or arrival_rate");
  OptimizerSnapshot snap;
  snap.tx_id = ctx.tx_id;
  snap.subframe = ctx.subframe;
  snap.tx_pos = ctx.positions[ctx.tx_id];

  std::vector<char> is_tx(ctx.n, 0);
  std::vector<Position2D> co_channel;
  for (const auto& te : ctx.transmitters) {
    is_tx[te.id] = 1;
    if (te.id != ctx.tx_id && te.channel == ctx.tx_channel)
      co_channel.push_back(ctx.positions[te.id]);
  }

  for (int v = 0; v < ctx.n; ++v) {
    if (is_tx[v]) continue;
    ReceiverView view;
    view.id = v;
    view.pos = ctx.positions[v];
    view.nsv = nsv_count(view.pos, co_channel, nsv_threshold_m);
    if (co_channel.empty()) {
      view.main_interferer_pos = {view.pos.x + sentinel_m, view.pos.y};
    } else {
      double best = std::numeric_limits<double>::infinity();
      for (const Position2D& p : co_channel) {
        const double d = distance(view.pos, p);
        if (d < best) {
          best = d;
          view.main_interferer_pos = p;
        }
      }
    }
    snap.receivers.push_back(view);
  }
  return snap;
}

/// Replay the snapshot subframe's reception with the designated transmitter
/// at tx_pos. Resource allocation, interferer positions, fading draws and
/// the per-receiver uniforms are all held fixed, so the position is the only
/// varying factor between two calls.
inline double replay_prr(const SnapshotContext& ctx, const ChannelParams& chp,
                         const LinkAbstraction& curve, const Position2D& tx_pos,
                         std::span<const double> uniforms) {
  if (!ctx.valid) throw std::runtime_error("replay_prr: invalid snapshot");
  double tx_power_dbm = 26.0;
  for (const auto& te : ctx.transmitters)
    if (te.id == ctx.tx_id) tx_power_dbm = te.tx_power_dbm;

  std::vector<char> is_tx(ctx.n, 0);
  for (const auto& te : ctx.transmitters) is_tx[te.id] = 1;

  long received = 0, eligible = 0;
  std::size_t ui = 0;
  for (int rx = 0; rx < ctx.n; ++rx) {
    if (is_tx[rx]) continue;
    const double d =
        std::max(distance(tx_pos, ctx.positions[rx]), kCoLocationGuardM);
    const double signal =
        rx_power(tx_power_dbm, pathloss(chp, d), {ctx.ch_at(ctx.tx_id, rx)});
    double interference = 0.0;
    for (const auto& te : ctx.transmitters) {
      if (te.id == ctx.tx_id || te.channel != ctx.tx_channel) continue;
      const double di = distance(ctx.positions[te.id], ctx.positions[rx]);
      if (di <= 0.0) continue;
      interference += rx_power(te.tx_power_dbm, pathloss(chp, di), {ctx.ch_at(te.id, rx)});
    }
    const double p = curve.success_probability(sinr_db(signal, interference, chp));
    if (ui >= uniforms.size())
      throw std::invalid_argument("replay_prr: not enough uniform draws");
    if (uniforms[ui++] < p) ++received;
    ++eligible;
  }
  if (eligible == 0) throw std::runtime_error("replay_prr: no receivers");
  return double(received) / double(eligible);
}

struct RealizationOutcome {
  std::uint64_t seed = 0;
  double utility_gain = 0.0;
  bool converged = false;
  long iterations = 0;
  double prr_before = 0.0;
  double prr_after = 0.0;
  int receivers = 0;
  Position2D pos_before, pos_after;
};

struct BatchReport {
  std::vector<RealizationOutcome> realizations;
  double mean_utility_gain = 0.0;
  double mean_prr_gain = 0.0;
  double effectiveness_rate = 0.0;  // fraction with positive utility gain

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const RealizationOutcome& r : realizations)
      rows.push_back({{"seed", r.seed},
                      {"utility_gain", r.utility_gain},
                      {"converged", r.converged},
                      {"iterations", r.iterations},
                      {"prr_before", r.prr_before},
                      {"prr_after", r.prr_after},
                      {"receivers", r.receivers},
                      {"pos_before", {{"x", r.pos_before.x}, {"y", r.pos_before.y}}},
                      {"pos_after", {{"x", r.pos_after.x}, {"y", r.pos_after.y}}}});
    return {{"realizations", rows},
            {"aggregates",
             {{"mean_utility_gain", mean_utility_gain},
              {"mean_prr_gain", mean_prr_gain},
              {"effectiveness_rate", effectiveness_rate},
              {"n_realizations", realizations.size()}}}};
  }
};

/// Thread cap for batch runs: CV2X_SIM_THREADS when set, else hardware
/// concurrency.
inline int batch_thread_cap() {
  if (const char* env = std::getenv("CV2X_SIM_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

/// One realization end to end: simulate, snapshot, optimize, replay.
inline RealizationOutcome run_batch_realization(const ScenarioConfig& config,
                                                const CoefficientTable& table,
                                                std::uint64_t seed) {
  RealizationOutcome out;
  out.seed = seed;

  const RealizationResult sim = run_realization(config, seed);
  const double sentinel = config.geometry.grid().diagonal();
  const OptimizerSnapshot snap =
      build_receiver_views(sim.snapshot, config.gbmu.interferer_threshold_m, sentinel);
  out.receivers = int(snap.receivers.size());
  out.pos_before = snap.tx_pos;

  const RoadGrid grid = config.geometry.grid();
  const GbmuResult opt =
      run_gbmu(snap.tx_pos, snap.receivers, table, config.gbmu, &grid);
  out.converged = opt.converged;
  out.iterations = opt.iterations;
  out.pos_after = opt.final_pos;
  // a start with every predicted probability at the ceiling has U(0) = 0;
  // its gain is recorded as 0 (cannot improve)
  out.utility_gain =
      opt.trace.front().utility == 0.0 ? 0.0 : utility_gain(opt.trace);

  SimRng urng(derive_seed(seed, 0xC0FFEE));
  std::vector<double> uniforms(snap.receivers.size());
  for (double& u : uniforms) u = urng.uniform01();
  const LinkAbstraction curve = config.abstraction.build();
  out.prr_before = replay_prr(sim.snapshot, config.channel, curve, out.pos_before, uniforms);
  out.prr_after = replay_prr(sim.snapshot, config.channel, curve, out.pos_after, uniforms);
  return out;
}

/// Run independent seeded realizations (parallel, associative merge) and
/// aggregate gains. Results are independent of the worker count.
inline BatchReport run_batch(const ScenarioConfig& config,
                             const CoefficientTable& table,
                             std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("run_batch: need >= 1 seed");
  BatchReport report;
  report.realizations.resize(seeds.size());

  const int workers =
      std::max(1, std::min<int>(batch_thread_cap(), int(seeds.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(seeds.size());
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      try {
        report.realizations[i] = run_batch_realization(config, table, seeds[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < seeds.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error("run_batch: realization " + std::to_string(i) +
                               " failed: " + errors[i]);

  double gain_sum = 0.0, prr_sum = 0.0;
  long positive = 0;
  for (const RealizationOutcome& r : report.realizations) {
    gain_sum += r.utility_gain;
    prr_sum += r.prr_after - r.prr_before;
    if (r.utility_gain > 0.0) ++positive;
  }
  const double m = double(report.realizations.size());
  report.mean_utility_gain = gain_sum / m;
  report.mean_prr_gain = prr_sum / m;
  report.effectiveness_rate = double(positive) / m;
  return report;
}

/// Deterministic per-realization seeds from a base seed.
inline std::vector<std::uint64_t> batch_seeds(std::uint64_t base, int n) {
  std::vector<std::uint64_t> seeds(n);
  for (int i = 0; i < n; ++i) seeds[i] = derive_seed(base, 0xBA7C4 + std::uint64_t(i));
  return seeds;
}

}  // namespace cv2x
