#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "cv2x/link_sample.hpp"
#include "cv2x/sim_engine.hpp"

using namespace cv2x;

namespace {

// small scenario that still exercises contention
ScenarioConfig small_config(int vehicles, long subframes) {
  ScenarioConfig c;
  c.geometry.n_vehicles = vehicles;
  c.sim.total_subframes = subframes;
  c.sim.logging_range_m = 0.0;  // log everything: simpler invariants
  c.sim.snapshot_tx_id = 0;
  return c;
}

}  // namespace

TEST_CASE("nsv_count uses an inclusive threshold") {
  const Position2D rx{0, 0};
  CHECK(nsv_count(rx, {}, 200.0) == 0);

  const std::vector<Position2D> one = {{150.0, 0.0}};
  CHECK(nsv_count(rx, one, 200.0) == 1);

  const std::vector<Position2D> three = {{100.0, 0.0}, {199.9, 0.0}, {200.1, 0.0}};
  CHECK(nsv_count(rx, three, 200.0) == 2);

  const std::vector<Position2D> edge = {{200.0, 0.0}};
  CHECK(nsv_count(rx, edge, 200.0) == 1);

  CHECK_THROWS_AS(nsv_count(rx, one, 0.0), std::invalid_argument);
}

TEST_CASE("main interferer distance") {
  const Position2D rx{0, 0};
  const double sentinel = 450.0 * std::sqrt(2.0);

  CHECK(main_interferer_distance(rx, {}, sentinel) == Catch::Approx(636.396).margin(0.001));

  const std::vector<Position2D> two = {{50.0, 0.0}, {0.0, 120.0}};
  CHECK(main_interferer_distance(rx, two, sentinel) == Catch::Approx(50.0));

  const std::vector<Position2D> one = {{0.0, 77.0}};
  CHECK(main_interferer_distance(rx, one, sentinel) == Catch::Approx(77.0));
}

TEST_CASE("compute_prr definition") {
  std::vector<LinkSample> log;
  for (int i = 0; i < 10; ++i) {
    LinkSample s;
    s.tx_id = 3;
    s.rx_id = 10 + i;
    s.received = i < 7;
    log.push_back(s);
  }
  CHECK(compute_prr(log, 3) == Catch::Approx(0.7));

  for (auto& s : log) s.received = true;
  CHECK(compute_prr(log, 3) == Catch::Approx(1.0));

  CHECK_THROWS_AS(compute_prr(log, 4), std::domain_error);
}

TEST_CASE("prr report matches a brute-force replay") {
  const ScenarioConfig config = small_config(8, 256);
  const RealizationResult r = run_realization(config, 99);
  REQUIRE(!r.samples.empty());

  std::map<int, std::pair<long, long>> counts;
  for (const LinkSample& s : r.samples) {
    counts[s.tx_id].first++;
    if (s.received) counts[s.tx_id].second++;
  }
  long all = 0, good = 0;
  for (const auto& [node, c] : counts) {
    all += c.first;
    good += c.second;
    CHECK(r.prr.per_node.at(node) == Catch::Approx(double(c.second) / c.first));
    CHECK(compute_prr(r.samples, node) == Catch::Approx(double(c.second) / c.first));
  }
  CHECK(r.prr.aggregate == Catch::Approx(double(good) / all));
}

TEST_CASE("a lone transmitter sees no interference") {
  // two vehicles: whoever transmits, the other is the only receiver
  ScenarioConfig config = small_config(2, 64);
  const double sentinel = config.geometry.grid().diagonal();

  std::vector<SampleDetail> details;
  const RealizationResult r =
      run_realization(config, 5, [&](const SampleDetail& d) { details.push_back(d); });

  bool lone_seen = false;
  for (const SampleDetail& d : details) {
    if (!d.interferers.empty()) continue;  // both picked the same subframe
    lone_seen = true;
    CHECK(d.sample.nsv == 0);
    CHECK(d.interference_w == 0.0);
    CHECK(d.sample.main_interferer_distance_m == Catch::Approx(sentinel));
    // noise-limited sinr
    const ChannelParams& chp = config.channel;
    CHECK(d.sample.sinr_db ==
          Catch::Approx(to_db(d.signal_w / chp.noise_watts())).margin(1e-9));
  }
  CHECK(lone_seen);
}

TEST_CASE("co-resource transmitters appear as each other's interference") {
  // single-resource window forces every pending transmitter onto the same
  // subframe and channel
  ScenarioConfig config = small_config(4, 128);
  config.sps.window_subframes = 1;
  config.sps.channels = 1;
  config.sim.arrival_rate = 0.5;

  std::vector<SampleDetail> details;
  const RealizationResult r =
      run_realization(config, 21, [&](const SampleDetail& d) { details.push_back(d); });

  bool contended = false;
  for (const SampleDetail& d : details) {
    if (d.interferers.empty()) continue;
    contended = true;
    CHECK(d.interference_w > 0.0);
    double sum = 0.0;
    for (const auto& i : d.interferers) sum += i.rx_power_w;
    CHECK(d.interference_w == Catch::Approx(sum).epsilon(1e-12));
  }
  CHECK(contended);
}

TEST_CASE("logged sinr reproduces from positions and the interferer roster") {
  ScenarioConfig config = small_config(7, 256);
  const ChannelParams& chp = config.channel;
  const LinkAbstraction curve = config.abstraction.build();
  const double sentinel = config.geometry.grid().diagonal();

  long checked = 0;
  run_realization(config, 1234, [&](const SampleDetail& d) {
    const double dist = distance(d.tx_pos, d.rx_pos);
    CHECK(dist == Catch::Approx(d.sample.signal_distance_m).margin(0));

    const double signal =
        rx_power(d.tx_power_dbm, pathloss(chp, dist), {d.signal_ch});
    double interference = 0.0;
    std::vector<Position2D> roster;
    for (const auto& i : d.interferers) {
      interference +=
          rx_power(i.tx_power_dbm, pathloss(chp, distance(i.pos, d.rx_pos)), {i.ch});
      roster.push_back(i.pos);
    }
    const double s_db = sinr_db(signal, interference, chp);
    REQUIRE(std::abs(s_db - d.sample.sinr_db) < 1e-9);
    CHECK(d.sample.p_success == Catch::Approx(curve.success_probability(s_db)).margin(1e-12));
    CHECK(d.sample.nsv ==
          nsv_count(d.rx_pos, roster, config.sim.nsv_threshold_m));
    CHECK(d.sample.main_interferer_distance_m ==
          Catch::Approx(main_interferer_distance(d.rx_pos, roster, sentinel)).margin(0));
    ++checked;
  });
  CHECK(checked > 1000);
}

TEST_CASE("transmitters never receive in their own subframe") {
  const ScenarioConfig config = small_config(8, 256);
  const RealizationResult r = run_realization(config, 77);

  std::map<long, std::set<int>> tx_by_subframe, rx_by_subframe;
  for (const LinkSample& s : r.samples) {
    CHECK(s.tx_id != s.rx_id);
    tx_by_subframe[s.subframe].insert(s.tx_id);
    rx_by_subframe[s.subframe].insert(s.rx_id);
  }
  for (const auto& [t, txs] : tx_by_subframe)
    for (int tx : txs) CHECK(rx_by_subframe[t].count(tx) == 0);

  // every transmitter reaches every non-transmitter when logging is unbounded
  for (const auto& [t, txs] : tx_by_subframe)
    CHECK(rx_by_subframe[t].size() == 8 - txs.size());
}

TEST_CASE("equal seeds give byte-identical logs") {
  const ScenarioConfig config = small_config(6, 192);
  const RealizationResult a = run_realization(config, 2468);
  const RealizationResult b = run_realization(config, 2468);
  const RealizationResult c = run_realization(config, 2469);
  CHECK(to_csv(a.samples) == to_csv(b.samples));
  CHECK(to_csv(a.samples) != to_csv(c.samples));
}

TEST_CASE("logging range restricts receivers") {
  ScenarioConfig config = small_config(10, 256);
  config.sim.logging_range_m = 150.0;
  const RealizationResult r = run_realization(config, 31);
  REQUIRE(!r.samples.empty());
  for (const LinkSample& s : r.samples) CHECK(s.signal_distance_m <= 150.0);
}

TEST_CASE("snapshot context is consistent with its subframe") {
  ScenarioConfig config = small_config(8, 256);
  const RealizationResult r = run_realization(config, 404);
  REQUIRE(r.snapshot.valid);
  CHECK(r.snapshot.tx_id == 0);
  CHECK(int(r.snapshot.positions.size()) == 8);

  bool tx_listed = false;
  for (const auto& te : r.snapshot.transmitters)
    if (te.id == 0) tx_listed = true;
  CHECK(tx_listed);

  // the snapshot subframe's samples agree with the stored fading values
  const ChannelParams& chp = config.channel;
  for (const LinkSample& s : r.samples) {
    if (s.subframe != r.snapshot.subframe || s.tx_id != 0) continue;
    const double d = distance(r.snapshot.positions[0], r.snapshot.positions[s.rx_id]);
    CHECK(d == Catch::Approx(s.signal_distance_m).margin(0));
    const double signal =
        rx_power(26.0, pathloss(chp, d), {r.snapshot.ch_at(0, s.rx_id)});
    double interference = 0.0;
    for (const auto& te : r.snapshot.transmitters) {
      if (te.id == 0 || te.channel != r.snapshot.tx_channel) continue;
      interference += rx_power(
          te.tx_power_dbm,
          pathloss(chp, distance(r.snapshot.positions[te.id], r.snapshot.positions[s.rx_id])),
          {r.snapshot.ch_at(te.id, s.rx_id)});
    }
    CHECK(sinr_db(signal, interference, chp) == Catch::Approx(s.sinr_db).margin(1e-9));
  }
}

TEST_CASE("sample log csv round trip") {
  const ScenarioConfig config = small_config(5, 96);
  const RealizationResult r = run_realization(config, 9);
  const std::string text = to_csv(r.samples);
  const auto back = samples_from_csv_text(text);
  REQUIRE(back.size() == r.samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].tx_id == r.samples[i].tx_id);
    CHECK(back[i].rx_id == r.samples[i].rx_id);
    CHECK(back[i].subframe == r.samples[i].subframe);
    CHECK(back[i].signal_distance_m == r.samples[i].signal_distance_m);
    CHECK(back[i].main_interferer_distance_m == r.samples[i].main_interferer_distance_m);
    CHECK(back[i].nsv == r.samples[i].nsv);
    CHECK(back[i].sinr_db == r.samples[i].sinr_db);
    CHECK(back[i].p_success == r.samples[i].p_success);
    CHECK(back[i].received == r.samples[i].received);
  }
  CHECK_THROWS(samples_from_csv_text("a,b\n1,2\n"));
}

TEST_CASE("config json round trip and validation") {
  ScenarioConfig c;
  c.seed = 99;
  c.geometry.n_vehicles = 13;
  c.sps.threshold_rsrp_dbm = -104.0;
  c.gbmu.step_size = 2.5;
  const ScenarioConfig back = ScenarioConfig::from_json(c.to_json());
  CHECK(back.seed == 99);
  CHECK(back.geometry.n_vehicles == 13);
  CHECK(back.sps.threshold_rsrp_dbm == -104.0);
  CHECK(back.gbmu.step_size == 2.5);

  nlohmann::json bad = c.to_json();
  bad["geometry"]["n_vehicless"] = 3;
  CHECK_THROWS_WITH(ScenarioConfig::from_json(bad),
                    Catch::Matchers::ContainsSubstring("n_vehicless"));

  nlohmann::json zero = c.to_json();
  zero["sim"]["total_subframes"] = 0;
  CHECK_THROWS(ScenarioConfig::from_json(zero));
}
