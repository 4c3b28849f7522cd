#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cv2x/channel.hpp"
#include "cv2x/rng.hpp"
#include "cv2x/sps.hpp"

using namespace cv2x;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<ResourceObservation> empty_window(const ResourceDims& dims) {
  std::vector<ResourceObservation> obs(dims.total());
  for (int i = 0; i < dims.total(); ++i) obs[i].resource = dims.at(i);
  return obs;
}

// Reference reimplementation of the selection rule for property checks:
// ratchet the threshold until at least 20% survive, then sort survivors by
// (rssi, subframe, channel) and return them.
std::vector<SensingRecord> oracle_survivors(const std::vector<SensingRecord>& table,
                                            double threshold) {
  const int total = int(table.size());
  std::vector<SensingRecord> out;
  for (;;) {
    out.clear();
    for (const SensingRecord& r : table)
      if (!(r.reserved && r.measured_rsrp_dbm > threshold)) out.push_back(r);
    if (5 * int(out.size()) >= total) break;
    threshold += 3.0;
  }
  std::sort(out.begin(), out.end(), [](const SensingRecord& a, const SensingRecord& b) {
    if (a.rssi_dbm != b.rssi_dbm) return a.rssi_dbm < b.rssi_dbm;
    if (a.resource.subframe != b.resource.subframe)
      return a.resource.subframe < b.resource.subframe;
    return a.resource.channel < b.resource.channel;
  });
  return out;
}

}  // namespace

TEST_CASE("sense on a silent window") {
  const ResourceDims dims;  // 8 x 2
  const double noise_w = dbm_to_watts(-103.45);
  const auto table = sense(empty_window(dims), dims, noise_w, -107.0);
  REQUIRE(int(table.size()) == dims.total());
  for (const SensingRecord& rec : table) {
    CHECK(rec.measured_rsrp_dbm == -kInf);
    CHECK(rec.rssi_dbm == Catch::Approx(-103.45).epsilon(1e-12));
    CHECK_FALSE(rec.reserved);
  }
}

TEST_CASE("sense aggregates power per resource") {
  const ResourceDims dims;
  const double noise_w = dbm_to_watts(-103.45);
  auto obs = empty_window(dims);

  const double w1 = dbm_to_watts(-90.0);
  const double w2 = dbm_to_watts(-95.0);
  obs[dims.index({3, 1})].transmissions = {{w1, true}};
  obs[dims.index({5, 0})].transmissions = {{w1, true}, {w2, true}};
  obs[dims.index({6, 0})].transmissions = {{dbm_to_watts(-120.0), true}};

  const auto table = sense(obs, dims, noise_w, -107.0);

  CHECK(table[dims.index({3, 1})].measured_rsrp_dbm == Catch::Approx(-90.0).epsilon(1e-12));
  CHECK(table[dims.index({3, 1})].reserved);

  // rssi adds in the linear domain
  const SensingRecord& both = table[dims.index({5, 0})];
  CHECK(both.measured_rsrp_dbm == Catch::Approx(-90.0).epsilon(1e-12));
  CHECK(both.rssi_dbm == Catch::Approx(watts_to_dbm(w1 + w2 + noise_w)).epsilon(1e-12));

  // below the sensing floor: energy counts, the SCI does not decode
  const SensingRecord& faint = table[dims.index({6, 0})];
  CHECK(faint.measured_rsrp_dbm == -kInf);
  CHECK_FALSE(faint.reserved);
  CHECK(faint.rssi_dbm > -103.45);
}

TEST_CASE("sense rejects incomplete windows") {
  const ResourceDims dims;
  auto obs = empty_window(dims);
  obs.pop_back();
  CHECK_THROWS_WITH(sense(obs, dims, 1e-14, -107.0),
                    Catch::Matchers::ContainsSubstring("missing"));

  auto dup = empty_window(dims);
  dup[1].resource = dup[0].resource;
  CHECK_THROWS_WITH(sense(dup, dims, 1e-14, -107.0),
                    Catch::Matchers::ContainsSubstring("duplicate"));

  auto oob = empty_window(dims);
  oob[0].resource = {9, 0};
  CHECK_THROWS(sense(oob, dims, 1e-14, -107.0));
}

TEST_CASE("selection on a silent window picks among the stable lowest three") {
  const ResourceDims dims;
  const auto table = sense(empty_window(dims), dims, dbm_to_watts(-103.45), -107.0);
  SimRng rng(11);
  SpsSelectionInfo info;
  const Resource r = sps_select(table, -110.0, rng, dims, &info);
  CHECK(info.survivors.size() == 16);
  REQUIRE(info.best_three.size() == 3);
  // equal rssi everywhere: tie-break by subframe then channel
  CHECK(info.best_three[0] == Resource{0, 0});
  CHECK(info.best_three[1] == Resource{0, 1});
  CHECK(info.best_three[2] == Resource{1, 0});
  CHECK((r == info.best_three[0] || r == info.best_three[1] || r == info.best_three[2]));
}

TEST_CASE("selection ratchets the threshold until enough survive") {
  const ResourceDims dims;  // 16 resources, needs >= 4 survivors
  const double noise_w = dbm_to_watts(-103.45);
  auto obs = empty_window(dims);
  // 12 strong reservations, 2 weak ones that fall below threshold + 3 dB
  for (int i = 0; i < 12; ++i)
    obs[i].transmissions = {{dbm_to_watts(-100.0), true}};
  obs[12].transmissions = {{dbm_to_watts(-108.0), true}};
  obs[13].transmissions = {{dbm_to_watts(-108.5), true}};

  const auto table = sense(obs, dims, noise_w, -115.0);
  SimRng rng(3);
  SpsSelectionInfo info;
  const Resource r = sps_select(table, -110.0, rng, dims, &info);

  // first pass leaves 2 of 16, one +3 dB step admits the two weak rows
  CHECK(info.final_threshold_dbm == Catch::Approx(-107.0));
  CHECK(info.survivors.size() == 4);
  REQUIRE(info.best_three.size() == 3);
  const auto& b = info.best_three;
  CHECK(std::find(b.begin(), b.end(), r) != b.end());
  // the silent resources have the lowest rssi
  CHECK(b[0] == Resource{7, 0});
  CHECK(b[1] == Resource{7, 1});
}

TEST_CASE("selection is uniform over a three-survivor set") {
  const ResourceDims dims{5, 3};  // 15 resources: exactly 3 survivors allowed
  const double noise_w = dbm_to_watts(-103.45);
  auto obs = empty_window(dims);
  for (int i = 0; i < 12; ++i)
    obs[i].transmissions = {{dbm_to_watts(-80.0), true}};
  const auto table = sense(obs, dims, noise_w, -107.0);

  SimRng rng(12345);
  long counts[3] = {0, 0, 0};
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    SpsSelectionInfo info;
    const Resource r = sps_select(table, -110.0, rng, dims, &info);
    REQUIRE(info.survivors.size() == 3);
    for (int k = 0; k < 3; ++k)
      if (r == info.best_three[k]) ++counts[k];
  }
  CHECK(counts[0] + counts[1] + counts[2] == trials);
  const double expected = trials / 3.0;
  double chi2 = 0.0;
  for (long c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 9.21);  // df=2, p=0.01
}

TEST_CASE("selection properties over randomized tables") {
  const ResourceDims dims;
  SimRng rng(777);
  const int need = (dims.total() + 4) / 5;  // ceil(20%)
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<SensingRecord> table(dims.total());
    for (int i = 0; i < dims.total(); ++i) {
      table[i].resource = dims.at(i);
      table[i].measured_rsrp_dbm =
          rng.bernoulli(0.3) ? -kInf : rng.uniform(-130.0, -80.0);
      table[i].rssi_dbm = rng.uniform(-104.0, -60.0);
      table[i].reserved = rng.bernoulli(0.6) && table[i].measured_rsrp_dbm > -kInf;
    }
    const double threshold = rng.uniform(-120.0, -95.0);
    SpsSelectionInfo info;
    const Resource r = sps_select(table, threshold, rng, dims, &info);

    const auto survivors = oracle_survivors(table, threshold);
    REQUIRE(int(survivors.size()) >= need);
    REQUIRE(survivors.size() == info.survivors.size());

    // never an excluded resource
    bool in_survivors = false;
    for (const SensingRecord& s : survivors)
      if (s.resource == r) in_survivors = true;
    REQUIRE(in_survivors);

    // always among the three lowest-rssi survivors
    bool in_three = false;
    for (std::size_t k = 0; k < std::min<std::size_t>(3, survivors.size()); ++k)
      if (survivors[k].resource == r) in_three = true;
    REQUIRE(in_three);
  }
}

TEST_CASE("reselection counter") {
  SpsConfig cfg;
  SimRng rng(10);

  SpsState st;
  st.reselection_counter = 5;
  CHECK_FALSE(tick_sps(st, rng, cfg));
  CHECK(st.reselection_counter == 4);

  st.reselection_counter = 1;
  CHECK(tick_sps(st, rng, cfg));
  CHECK(st.reselection_counter >= 5);
  CHECK(st.reselection_counter <= 15);

  // redraw is uniform over [5, 15]
  long hist[16] = {0};
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    st.reselection_counter = 1;
    CHECK(tick_sps(st, rng, cfg));
    REQUIRE(st.reselection_counter >= 5);
    REQUIRE(st.reselection_counter <= 15);
    ++hist[st.reselection_counter];
  }
  const double expected = trials / 11.0;
  double chi2 = 0.0;
  for (int v = 5; v <= 15; ++v)
    chi2 += (hist[v] - expected) * (hist[v] - expected) / expected;
  CHECK(chi2 < 23.21);  // df=10, p=0.01

  // keep-probability 1 never signals reselection
  SpsConfig keep = cfg;
  keep.keep_probability = 1.0;
  st.reselection_counter = 1;
  CHECK_FALSE(tick_sps(st, rng, keep));
  CHECK(st.reselection_counter >= 5);
}

TEST_CASE("half duplex filter") {
  std::vector<int> all(21);
  for (int i = 0; i < 21; ++i) all[i] = i;

  CHECK(half_duplex_filter(all, {}).size() == 21);
  CHECK(half_duplex_filter(all, all).empty());

  const std::vector<int> tx = {2, 7, 19};
  const auto rx = half_duplex_filter(all, tx);
  CHECK(rx.size() == 18);
  for (int t : tx)
    CHECK(std::find(rx.begin(), rx.end(), t) == rx.end());
}
