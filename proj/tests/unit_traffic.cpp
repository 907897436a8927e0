#include <set>
#include <sstream>

#include "doctest.h"
#include "dte/traffic.hpp"
#include "test_support.hpp"

using namespace dte;

TEST_CASE("demand vectors follow the +d/-d convention") {
  Vec b1 = demand_vector({0, 3, 4.0}, 4);
  CHECK(b1[0] == 4.0);
  CHECK(b1[3] == -4.0);
  CHECK(b1.sum() == 0.0);

  Vec b2 = demand_vector({1, 3, 2.0}, 4);
  CHECK(b2[1] == 2.0);
  CHECK(b2[3] == -2.0);
  CHECK(b2.sum() == 0.0);

  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    int m = 3 + int(rng() % 20);
    Commodity c{int(rng() % m), 0, 1.0 + double(rng() % 7)};
    c.dst = (c.src + 1 + int(rng() % (m - 1))) % m;
    Vec b = demand_vector(c, m);
    CHECK(b.sum() == 0.0);
    CHECK((b.array() != 0.0).count() == 2);
  }
}

TEST_CASE("generate_tm determinism and density arithmetic") {
  Topology t = testing::random_topology(20, 15, 5);
  TrafficMatrix a = generate_tm(t, TrafficModel::kUniform, 42, {.density = 0.05});
  TrafficMatrix b = generate_tm(t, TrafficModel::kUniform, 42, {.density = 0.05});
  REQUIRE(a.commodities.size() == b.commodities.size());
  for (size_t i = 0; i < a.commodities.size(); ++i) {
    CHECK(a.commodities[i].src == b.commodities[i].src);
    CHECK(a.commodities[i].dst == b.commodities[i].dst);
    CHECK(a.commodities[i].demand == b.commodities[i].demand);
  }
  CHECK(a.commodities.size() == size_t(0.05 * 20 * 19));

  // At most one commodity per ordered pair.
  std::set<std::pair<int, int>> pairs;
  for (const auto& c : a.commodities)
    CHECK(pairs.insert({c.src, c.dst}).second);
}

TEST_CASE("gravity favors hub-adjacent pairs on a star") {
  // Star: hub h with 9 leaves.
  std::ostringstream edges;
  for (int leaf = 0; leaf < 9; ++leaf) edges << "h l" << leaf << " 10\n";
  Topology star = load_edge_list(edges.str());
  NodeId hub = star.node_by_name("h");
  TrafficMatrix tm = generate_tm(star, TrafficModel::kGravity, 3, {.density = 1.0});
  double min_hub = 1e18, max_leaf = 0.0;
  for (const auto& c : tm.commodities) {
    bool hub_pair = c.src == hub || c.dst == hub;
    if (hub_pair)
      min_hub = std::min(min_hub, c.demand);
    else
      max_leaf = std::max(max_leaf, c.demand);
  }
  CHECK(min_hub > max_leaf);
}

TEST_CASE("bimodal draws from two modes") {
  Topology t = testing::random_topology(12, 10, 9);
  TrafficMatrix tm = generate_tm(t, TrafficModel::kBimodal, 11, {.density = 1.0});
  int high = 0;
  for (const auto& c : tm.commodities)
    if (c.demand > 4.0) ++high;
  double frac = double(high) / double(tm.commodities.size());
  CHECK(frac > 0.05);
  CHECK(frac < 0.45);
}

TEST_CASE("scale_to_load uses homogeneity") {
  Topology t = testing::fig2_topology();
  TrafficMatrix tm = testing::fig2_tm();
  auto fake_oracle = [](const TrafficMatrix& m) {
    // Positively homogeneous stand-in: MLU proportional to total demand.
    return 0.5 * m.total_demand() / 6.0;
  };
  TrafficMatrix scaled = scale_to_load(tm, 1.0, fake_oracle);
  CHECK(fake_oracle(scaled) == doctest::Approx(1.0));
  CHECK(scaled.commodities[0].demand / tm.commodities[0].demand ==
        doctest::Approx(2.0));

  // Idempotence: re-scaling an already scaled matrix moves nothing.
  TrafficMatrix again = scale_to_load(scaled, 1.0, fake_oracle);
  CHECK(again.commodities[0].demand / scaled.commodities[0].demand ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("perturb_tm respects bounds and endpoints") {
  Topology t = testing::random_topology(10, 8, 2);
  TrafficMatrix tm = generate_tm(t, TrafficModel::kUniform, 4, {.density = 0.5});
  std::mt19937_64 rng(77);

  SUBCASE("fraction zero is the identity") {
    TrafficMatrix out = perturb_tm(tm, 0.0, PerturbRule::kUniform, rng, t, tm);
    for (size_t i = 0; i < tm.commodities.size(); ++i)
      CHECK(out.commodities[i].demand == tm.commodities[i].demand);
  }
  SUBCASE("values stay within the initial range, endpoints fixed") {
    double lo = tm.min_demand(), hi = tm.max_demand();
    TrafficMatrix cur = tm;
    for (int round = 0; round < 20; ++round) {
      cur = perturb_tm(cur, 0.05, PerturbRule::kUniform, rng, t, tm);
      for (size_t i = 0; i < cur.commodities.size(); ++i) {
        CHECK(cur.commodities[i].src == tm.commodities[i].src);
        CHECK(cur.commodities[i].dst == tm.commodities[i].dst);
        CHECK(cur.commodities[i].demand >= lo - 1e-12);
        CHECK(cur.commodities[i].demand <= hi + 1e-12);
      }
    }
  }
  SUBCASE("fixed seed reproduces the sequence") {
    std::mt19937_64 r1(5), r2(5);
    TrafficMatrix a = perturb_tm(tm, 0.2, PerturbRule::kGravity, r1, t, tm);
    TrafficMatrix b = perturb_tm(tm, 0.2, PerturbRule::kGravity, r2, t, tm);
    for (size_t i = 0; i < a.commodities.size(); ++i)
      CHECK(a.commodities[i].demand == b.commodities[i].demand);
  }
}

TEST_CASE("failure schedule expectation") {
  SUBCASE("zero failures yields an empty schedule") {
    std::mt19937_64 rng(1);
    EventSchedule s = failure_schedule(0.0, 300.0, rng, 10);
    CHECK(s.events.empty());
  }
  SUBCASE("slot probability matches K/slots") {
    // K=3 over 15 slots -> p=0.2; Monte-Carlo mean within 5%.
    std::mt19937_64 rng(9);
    double total = 0.0;
    const int runs = 10000;
    for (int rep = 0; rep < runs; ++rep) {
      EventSchedule s = failure_schedule(3.0, 300.0, rng, 10);
      total += double(s.events.size());
    }
    double mean = total / runs;
    CHECK(mean > 3.0 * 0.95);
    CHECK(mean < 3.0 * 1.05);
  }
  SUBCASE("timestamps are non-decreasing") {
    std::mt19937_64 rng(3);
    EventSchedule s = failure_schedule(5.0, 600.0, rng, 4);
    for (size_t i = 1; i < s.events.size(); ++i)
      CHECK(s.events[i].t_seconds >= s.events[i - 1].t_seconds);
  }
}

TEST_CASE("tm and schedule round-trip through csv") {
  Topology t = testing::fig2_topology();
  TrafficMatrix tm = testing::fig2_tm();
  std::string csv = tm_to_csv(tm, t);
  TrafficMatrix back = tm_from_csv(csv, t);
  REQUIRE(back.commodities.size() == tm.commodities.size());
  for (size_t i = 0; i < tm.commodities.size(); ++i) {
    CHECK(back.commodities[i].src == tm.commodities[i].src);
    CHECK(back.commodities[i].demand == tm.commodities[i].demand);
  }
  CHECK_THROWS_AS(tm_from_csv("1,1,5\n", t), InputError);
  CHECK_THROWS_AS(tm_from_csv("1,4,-2\n", t), InputError);

  EventSchedule sched = demand_change_schedule(0.05, 100.0, 20.0);
  std::mt19937_64 rng(4);
  sched = merge_schedules(sched, failure_schedule(2.0, 100.0, rng, 5));
  EventSchedule back2 = schedule_from_csv(schedule_to_csv(sched));
  REQUIRE(back2.events.size() == sched.events.size());
  for (size_t i = 0; i < sched.events.size(); ++i) {
    CHECK(back2.events[i].kind == sched.events[i].kind);
    CHECK(back2.events[i].t_seconds ==
          doctest::Approx(sched.events[i].t_seconds));
  }
}
