#include <random>

#include "doctest.h"
#include "dte/switch_agent.hpp"
#include "test_support.hpp"

using namespace dte;

namespace {

CommodityState make_state(const Topology& t, const Commodity& c,
                          std::shared_ptr<FlowOps> ops, int T_paths = 0) {
  CommodityState s;
  s.commodity = c;
  s.x = Vec::Zero(t.num_edges());
  s.pinned_edges = loop_leak_pinned(t, c);
  if (T_paths > 0) {
    s.paths = k_shortest_paths(t, c.src, c.dst, T_paths);
    s.splits = Vec::Zero(T_paths);
    if (s.paths.routable()) {
      s.splits[0] = 1.0;
      s.x = s.paths.edge_flow(s.splits, c.demand);
    }
  } else if (ops) {
    s.x0 = ops->base_flow(demand_vector(c, t.num_nodes()));
    s.lambda = Vec::Zero(t.num_edges());
    s.w_null = Vec::Zero(t.num_edges());
    s.t_slack = Vec::Zero(t.num_edges());
    s.x = s.x0;
  }
  return s;
}

}  // namespace

TEST_CASE("x_update_l2 on a single directed edge always returns the base flow") {
  Topology t(2, {Edge{0, 1, 5.0, 1.0, -1, -1}});
  auto ops = make_flow_ops(t, true);
  ops->version = t.version();
  CommodityState s = make_state(t, {0, 1, 3.0}, ops);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    Vec pull(1);
    pull[0] = g(rng);
    x_update_l2(s, pull, *ops, 0.0, 1.0, 30, t.version());
    CHECK(s.x[0] == doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("x_update_l2 keeps flow conservation and rejects stale ops") {
  Topology t = testing::fig2_topology();
  auto ops = make_flow_ops(t, true);
  ops->version = t.version();
  Commodity c{t.node_by_name("1"), t.node_by_name("4"), 4.0};
  CommodityState s = make_state(t, c, ops);
  Mat M = Mat(incidence_matrix(t));
  Vec B = demand_vector(c, t.num_nodes());

  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.5);
  Vec pull(t.num_edges());
  for (int e = 0; e < pull.size(); ++e) pull[e] = g(rng);
  // Iterate the same subproblem to convergence: the report then satisfies
  // conservation including the pinned-edge zeroing.
  for (int round = 0; round < 40; ++round)
    x_update_l2(s, pull, *ops, 1e-3, 1.0, 50, t.version());
  CHECK((M * s.x - B).cwiseAbs().maxCoeff() < 1e-6);
  for (int e : s.pinned_edges) CHECK(s.x[e] == 0.0);

  CHECK_THROWS_AS(x_update_l2(s, pull, *ops, 1e-3, 1.0, 5, t.version() + 1),
                  StaleStateError);
}

TEST_CASE("x_update_l1 agrees with x_update_l2 at kappa 0") {
  for (std::uint64_t seed : {5, 9, 14}) {
    Topology t = testing::random_topology(5, 4, seed);
    auto ops = make_flow_ops(t, true);
    ops->version = t.version();
    Commodity c{0, 4, 2.0};
    if (!t.shortest_path(0, 4)) continue;
    CommodityState a = make_state(t, c, ops);
    CommodityState b = a;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.4);
    Vec pull(t.num_edges());
    for (int e = 0; e < pull.size(); ++e) pull[e] = g(rng);

    for (int round = 0; round < 60; ++round) {
      x_update_l2(a, pull, *ops, 0.0, 1.0, 60, t.version());
      x_update_l1(b, pull, *ops, 0.0, 0.0, 1.0, 1.0, 60, t.version());
    }
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("x_update_l1 with a dominating kappa zeroes the report") {
  Topology t = testing::fig2_topology();
  auto ops = make_flow_ops(t, true);
  ops->version = t.version();
  Commodity c{t.node_by_name("1"), t.node_by_name("4"), 4.0};
  CommodityState s = make_state(t, c, ops);
  Vec pull = Vec::Zero(t.num_edges());
  double huge = 1e6;
  x_update_l1(s, pull, *ops, huge, 0.0, 1.0, 1.0, 10, t.version());
  CHECK(s.x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("x_update_path basics") {
  SUBCASE("single path forces the whole split") {
    Topology t = load_edge_list("A B 5\n");
    CommodityState s = make_state(t, {0, 1, 3.0}, nullptr, 4);
    Vec pull = Vec::Zero(t.num_edges());
    x_update_path(s, pull, 1e-4, 1.0, 20);
    CHECK(s.splits[0] == doctest::Approx(1.0));
    CHECK(s.x[0] == doctest::Approx(3.0));
  }
  SUBCASE("splits stay on the reduced simplex under random pulls") {
    Topology t = testing::fig2_topology();
    CommodityState s =
        make_state(t, {t.node_by_name("1"), t.node_by_name("4"), 4.0}, nullptr, 3);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int rep = 0; rep < 20; ++rep) {
      Vec pull(t.num_edges());
      for (int e = 0; e < pull.size(); ++e) pull[e] = g(rng);
      x_update_path(s, pull, 1e-4, 1.0, 15);
      CHECK(s.splits.sum() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(s.splits.minCoeff() >= 0.0);
    }
  }
  SUBCASE("unroutable commodity reports zero") {
    Topology t = load_edge_list("A B 5\nB C 5\n");
    CommodityState s = make_state(t, {0, 2, 1.0}, nullptr, 2);
    s.paths.apply_failures({0, 1, 2, 3});  // kill everything
    x_update_path(s, Vec::Zero(t.num_edges()), 1e-4, 1.0, 5);
    CHECK_FALSE(s.routable);
    CHECK(s.x.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("x_update_maxflow keeps beta in the unit interval") {
  Topology t = testing::fig2_topology();
  CommodityState s =
      make_state(t, {t.node_by_name("1"), t.node_by_name("4"), 4.0}, nullptr, 3);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int rep = 0; rep < 25; ++rep) {
    Vec pull(t.num_edges());
    for (int e = 0; e < pull.size(); ++e) pull[e] = g(rng);
    s.beta_target = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    x_update_maxflow(s, pull, nullptr, true, 1e-4, 1.0, 10, 3, t.version());
    CHECK(s.beta >= 0.0);
    CHECK(s.beta <= 1.0);
    CHECK(s.splits.sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("frr redistribution") {
  Topology t = testing::fig2_topology();
  NodeId n1 = t.node_by_name("1"), n4 = t.node_by_name("4");
  CommodityState s = make_state(t, {n1, n4, 4.0}, nullptr, 3);

  SUBCASE("no failure is the identity") {
    s.splits << 0.5, 0.3, 0.2;
    CHECK_FALSE(frr_redistribute(s));
    CHECK(s.splits[0] == 0.5);
  }
  SUBCASE("proportional rescale over survivors") {
    s.splits << 0.5, 0.3, 0.2;
    s.paths.paths[0].available = false;
    CHECK(frr_redistribute(s));
    CHECK(s.splits[0] == 0.0);
    CHECK(s.splits[1] == doctest::Approx(0.6));
    CHECK(s.splits[2] == doctest::Approx(0.4));
  }
  SUBCASE("degenerate mass falls back to uniform") {
    s.splits << 1.0, 0.0, 0.0;
    s.paths.paths[0].available = false;
    CHECK(frr_redistribute(s));
    CHECK(s.splits[1] == doctest::Approx(0.5));
    CHECK(s.splits[2] == doctest::Approx(0.5));
  }
  SUBCASE("losing every path flags the commodity") {
    s.splits << 0.5, 0.3, 0.2;
    for (auto& p : s.paths.paths) p.available = false;
    CHECK(frr_redistribute(s));
    CHECK_FALSE(s.routable);
    CHECK(s.splits.cwiseAbs().maxCoeff() == 0.0);
  }
}
