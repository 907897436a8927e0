#include "doctest.h"
#include "dte/metrics.hpp"
#include "dte/oracle.hpp"
#include "dte/simnet.hpp"
#include "test_support.hpp"

using namespace dte;
using namespace dte::sim;

namespace {

SimTrace scripted_trace(std::vector<double> obj, std::vector<double> opt,
                        std::vector<double> mlu, bool maximize = false) {
  SimTrace tr;
  tr.maximize = maximize;
  for (size_t i = 0; i < obj.size(); ++i) {
    SimTrace::Sample s;
    s.t_s = 20.0 * double(i);
    s.objective = obj[i];
    s.optimal = opt[i];
    s.mlu = mlu[i];
    s.on_grid = true;
    tr.samples.push_back(s);
  }
  return tr;
}

}  // namespace

TEST_CASE("regret arithmetic on scripted traces") {
  SUBCASE("positive gaps add up, negative gaps do not") {
    SimTrace tr = scripted_trace({1.0, 0.9}, {0.8, 0.9}, {1.0, 0.9});
    CHECK(objective_regret(tr) == doctest::Approx(0.2));
  }
  SUBCASE("below-optimal objective accrues nothing") {
    SimTrace tr = scripted_trace({0.7, 0.8}, {0.8, 0.9}, {0.7, 0.8});
    CHECK(objective_regret(tr) == 0.0);
  }
  SUBCASE("three-point hand sum") {
    SimTrace tr = scripted_trace({1.5, 1.1, 0.9}, {1.0, 1.0, 1.0},
                                 {1.5, 1.1, 0.9});
    CHECK(objective_regret(tr) == doctest::Approx(0.5 + 0.1 + 0.0));
    CHECK(capacity_regret(tr) == doctest::Approx(0.5 + 0.1 + 0.0));
  }
  SUBCASE("capacity regret counts utilization above one") {
    SimTrace tr = scripted_trace({0.0, 0.0}, {0.0, 0.0}, {1.2, 0.9});
    CHECK(capacity_regret(tr) == doctest::Approx(0.2));
  }
  SUBCASE("maximization flips the gap") {
    SimTrace tr = scripted_trace({0.8, 1.0}, {1.0, 1.0}, {1.0, 1.0}, true);
    CHECK(objective_regret(tr) == doctest::Approx(0.2));
  }
  SUBCASE("regret is non-decreasing in the trace prefix") {
    SimTrace tr = scripted_trace({1.5, 0.9, 1.2, 1.0}, {1.0, 1.0, 1.0, 1.0},
                                 {1.5, 0.9, 1.2, 1.0});
    double prev = 0.0;
    for (size_t len = 1; len <= tr.samples.size(); ++len) {
      SimTrace prefix = tr;
      prefix.samples.resize(len);
      double r = objective_regret(prefix);
      CHECK(r >= prev);
      prev = r;
    }
  }
}

TEST_CASE("mlu_of and demand satisfaction") {
  Topology t = testing::fig2_topology();
  SUBCASE("zero assignment and single overloaded edge") {
    CHECK(mlu_of(Vec::Zero(t.num_edges()), t) == 0.0);
    Topology single = load_edge_list("A B 2\n");
    Vec f(2);
    f << 3.0, 0.0;
    CHECK(mlu_of(f, single) == doctest::Approx(1.5));
  }
  SUBCASE("fig2 published final splits give 0.75") {
    TrafficMatrix tm = testing::fig2_tm();
    auto paths = testing::path_sets(t, tm, 3);
    // Commodity 1->4: our latency order is (1-4, 1-2-4, 1-3-4); the
    // published optimizer routes (2.25, 0.25, 1.5) of 4 units over them.
    Vec y1(3), y2(3);
    y1 << 2.25 / 4.0, 0.25 / 4.0, 1.5 / 4.0;
    // Commodity 2->4 over (2-4, 2-1-4, 2-1-3-4): (1.25, 0.75, 0) of 2.
    y2 << 1.25 / 2.0, 0.75 / 2.0, 0.0;
    Vec total = paths[0].edge_flow(y1, 4.0) + paths[1].edge_flow(y2, 2.0);
    CHECK(mlu_of(total, t) == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("satisfaction ratios") {
    TrafficMatrix tm = testing::fig2_tm();
    CHECK(demand_satisfaction({1.0, 1.0}, tm) == doctest::Approx(1.0));
    CHECK(demand_satisfaction({0.5, 1.0}, tm) ==
          doctest::Approx((4.0 * 0.5 + 2.0) / 6.0));
    TrafficMatrix one;
    one.commodities.push_back({0, 1, 2.0});
    CHECK(demand_satisfaction({0.5}, one) == doctest::Approx(0.5));
  }
}

TEST_CASE("stretch statistics") {
  // Two disjoint routes of latency 2 and 4 between s and d.
  Topology t = load_edge_list(
      "s d 10 2\n"
      "s m 10 1\n"
      "m d 10 3\n");
  TrafficMatrix tm;
  tm.commodities.push_back({t.node_by_name("s"), t.node_by_name("d"), 2.0});
  auto paths = testing::path_sets(t, tm, 2);
  REQUIRE(paths[0].available_count() == 2);

  SUBCASE("even split over lengths 2 and 4 stretches 1.5") {
    Vec y(2);
    y << 0.5, 0.5;
    auto st = stretch_from_splits({&paths[0]}, {y}, t, tm.commodities);
    CHECK(st.median == doctest::Approx(1.5));
  }
  SUBCASE("all flow on the shortest path has stretch 1") {
    Vec y(2);
    y << 1.0, 0.0;
    auto st = stretch_from_splits({&paths[0]}, {y}, t, tm.commodities);
    CHECK(st.median == doctest::Approx(1.0));
  }
  SUBCASE("edge assignments decompose conservatively") {
    Vec y(2);
    y << 0.25, 0.75;
    Vec x = paths[0].edge_flow(y, 2.0);
    auto decomp = decompose_flow(x, t, tm.commodities[0].src,
                                 tm.commodities[0].dst);
    double total = 0.0;
    for (const auto& p : decomp) total += p.flow;
    CHECK(total == doctest::Approx(2.0).epsilon(1e-9));
    // Split-weighted latency over the shortest: (0.25*2 + 0.75*4)/2 = 1.75.
    auto st = stretch_from_assignments({x}, t, tm.commodities);
    CHECK(st.median == doctest::Approx(1.75));
  }
}

TEST_CASE("support acyclicity check") {
  Topology t = testing::fig2_topology();
  Vec x = Vec::Zero(t.num_edges());
  NodeId n1 = t.node_by_name("1"), n2 = t.node_by_name("2"),
         n4 = t.node_by_name("4");
  x[t.find_edge(n1, n2)] = 1.0;
  x[t.find_edge(n2, n4)] = 1.0;
  CHECK(support_acyclic(x, t, 1e-9));
  x[t.find_edge(n2, n1)] = 0.5;  // back edge closes a 2-cycle
  CHECK_FALSE(support_acyclic(x, t, 1e-9));
  CHECK(support_acyclic(x, t, 0.6));  // threshold hides the cycle
}

TEST_CASE("simulated fig2 converges and reacts to the fig3 update") {
  Topology t = testing::fig2_topology();
  TrafficMatrix tm = testing::fig2_tm();
  ExperimentConfig cfg;
  cfg.solver.mode = SolveMode::kPathMlu;
  cfg.solver.T_paths = 3;
  cfg.duration_s = 60.0;
  cfg.seed = 1;
  cfg.reference = [](const Topology& topo, const TrafficMatrix& m) {
    std::vector<PathSet> ps;
    for (const Commodity& c : m.commodities)
      ps.push_back(k_shortest_paths(topo, c.src, c.dst, 3));
    return std::optional<double>(oracle::exact_path_mlu(topo, m, ps).mlu);
  };
  // The published demand update: 4 -> 3.5 and 2 -> 2.5 at t = 20 s.
  cfg.perturber = [](const TrafficMatrix& cur, std::mt19937_64&) {
    TrafficMatrix next = cur;
    next.commodities[0].demand = 3.5;
    next.commodities[1].demand = 2.5;
    return next;
  };
  SimEventSpec change;
  change.kind = SimEventSpec::kDemandChange;
  change.t_seconds = 20.0;
  change.fraction = 1.0;
  cfg.schedule.events.push_back(change);

  SimTrace trace = run_experiment(t, tm, cfg);
  REQUIRE(trace.rounds_to_converge.size() == 2);
  CHECK(trace.rounds_to_converge[0] > 0);
  CHECK(trace.rounds_to_converge[1] > 0);
  // Both epochs converge to 0.75 within 1%, and the re-optimization lands
  // well before the next 20 s mark at desk latencies.
  CHECK(trace.converge_time_s[1] < 20.0);
  double final_mlu = trace.samples.back().mlu;
  CHECK(final_mlu == doctest::Approx(0.75).epsilon(0.011));

  // After initial convergence with no further events the trace stays flat.
  bool seen_converged = false;
  double settled = 0.0;
  for (const auto& s : trace.samples) {
    if (s.t_s > 0.5 && s.t_s < 19.9 && s.on_grid) {
      if (!seen_converged) {
        settled = s.objective;
        seen_converged = true;
      }
      CHECK(s.objective == doctest::Approx(settled));
    }
  }
}

TEST_CASE("identical seeds give byte-identical traces") {
  Topology t = testing::random_topology(8, 6, 33);
  TrafficMatrix tm = generate_tm(t, TrafficModel::kUniform, 2, {.density = 0.2});
  ExperimentConfig cfg;
  cfg.solver.mode = SolveMode::kPathMlu;
  cfg.solver.T_paths = 3;
  cfg.duration_s = 80.0;
  cfg.seed = 99;
  cfg.schedule = demand_change_schedule(0.2, 80.0, 20.0);
  SimTrace a = run_experiment(t, tm, cfg);
  SimTrace b = run_experiment(t, tm, cfg);
  CHECK(a.to_csv({}) == b.to_csv({}));
  CHECK(a.bytes_down == b.bytes_down);
  CHECK(a.messages == b.messages);
}

TEST_CASE("sync and full-barrier async produce identical traces") {
  Topology t = testing::random_topology(6, 5, 44);
  TrafficMatrix tm = generate_tm(t, TrafficModel::kUniform, 3, {.density = 0.3});
  ExperimentConfig cfg;
  cfg.solver.mode = SolveMode::kPathMlu;
  cfg.solver.T_paths = 3;
  cfg.duration_s = 30.0;
  cfg.seed = 5;
  SimTrace sync_trace = run_experiment(t, tm, cfg);

  ExperimentConfig async_cfg = cfg;
  async_cfg.solver.barrier.synchronous = false;
  async_cfg.solver.barrier.k_min = 1 << 20;  // clamped to the member count
  async_cfg.solver.barrier.tau = 1 << 20;
  SimTrace async_trace = run_experiment(t, tm, async_cfg);
  CHECK(sync_trace.to_csv({}) == async_trace.to_csv({}));
}

TEST_CASE("downward message accounting matches the dense-vector rule") {
  Topology t = testing::random_topology(7, 5, 55);
  TrafficMatrix tm = generate_tm(t, TrafficModel::kUniform, 4, {.density = 0.2});
  ExperimentConfig cfg;
  cfg.solver.mode = SolveMode::kPathMlu;
  cfg.solver.T_paths = 3;
  cfg.duration_s = 10.0;
  cfg.seed = 6;
  System probe(t, tm, cfg.solver);
  const std::uint64_t S = probe.switches().size();
  SimTrace trace = run_experiment(t, tm, cfg);

  // Each inner round multicasts (Pbar, u); outer rounds add (Z, r).
  // Recover the round count from the byte total and check consistency.
  const std::uint64_t n = t.num_edges();
  const std::uint64_t per_round = S * 2 * 8 * n;
  const int I = cfg.solver.cfg.inner_iters_per_outer;
  std::uint64_t rounds = 0, best_extra = 0;
  bool matched = false;
  for (std::uint64_t r = 1; r < 100000 && !matched; ++r) {
    std::uint64_t outer = r / I;
    if (r * per_round + outer * per_round == trace.bytes_down) {
      matched = true;
      rounds = r;
      best_extra = outer;
    }
  }
  CHECK(matched);
  CHECK(rounds > 0);
  (void)best_extra;
}

TEST_CASE("partial barrier never consumes a report staler than tau") {
  // Two far switches and several near ones; async with a small quorum.
  std::vector<int> region_of_node;
  Topology t = testing::two_region_topology(4, 3, 60.0, &region_of_node);
  TrafficMatrix tm = generate_tm(t, TrafficModel::kUniform, 7, {.density = 0.3});
  ExperimentConfig cfg;
  cfg.solver.mode = SolveMode::kPathMlu;
  cfg.solver.T_paths = 3;
  cfg.solver.barrier.synchronous = false;
  cfg.solver.barrier.k_min = 2;
  cfg.solver.barrier.tau = 4;
  cfg.duration_s = 20.0;
  cfg.seed = 8;
  SimTrace trace = run_experiment(t, tm, cfg);
  // The run must make progress and converge despite the stragglers.
  CHECK(trace.rounds_to_converge[0] > 0);
}
