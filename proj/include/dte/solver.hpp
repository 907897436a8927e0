#pragma once

#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "dte/coordinator.hpp"
#include "dte/switch_agent.hpp"

namespace dte {

struct SolverOptions {
  SolveMode mode = SolveMode::kPathMlu;
  admm::AdmmConfig cfg;
  int T_paths = 4;
  // Null-space backend: explicit SVD basis below the threshold, sparse
  // Laplacian projector above it (same operator, cheaper at WAN scale).
  int basis_edge_threshold = 600;
  int max_outer_rounds = 400;
  std::optional<double> reference;  // oracle objective for the 1% stop
  int regions = 1;                  // > 1 = hierarchical
  bool hierarchical = false;        // force the global loop even for one region
  double hier_beta = 1.0;
  BarrierConfig barrier;
  std::uint64_t seed = 0;
  bool cold_random_init = false;  // seed-jittered cold start (path modes)
  std::vector<int> region_of_node;  // optional explicit region assignment
};

// One switch per demand-originating node; commodities live on their source
// switch. Region coordinators own the consensus state; a global coordinator
// appears when regions > 1.
class System {
 public:
  System(Topology topology, TrafficMatrix tm, SolverOptions opts);

  const Topology& topology() const { return topo_; }
  const TrafficMatrix& traffic() const { return tm_; }
  const SolverOptions& options() const { return opts_; }

  std::vector<SwitchAgent>& switches() { return switches_; }
  std::vector<RegionCoordinator>& regions() { return regions_; }
  std::optional<GlobalCoordinator>& global() { return global_; }
  const std::vector<int>& region_of_switch() const { return region_of_switch_; }
  const FlowOps* flow_ops() const { return ops_.get(); }

  // Reconstructs the consensus pull exactly the way a switch does from its
  // two latest broadcasts: Xbar_rec = Pbar + (u - u_prev).
  static Vec consensus_pull(const InnerBcast& latest, const Vec& u_prev);

  Vec total_flow() const;
  // MLU for the MLU modes, demand satisfaction for the max-flow modes.
  double objective() const;
  double mlu() const;
  double satisfaction() const;

  SwitchReport make_report(const SwitchAgent& sw, long iter) const;
  std::vector<SwitchReport> initial_reports() const;

  // Demand churn: same endpoints, new demands; warm-starts every state.
  void apply_demand_change(const TrafficMatrix& new_tm);
  // Link failure: FRR on path modes, re-factorization + least-squares
  // re-projection warm start on edge modes.
  void apply_link_failure(int link_index);

  int num_commodities() const { return static_cast<int>(tm_.commodities.size()); }
  int commodities_in_region(int r) const { return region_commodity_count_[r]; }
  bool any_unroutable() const;

  // Path modes: overwrite every commodity's splits (indexed like the
  // traffic matrix) and refresh the reported assignments.
  void set_splits(const std::vector<Vec>& splits);

 private:
  void build();
  void init_commodity(CommodityState& s, std::mt19937_64& rng);

  Topology topo_;
  TrafficMatrix tm_;
  SolverOptions opts_;
  std::shared_ptr<FlowOps> ops_;
  std::vector<SwitchAgent> switches_;
  std::vector<RegionCoordinator> regions_;
  std::optional<GlobalCoordinator> global_;
  std::vector<int> region_of_switch_;
  std::vector<int> region_commodity_count_;
};

struct OuterLog {
  long inner_iter = 0;
  double objective = 0.0;
  double U = 0.0;
  Vec Z;  // kept for bit-exact equivalence checks
  Vec u;
};

struct SolveResult {
  bool converged = false;
  long inner_rounds = 0;
  int outer_rounds = 0;
  double objective = 0.0;  // MLU or satisfaction at the end
  double mlu = 0.0;
  std::vector<OuterLog> log;
  double wall_ms = 0.0;
  bool solver_flagged = false;  // unroutable commodities etc.
};

// Flat synchronous nested loop, or the hierarchical variant when
// opts.regions > 1 (domains advance in lockstep; the inter-region exchange
// happens at outer cadence). Stops on convergence against the reference, on
// the residual rule otherwise, or at max_outer_rounds.
SolveResult solve(System& sys);

// Convenience: build a System and solve.
SolveResult solve_instance(const Topology& t, const TrafficMatrix& tm,
                           const SolverOptions& opts);

}  // namespace dte
