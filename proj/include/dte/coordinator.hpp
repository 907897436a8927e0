#pragma once

#include <map>
#include <optional>
#include <vector>

#include "dte/admm.hpp"
#include "dte/switch_agent.hpp"

namespace dte {

// --- Simulated wire schemas. Byte accounting: a dense n-vector costs 8n,
// --- a sparse (edge index, value) pair costs 12, scalars 8.

struct SwitchReport {
  int switch_id = 0;
  long iter = 0;
  std::vector<std::pair<int, double>> agg;    // aggregate of owned commodities
  std::vector<std::pair<int, double>> betas;  // per-commodity fractions (max-flow)
  std::size_t bytes() const { return 12 * (agg.size() + betas.size()); }
};

struct InnerBcast {
  long iter = 0;
  Vec pbar, u;
  std::size_t bytes() const { return 8 * (pbar.size() + u.size()); }
};

struct OuterBcast {
  long iter = 0;
  Vec Z, r;
  // Max-flow: per-owned-commodity target fraction alpha_k minus its dual.
  std::map<int, double> beta_targets;
  std::size_t bytes() const {
    return 8 * (Z.size() + r.size()) + 12 * beta_targets.size();
  }
};

struct DomainReport {
  int domain_id = 0;
  long iter = 0;
  Vec Z_d;
  double U_d = 0.0;
  std::size_t bytes() const { return 8 * Z_d.size() + 8; }
};

struct DomainBcast {
  long iter = 0;
  Vec R_d;      // this domain's reservation
  Vec R_not_d;  // everyone else's, which tightens the domain capacity
  double O = 0.0;
  double v_d = 0.0;
  Vec l_d;
  std::size_t bytes() const {
    return 8 * (R_d.size() + R_not_d.size() + l_d.size()) + 16;
  }
};

struct BarrierConfig {
  bool synchronous = true;
  int k_min = 1;    // minimum fresh responders before a round may run
  int tau = 3;      // max allowed staleness, in rounds
};

// Hierarchical coupling parameters a region received from the global
// coordinator (all zero/empty when running flat).
struct HierCoupling {
  double beta_step = 0.0;  // 0 = flat (also forced for a single domain)
  Vec reserved;            // R[!d]
  Vec R_d;
  Vec l_d;
  double O = 0.0;
  double v_d = 0.0;
  double g_scale = 1.0;    // 1/D
};

// Region coordinator: runs the consensus side of the nested loop. A plain
// deterministic state machine; drivers (in-process or simulated) feed it
// reports and ask whether the barrier allows a round.
class RegionCoordinator {
 public:
  struct RoundOutput {
    InnerBcast inner;
    std::optional<OuterBcast> outer;
    std::vector<int> recipients;  // switch ids
    std::optional<DomainReport> domain_report;
  };

  RegionCoordinator(int region_id, SolveMode mode, admm::AdmmConfig cfg,
                    BarrierConfig barrier, Vec capacities, int num_commodities,
                    std::vector<int> member_switches);

  int id() const { return region_id_; }
  const std::vector<int>& members() const { return members_; }
  long iter() const { return iter_; }

  // Seeds consensus from the initial reports: Pbar = Xbar, duals zero.
  void initialize(const std::vector<SwitchReport>& initial_reports);

  void receive(const SwitchReport& report);
  void receive(const DomainBcast& bcast);

  // Partial barrier: >= k_min fresh reports and nobody staler than tau.
  // Synchronous mode is the k_min = |members| special case with multicast to
  // everyone.
  bool barrier_ready() const;
  // True when the barrier only waits on overdue members (stall situation).
  bool stalled_on_straggler() const;

  RoundOutput step();

  const Vec& sum_x() const { return sum_x_; }
  const admm::OuterState& outer_state() const { return outer_; }
  const admm::InnerState& inner_state() const { return inner_; }
  const HierCoupling& coupling() const { return hier_; }
  // Inter-region coupling stays inert (flat behavior) until the first
  // DomainBcast arrives; beta_step = 0 keeps it off permanently.
  void configure_hier(double beta_step, double g_scale) {
    hier_beta_config_ = beta_step;
    hier_.g_scale = g_scale;
  }

  // Demand-churn epochs keep the duals but re-seed the aggregate state.
  void reseed_aggregates(const std::vector<SwitchReport>& reports);

  // Topology mutation: re-dimension every edge-indexed vector.
  void remap_edges(const std::vector<int>& old_to_new, int new_num_edges,
                   const Vec& new_capacities);

 private:
  void run_outer(OuterBcast& out);

  int region_id_;
  SolveMode mode_;
  admm::AdmmConfig cfg_;
  BarrierConfig barrier_;
  Vec capacities_;
  int K_;  // commodities in this region's sharing problem
  std::vector<int> members_;

  long iter_ = 0;
  admm::OuterState outer_;
  admm::InnerState inner_;
  Vec sum_x_;
  HierCoupling hier_;
  double hier_beta_config_ = 0.0;

  struct MemberSlot {
    Vec agg;
    long stamp = -1;                       // iteration of the last report
    std::vector<std::pair<int, double>> betas;
    bool fresh = false;                    // reported since the last round
  };
  std::map<int, MemberSlot> slots_;

  // Max-flow consensus on routed fractions: alpha and its dual per commodity.
  std::map<int, double> alpha_, alpha_dual_, beta_latest_;
};

// Global coordinator of the inter-region consensus loop.
class GlobalCoordinator {
 public:
  GlobalCoordinator(int num_domains, int num_edges, Vec capacities,
                    double beta_step, BarrierConfig barrier);

  void receive(const DomainReport& report);
  bool barrier_ready() const;

  // O-update, domain consensus (projected gradient with warm start), dual
  // updates; returns one DomainBcast per responding domain (all when sync).
  std::vector<std::pair<int, DomainBcast>> step();

  double O() const { return O_; }
  const std::vector<Vec>& R() const { return R_; }
  bool infeasible_flag() const { return infeasible_; }
  void remap_edges(const std::vector<int>& old_to_new, int new_num_edges,
                   const Vec& new_capacities);

 private:
  int D_;
  int n_;
  Vec capacities_;
  double beta_step_;
  BarrierConfig barrier_;
  long iter_ = 0;

  std::vector<Vec> Z_, R_, l_;
  std::vector<double> U_, v_;
  std::vector<long> stamp_;
  std::vector<char> fresh_;
  double O_ = 0.0;
  bool infeasible_ = false;
};

// O = mean(U[d]) + mean(v[d]).
double global_O_update(const std::vector<double>& U,
                       const std::vector<double>& v);

// Domain consensus: minimize sum_d (beta/2)||Z[d] - R[d] + l[d]||^2 subject
// to, per edge, sum_{d' != d} R[d'] <= U[d]C - Z[d] and R >= 0. Projected
// gradient with Dykstra projections; returns false when the headroom system
// is infeasible (R left unchanged).
bool global_domain_consensus(const std::vector<Vec>& Z,
                             const std::vector<double>& U,
                             const std::vector<Vec>& l, const Vec& C,
                             double beta_step, std::vector<Vec>& R,
                             int iters = 200);

// v[d] += U[d] - O; l[d] += Z[d] - R[d].
void hier_dual_update(std::vector<double>& v, std::vector<Vec>& l,
                      const std::vector<double>& U, double O,
                      const std::vector<Vec>& Z, const std::vector<Vec>& R);

// Latency-based agglomerative clustering (average linkage) into
// `num_regions` groups; deterministic.
std::vector<int> cluster_regions(const Topology& t, int num_regions);

// Node minimizing the maximum latency to the given members.
NodeId latency_centroid(const Topology& t, const std::vector<NodeId>& members,
                        const Mat& latency);

}  // namespace dte
