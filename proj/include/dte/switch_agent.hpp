#pragma once

#include <memory>
#include <vector>

#include "dte/admm.hpp"
#include "dte/nullspace.hpp"
#include "dte/paths.hpp"
#include "dte/traffic.hpp"

namespace dte {

enum class SolveMode { kEdgeMlu, kEdgeMaxflow, kPathMlu, kPathMaxflow };

std::string to_string(SolveMode m);
SolveMode solve_mode_from_string(const std::string& s);
inline bool is_path_mode(SolveMode m) {
  return m == SolveMode::kPathMlu || m == SolveMode::kPathMaxflow;
}
inline bool is_maxflow(SolveMode m) {
  return m == SolveMode::kEdgeMaxflow || m == SolveMode::kPathMaxflow;
}

// Per-commodity solver state owned by the originating switch. Warm starts
// re-use x / lambda / splits / slack across rounds and epochs.
struct CommodityState {
  Commodity commodity;
  int global_index = 0;
  Vec x;        // n, latest reported assignment
  Vec x0;       // n, base flow at unit routed fraction (edge modes)
  Vec lambda;   // n, dual of the l2 switch problem
  Vec w_null;   // n, null-space component N*Y tracked in edge space (l1)
  Vec t_slack;  // n, prox-ADMM slack dual (l1)
  Vec splits;   // T_paths (path modes)
  PathSet paths;
  double beta = 1.0;         // routed fraction (max-flow)
  double beta_target = 1.0;  // coordinator target minus dual
  std::vector<int> pinned_edges;  // in-edges of source, out-edges of sink
  bool routable = true;
};

// In-edges of the source plus out-edges of the sink ("no demand loops",
// "no demand leaks").
std::vector<int> loop_leak_pinned(const Topology& t, const Commodity& c);

// l2-regularized edge assignment via projected gradient on the dual:
//   min 0.5*||N'lam + C_k||^2 + lam'X0,  lam >= 0 on free edges,
// with C_k = eta/(eta+eps) * N'(x_prev - pull); primal recovery
// X = X0 + N(N'lam + C_k), pinned entries zeroed. `pull` is
// Xbar - Pbar + u from the latest inner broadcast.
void x_update_l2(CommodityState& s, const Vec& pull, const FlowOps& ops,
                 double eps, double eta, int pgd_iters,
                 std::uint64_t topo_version);

// l1-regularized (sparse) edge assignment via the three-step prox-ADMM:
//   x <- [soft_threshold(x0 + w + t, kappa/(eta*gamma))]_+ (pinned zeroed)
//   w <- (c - gamma*P(x0 + t - x)) / (1 + gamma)
//   t <- t + (x0 + w - x)
// where w tracks the null-space component N*Y and P projects onto null(M).
void x_update_l1(CommodityState& s, const Vec& pull, const FlowOps& ops,
                 double kappa, double eps, double eta, double gamma, int iters,
                 std::uint64_t topo_version);

// Path-split PGD on the reduced simplex with per-commodity step
// 1 / (lambda_max + eps/eta). `demand_scale` multiplies the commodity demand
// (the max-flow solver passes beta).
void x_update_path(CommodityState& s, const Vec& pull, double eps, double eta,
                   int pgd_iters, double demand_scale = 1.0);

// Max-flow coordinate descent: alternates the active mode's x-step at demand
// d_k*beta_k with a closed-form clamp-to-[0,1] beta step maximizing routed
// demand minus the quadratic coupling to the coordinator's target fraction.
// cap_scale (the mean capacity) keeps the step unit-invariant.
void x_update_maxflow(CommodityState& s, const Vec& pull, const FlowOps* ops,
                      bool path_mode, double eps, double eta, int pgd_iters,
                      int sweeps, std::uint64_t topo_version,
                      double cap_scale = 1.0);

// Zeroes failed-path splits and rescales survivors proportionally; falls back
// to uniform when the surviving mass is zero. All paths failed -> unroutable,
// zero splits. Returns true when anything changed (re-optimization trigger).
bool frr_redistribute(CommodityState& s);

// One switch: x-updates for every owned commodity in deterministic order and
// the aggregated sparse report.
class SwitchAgent {
 public:
  SwitchAgent(int switch_id, NodeId node) : id_(switch_id), node_(node) {}

  int id() const { return id_; }
  NodeId node() const { return node_; }
  std::vector<CommodityState>& commodities() { return commodities_; }
  const std::vector<CommodityState>& commodities() const { return commodities_; }

  // Runs the mode's x-update on every owned commodity. `pull` is
  // Xbar - Pbar + u reconstructed from the last broadcasts.
  void update_all(SolveMode mode, const Vec& pull, const FlowOps* ops,
                  const admm::AdmmConfig& cfg, std::uint64_t topo_version,
                  double cap_scale = 1.0);

  // Sum of owned commodities' assignments.
  Vec aggregate(int num_edges) const;

 private:
  int id_;
  NodeId node_;
  std::vector<CommodityState> commodities_;
};

}  // namespace dte
