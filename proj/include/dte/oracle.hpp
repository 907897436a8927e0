#pragma once

#include <vector>

#include "dte/paths.hpp"
#include "dte/topology.hpp"
#include "dte/traffic.hpp"

namespace dte::oracle {

// Reference solvers for acceptance tests, load scaling and regret baselines.
// Deliberately independent of the distributed solver machinery: this module
// links only against the graph/traffic layer and carries its own projection
// and search code.

struct PathMluResult {
  double mlu = 0.0;
  std::vector<Vec> splits;  // per commodity, aligned with PathSet columns
};

struct OracleOptions {
  int subgradient_iters = 100000;
  double tol = 1e-7;
  // Exhaustive vertex enumeration handles tiny instances exactly; the cap
  // bounds the number of candidate basis sets it may examine.
  int vertex_enum_budget = 200000;
  int size_cap = 10000;  // K * T_paths limit
};

// min-MLU over the product of (reduced) split simplices. Exact vertex
// enumeration of the epigraph LP on tiny instances, deterministic projected
// subgradient with Polyak-style steps otherwise.
PathMluResult exact_path_mlu(const Topology& t, const TrafficMatrix& tm,
                             const std::vector<PathSet>& paths,
                             const OracleOptions& opts = {});

// Edge-formulation optimum approximated from below-closure: enumerates all
// simple paths up to a hop bound, raising the bound until the optimum
// stabilizes, then solves the induced path problem.
double exact_edge_mlu(const Topology& t, const TrafficMatrix& tm,
                      const OracleOptions& opts = {});

struct MaxflowResult {
  double satisfaction = 0.0;       // routed / offered
  std::vector<double> fractions;   // per commodity
};

// max total routed demand under capacities, on the given path sets; exact
// penalty + projected subgradient with an adaptive penalty weight.
MaxflowResult exact_maxflow(const Topology& t, const TrafficMatrix& tm,
                            const std::vector<PathSet>& paths,
                            const OracleOptions& opts = {});

// All simple s->t paths with at most max_hops edges, lexicographic order.
std::vector<std::vector<EdgeId>> all_simple_paths(const Topology& t,
                                                  NodeId src, NodeId dst,
                                                  int max_hops);

}  // namespace dte::oracle
