#pragma once

#include <vector>

#include "dte/paths.hpp"
#include "dte/topology.hpp"
#include "dte/traffic.hpp"

namespace dte::sim {

// max_e (sum of flows on e) / C_e.
double mlu_of(const Vec& total_flow, const Topology& t);

// Ratio of routed flow to total demand given per-commodity routed fractions.
double demand_satisfaction(const std::vector<double>& routed_fraction,
                           const TrafficMatrix& tm);

struct StretchStats {
  double median = 1.0;
  double p95 = 1.0;
  std::vector<double> per_commodity;
};

// Demand-split-weighted path length over the shortest-path length, measured
// on latency. Unroutable or zero-demand commodities are skipped.
StretchStats stretch_from_splits(const std::vector<const PathSet*>& paths,
                                 const std::vector<Vec>& splits,
                                 const Topology& t,
                                 const std::vector<Commodity>& commodities);

// One stripped path of an edge assignment's flow decomposition.
struct DecomposedPath {
  std::vector<EdgeId> edges;
  double flow = 0.0;
  double latency_ms = 0.0;
};

// Repeatedly strips the latency-shortest source-sink path inside the support
// of the assignment, removing the bottleneck flow each time. Conserves total
// flow up to the cutoff for loop-free assignments.
std::vector<DecomposedPath> decompose_flow(const Vec& x, const Topology& t,
                                           NodeId src, NodeId dst,
                                           double cutoff = 1e-9);

// Stretch of edge assignments via flow decomposition.
StretchStats stretch_from_assignments(const std::vector<Vec>& assignments,
                                      const Topology& t,
                                      const std::vector<Commodity>& commodities);

// True when the positive support of x (entries > threshold) is acyclic.
bool support_acyclic(const Vec& x, const Topology& t, double threshold);

}  // namespace dte::sim
