#pragma once

#include <vector>

#include "dte/topology.hpp"
#include "dte/types.hpp"

namespace dte {

struct Path {
  std::vector<EdgeId> edges;
  double latency_ms = 0.0;
  bool available = true;  // false once a member edge has failed
};

// Pre-configured paths of one commodity plus the derived mask algebra:
// mask(e,t) = 1 iff path t crosses edge e, gram = mask' * mask, and
// lambda_max, the dominant eigenvalue of gram (power method).
struct PathSet {
  NodeId src = 0, dst = 0;
  int T_paths = 0;              // configured maximum
  std::vector<Path> paths;      // up to T_paths, sorted by latency
  Mat mask;                     // n x T_paths, zero column for missing paths
  Mat gram;                     // T_paths x T_paths
  double lambda_max = 0.0;
  std::vector<int> pinned;      // split indices pinned to zero

  int available_count() const;
  bool routable() const { return available_count() > 0; }

  // Edge image of a split vector scaled by demand: X = mask * y * d.
  Vec edge_flow(const Vec& splits, double demand) const;

  // Marks paths crossing any failed edge unavailable, zeroes their mask
  // columns and recomputes gram/lambda. `failed` uses the *current* edge ids.
  void apply_failures(const std::vector<EdgeId>& failed_edges);

  // Rewrites edge ids after a topology mutation (old_to_new from fail_link);
  // paths touching removed edges become unavailable.
  void remap_edges(const std::vector<EdgeId>& old_to_new, int new_num_edges);
};

// Yen's loopless k-shortest paths on latency weights with deterministic
// lexicographic tie-breaks. Returns up to T_paths simple paths; an
// unreachable sink yields an empty, unroutable set.
PathSet k_shortest_paths(const Topology& t, NodeId src, NodeId dst,
                         int T_paths);

// Dominant eigenvalue by `iters` power-method iterations (deterministic
// start). Exposed for testing against the exact eigenvalue.
double power_method_lambda(const Mat& gram, int iters = 20);

}  // namespace dte
