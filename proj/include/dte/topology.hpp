#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dte/types.hpp"

namespace dte {

struct Edge {
  NodeId head = 0;  // edge leaves this node
  NodeId tail = 0;  // edge enters this node
  double capacity = 0.0;
  double latency_ms = 0.0;
  // Undirected input link this edge was expanded from, and its reverse twin.
  int link = -1;
  EdgeId reverse = -1;
};

// Directed simple graph. Undirected input links are expanded into two
// directed edges, each carrying the full stated capacity (full-duplex).
// Immutable after construction; failures produce a new Topology value.
class Topology {
 public:
  Topology() = default;
  Topology(int num_nodes, std::vector<Edge> edges,
           std::vector<std::string> node_names = {});

  int num_nodes() const { return m_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }

  const std::string& node_name(NodeId v) const { return node_names_[v]; }
  // -1 when the name is unknown.
  NodeId node_by_name(const std::string& name) const;

  Vec capacities() const;

  const std::vector<EdgeId>& out_edges(NodeId v) const { return out_[v]; }
  const std::vector<EdgeId>& in_edges(NodeId v) const { return in_[v]; }

  // Directed edge u->v, or -1.
  EdgeId find_edge(NodeId u, NodeId v) const;

  bool weakly_connected() const;

  // Dijkstra on latency weights; deterministic lexicographic tie-break on
  // edge indices. Returns edge-index path, or nullopt if unreachable.
  std::optional<std::vector<EdgeId>> shortest_path(NodeId src, NodeId dst) const;
  // Latency of the shortest path, +inf if unreachable.
  double shortest_path_latency(NodeId src, NodeId dst) const;

  // All-pairs shortest-path latency matrix (m x m).
  Mat latency_matrix() const;

  // Removes both directions of the undirected link containing `e`. The result
  // is a fresh Topology; anything factored from this one (incidence,
  // null-space basis, base flows, path sets) is stale for the result.
  // `old_to_new`, when given, receives the edge-index remapping (-1 = gone).
  Topology fail_link(EdgeId e, std::vector<EdgeId>* old_to_new = nullptr) const;

  // Generation counter: bumped on every fail_link so downstream factorizations
  // can detect staleness.
  std::uint64_t version() const { return version_; }

 private:
  int m_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::string> node_names_;
  std::vector<std::vector<EdgeId>> out_, in_;
  std::uint64_t version_ = 0;
};

// Node-edge incidence matrix: M(i,j) = +1 if edge j leaves node i, -1 if it
// enters node i, 0 otherwise.
SpMat incidence_matrix(const Topology& t);

struct LoadOptions {
  // Used when a link line carries no latency and no coordinates exist.
  double default_latency_ms = 1.0;
};

// Edge-list text format: one "u v capacity [latency_ms]" per line, '#'
// comments. Each line is an undirected link, expanded into two directed
// edges with the full stated capacity each.
Topology load_edge_list(const std::string& text, const LoadOptions& opts = {});
Topology load_edge_list_file(const std::string& path,
                             const LoadOptions& opts = {});

// Minimal GraphML-subset reader: <node id> with Latitude/Longitude data keys,
// <edge source target> with an optional LinkSpeed data key (Gbps). Latency is
// great-circle distance at 2/3 c when both endpoints have coordinates,
// otherwise opts.default_latency_ms.
Topology load_graphml(const std::string& text, const LoadOptions& opts = {});
Topology load_graphml_file(const std::string& path,
                           const LoadOptions& opts = {});

// Propagation latency (ms) along a great circle at 2/3 the speed of light.
double great_circle_latency_ms(double lat1_deg, double lon1_deg,
                               double lat2_deg, double lon2_deg);

}  // namespace dte
