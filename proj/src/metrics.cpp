#include "dte/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace dte::sim {

double mlu_of(const Vec& total_flow, const Topology& t) {
  double u = 0.0;
  for (int e = 0; e < total_flow.size(); ++e)
    u = std::max(u, total_flow[e] / t.edge(e).capacity);
  return u;
}

double demand_satisfaction(const std::vector<double>& routed_fraction,
                           const TrafficMatrix& tm) {
  double total = 0.0, routed = 0.0;
  for (size_t k = 0; k < tm.commodities.size(); ++k) {
    total += tm.commodities[k].demand;
    routed += tm.commodities[k].demand *
              (k < routed_fraction.size() ? routed_fraction[k] : 1.0);
  }
  return total > 0 ? routed / total : 1.0;
}

namespace {

StretchStats finalize(std::vector<double> values) {
  StretchStats st;
  st.per_commodity = values;
  if (values.empty()) return st;
  std::sort(values.begin(), values.end());
  st.median = values[values.size() / 2];
  st.p95 = values[std::min(values.size() - 1,
                           static_cast<size_t>(0.95 * values.size()))];
  return st;
}

}  // namespace

StretchStats stretch_from_splits(const std::vector<const PathSet*>& paths,
                                 const std::vector<Vec>& splits,
                                 const Topology& t,
                                 const std::vector<Commodity>& commodities) {
  std::vector<double> values;
  for (size_t k = 0; k < commodities.size(); ++k) {
    const PathSet* ps = paths[k];
    if (!ps || !ps->routable()) continue;
    double shortest = t.shortest_path_latency(commodities[k].src,
                                              commodities[k].dst);
    if (!(shortest > 0.0) || !std::isfinite(shortest)) continue;
    double weighted = 0.0, mass = 0.0;
    for (int p = 0; p < splits[k].size(); ++p) {
      if (p >= static_cast<int>(ps->paths.size())) break;
      if (!ps->paths[p].available || splits[k][p] <= 0.0) continue;
      weighted += splits[k][p] * ps->paths[p].latency_ms;
      mass += splits[k][p];
    }
    if (mass <= 0.0) continue;
    values.push_back(weighted / mass / shortest);
  }
  return finalize(std::move(values));
}

std::vector<DecomposedPath> decompose_flow(const Vec& x, const Topology& t,
                                           NodeId src, NodeId dst,
                                           double cutoff) {
  Vec rem = x;
  std::vector<DecomposedPath> out;
  const double inf = std::numeric_limits<double>::infinity();
  for (int guard = 0; guard < 4 * t.num_edges(); ++guard) {
    // Latency-shortest path restricted to the remaining support.
    std::vector<double> dist(t.num_nodes(), inf);
    std::vector<EdgeId> via(t.num_nodes(), -1);
    using Item = std::tuple<double, EdgeId, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[src] = 0.0;
    pq.emplace(0.0, -1, src);
    while (!pq.empty()) {
      auto [d, ve, v] = pq.top();
      pq.pop();
      if (d > dist[v]) continue;
      for (EdgeId e : t.out_edges(v)) {
        if (rem[e] <= cutoff) continue;
        NodeId w = t.edge(e).tail;
        double nd = d + t.edge(e).latency_ms;
        if (nd < dist[w] || (nd == dist[w] && via[w] != -1 && e < via[w])) {
          dist[w] = nd;
          via[w] = e;
          pq.emplace(nd, e, w);
        }
      }
    }
    if (via[dst] == -1) break;
    DecomposedPath p;
    double bottleneck = inf;
    for (NodeId v = dst; v != src;) {
      p.edges.push_back(via[v]);
      bottleneck = std::min(bottleneck, rem[via[v]]);
      v = t.edge(via[v]).head;
    }
    std::reverse(p.edges.begin(), p.edges.end());
    p.flow = bottleneck;
    for (EdgeId e : p.edges) {
      p.latency_ms += t.edge(e).latency_ms;
      rem[e] -= bottleneck;
    }
    out.push_back(std::move(p));
  }
  return out;
}

StretchStats stretch_from_assignments(
    const std::vector<Vec>& assignments, const Topology& t,
    const std::vector<Commodity>& commodities) {
  std::vector<double> values;
  for (size_t k = 0; k < commodities.size(); ++k) {
    if (assignments[k].size() == 0) continue;
    double shortest =
        t.shortest_path_latency(commodities[k].src, commodities[k].dst);
    if (!(shortest > 0.0) || !std::isfinite(shortest)) continue;
    auto paths = decompose_flow(assignments[k], t, commodities[k].src,
                                commodities[k].dst,
                                1e-7 * std::max(1.0, commodities[k].demand));
    double weighted = 0.0, mass = 0.0;
    for (const auto& p : paths) {
      weighted += p.flow * p.latency_ms;
      mass += p.flow;
    }
    if (mass <= 0.0) continue;
    values.push_back(weighted / mass / shortest);
  }
  return finalize(std::move(values));
}

bool support_acyclic(const Vec& x, const Topology& t, double threshold) {
  // Kahn's algorithm on the support digraph.
  std::vector<int> indeg(t.num_nodes(), 0);
  std::vector<std::vector<NodeId>> adj(t.num_nodes());
  int edges = 0;
  for (int e = 0; e < x.size(); ++e)
    if (x[e] > threshold) {
      adj[t.edge(e).head].push_back(t.edge(e).tail);
      indeg[t.edge(e).tail]++;
      ++edges;
    }
  if (edges == 0) return true;
  std::vector<NodeId> stack;
  for (NodeId v = 0; v < t.num_nodes(); ++v)
    if (indeg[v] == 0) stack.push_back(v);
  int removed = 0;
  std::vector<char> seen(t.num_nodes(), 0);
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    if (seen[v]) continue;
    seen[v] = 1;
    ++removed;
    for (NodeId w : adj[v])
      if (--indeg[w] == 0) stack.push_back(w);
  }
  return removed == t.num_nodes();
}

}  // namespace dte::sim
