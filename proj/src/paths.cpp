#include "dte/paths.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <set>

namespace dte {

int PathSet::available_count() const {
  int c = 0;
  for (const Path& p : paths)
    if (p.available) ++c;
  return c;
}

Vec PathSet::edge_flow(const Vec& splits, double demand) const {
  return mask * (splits * demand);
}

namespace {

void rebuild_algebra(PathSet& ps, int num_edges) {
  ps.mask = Mat::Zero(num_edges, ps.T_paths);
  ps.pinned.clear();
  for (int t = 0; t < ps.T_paths; ++t) {
    if (t >= static_cast<int>(ps.paths.size()) || !ps.paths[t].available) {
      ps.pinned.push_back(t);
      continue;
    }
    for (EdgeId e : ps.paths[t].edges) ps.mask(e, t) = 1.0;
  }
  ps.gram = ps.mask.transpose() * ps.mask;
  ps.lambda_max = power_method_lambda(ps.gram);
}

}  // namespace

void PathSet::apply_failures(const std::vector<EdgeId>& failed_edges) {
  std::set<EdgeId> failed(failed_edges.begin(), failed_edges.end());
  for (Path& p : paths) {
    if (!p.available) continue;
    for (EdgeId e : p.edges)
      if (failed.count(e)) {
        p.available = false;
        break;
      }
  }
  rebuild_algebra(*this, static_cast<int>(mask.rows()));
}

void PathSet::remap_edges(const std::vector<EdgeId>& old_to_new,
                          int new_num_edges) {
  for (Path& p : paths) {
    if (!p.available) {
      p.edges.clear();
      continue;
    }
    for (EdgeId& e : p.edges) {
      EdgeId ne = old_to_new[e];
      if (ne < 0) {
        p.available = false;
        break;
      }
      e = ne;
    }
    if (!p.available) p.edges.clear();
  }
  rebuild_algebra(*this, new_num_edges);
}

double power_method_lambda(const Mat& gram, int iters) {
  int T = static_cast<int>(gram.rows());
  if (T == 0) return 0.0;
  double max_diag = gram.diagonal().maxCoeff();
  if (max_diag <= 0.0) return 0.0;
  Vec v = Vec::Ones(T) / std::sqrt(double(T));
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vec w = gram * v;
    double norm = w.norm();
    if (norm <= 0.0) return max_diag;
    v = w / norm;
    lambda = v.dot(gram * v);
  }
  // Both the Rayleigh quotient and the largest diagonal entry are lower
  // bounds on the true dominant eigenvalue.
  return std::max(lambda, max_diag);
}

namespace {

struct Banned {
  std::vector<char> edges;
  std::vector<char> nodes;
};

std::optional<std::vector<EdgeId>> dijkstra_banned(const Topology& t,
                                                   NodeId src, NodeId dst,
                                                   const Banned& ban) {
  const double inf = std::numeric_limits<double>::infinity();
  int m = t.num_nodes();
  std::vector<double> dist(m, inf);
  std::vector<EdgeId> via(m, -1);
  using Item = std::tuple<double, EdgeId, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  if (ban.nodes[src]) return std::nullopt;
  dist[src] = 0.0;
  pq.emplace(0.0, -1, src);
  while (!pq.empty()) {
    auto [d, ve, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (EdgeId e : t.out_edges(v)) {
      if (ban.edges[e]) continue;
      NodeId w = t.edge(e).tail;
      if (ban.nodes[w] && w != dst) continue;
      double nd = d + t.edge(e).latency_ms;
      if (nd < dist[w] || (nd == dist[w] && via[w] != -1 && e < via[w])) {
        dist[w] = nd;
        via[w] = e;
        pq.emplace(nd, e, w);
      }
    }
  }
  if (dst != src && via[dst] == -1) return std::nullopt;
  std::vector<EdgeId> path;
  for (NodeId v = dst; v != src;) {
    path.push_back(via[v]);
    v = t.edge(via[v]).head;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double path_latency(const Topology& t, const std::vector<EdgeId>& p) {
  double s = 0.0;
  for (EdgeId e : p) s += t.edge(e).latency_ms;
  return s;
}

// (latency, edge sequence) ordering makes candidate selection deterministic.
bool path_less(const Topology& t, const std::vector<EdgeId>& a,
               const std::vector<EdgeId>& b) {
  double la = path_latency(t, a), lb = path_latency(t, b);
  if (la != lb) return la < lb;
  return a < b;
}

}  // namespace

PathSet k_shortest_paths(const Topology& t, NodeId src, NodeId dst,
                         int T_paths) {
  PathSet ps;
  ps.src = src;
  ps.dst = dst;
  ps.T_paths = T_paths;

  std::vector<std::vector<EdgeId>> found;
  auto first = t.shortest_path(src, dst);
  if (first) {
    found.push_back(*first);
    std::set<std::vector<EdgeId>> candidates;  // ordered set dedupes spurs
    while (static_cast<int>(found.size()) < T_paths) {
      const std::vector<EdgeId>& prev = found.back();
      Banned ban;
      ban.edges.assign(t.num_edges(), 0);
      ban.nodes.assign(t.num_nodes(), 0);
      // Spur from every node of the previous path.
      std::vector<NodeId> prev_nodes{src};
      for (EdgeId e : prev) prev_nodes.push_back(t.edge(e).tail);
      for (size_t i = 0; i + 1 < prev_nodes.size(); ++i) {
        NodeId spur = prev_nodes[i];
        std::vector<EdgeId> root(prev.begin(), prev.begin() + i);
        std::fill(ban.edges.begin(), ban.edges.end(), 0);
        std::fill(ban.nodes.begin(), ban.nodes.end(), 0);
        for (const auto& p : found) {
          if (p.size() >= i &&
              std::equal(root.begin(), root.end(), p.begin()) &&
              p.size() > i)
            ban.edges[p[i]] = 1;
        }
        for (size_t j = 0; j < i; ++j) ban.nodes[prev_nodes[j]] = 1;
        auto spur_path = dijkstra_banned(t, spur, dst, ban);
        if (!spur_path) continue;
        std::vector<EdgeId> total = root;
        total.insert(total.end(), spur_path->begin(), spur_path->end());
        if (std::find(found.begin(), found.end(), total) == found.end())
          candidates.insert(std::move(total));
      }
      if (candidates.empty()) break;
      auto best = candidates.begin();
      for (auto it = candidates.begin(); it != candidates.end(); ++it)
        if (path_less(t, *it, *best)) best = it;
      found.push_back(*best);
      candidates.erase(best);
    }
  }

  for (const auto& p : found) {
    Path path;
    path.edges = p;
    path.latency_ms = path_latency(t, p);
    ps.paths.push_back(std::move(path));
  }
  std::stable_sort(ps.paths.begin(), ps.paths.end(),
                   [&](const Path& a, const Path& b) {
                     if (a.latency_ms != b.latency_ms)
                       return a.latency_ms < b.latency_ms;
                     return a.edges < b.edges;
                   });
  rebuild_algebra(ps, t.num_edges());
  return ps;
}

}  // namespace dte
