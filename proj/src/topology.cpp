#include "dte/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <sstream>

namespace dte {

Topology::Topology(int num_nodes, std::vector<Edge> edges,
                   std::vector<std::string> node_names)
    : m_(num_nodes), edges_(std::move(edges)), node_names_(std::move(node_names)) {
  if (m_ < 2) throw InputError("topology needs at least 2 nodes");
  if (node_names_.empty()) {
    node_names_.resize(m_);
    for (int v = 0; v < m_; ++v) node_names_[v] = std::to_string(v);
  }
  out_.assign(m_, {});
  in_.assign(m_, {});
  for (int e = 0; e < num_edges(); ++e) {
    const Edge& ed = edges_[e];
    if (ed.head < 0 || ed.head >= m_ || ed.tail < 0 || ed.tail >= m_ ||
        ed.head == ed.tail)
      throw InputError("edge " + std::to_string(e) + " references bad nodes");
    if (!(ed.capacity > 0.0))
      throw InputError("edge " + std::to_string(e) + " has non-positive capacity");
    if (ed.latency_ms < 0.0)
      throw InputError("edge " + std::to_string(e) + " has negative latency");
    out_[ed.head].push_back(e);
    in_[ed.tail].push_back(e);
  }
  if (!weakly_connected()) throw InputError("graph is not weakly connected");
}

NodeId Topology::node_by_name(const std::string& name) const {
  for (int v = 0; v < m_; ++v)
    if (node_names_[v] == name) return v;
  return -1;
}

Vec Topology::capacities() const {
  Vec c(num_edges());
  for (int e = 0; e < num_edges(); ++e) c[e] = edges_[e].capacity;
  return c;
}

EdgeId Topology::find_edge(NodeId u, NodeId v) const {
  for (EdgeId e : out_[u])
    if (edges_[e].tail == v) return e;
  return -1;
}

bool Topology::weakly_connected() const {
  if (m_ == 0) return false;
  std::vector<char> seen(m_, 0);
  std::vector<NodeId> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    auto visit = [&](NodeId w) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
    };
    for (EdgeId e : out_[v]) visit(edges_[e].tail);
    for (EdgeId e : in_[v]) visit(edges_[e].head);
  }
  return count == m_;
}

std::optional<std::vector<EdgeId>> Topology::shortest_path(NodeId src,
                                                           NodeId dst) const {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(m_, inf);
  std::vector<EdgeId> via(m_, -1);
  // (dist, via-edge, node): the edge index participates in ordering so ties
  // resolve lexicographically.
  using Item = std::tuple<double, EdgeId, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.emplace(0.0, -1, src);
  while (!pq.empty()) {
    auto [d, ve, v] = pq.top();
    pq.pop();
    if (d > dist[v] || (d == dist[v] && ve > via[v])) continue;
    for (EdgeId e : out_[v]) {
      NodeId w = edges_[e].tail;
      double nd = d + edges_[e].latency_ms;
      if (nd < dist[w] || (nd == dist[w] && via[w] != -1 && e < via[w])) {
        dist[w] = nd;
        via[w] = e;
        pq.emplace(nd, e, w);
      }
    }
  }
  if (via[dst] == -1 && dst != src) return std::nullopt;
  std::vector<EdgeId> path;
  for (NodeId v = dst; v != src;) {
    path.push_back(via[v]);
    v = edges_[via[v]].head;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double Topology::shortest_path_latency(NodeId src, NodeId dst) const {
  auto p = shortest_path(src, dst);
  if (!p) return std::numeric_limits<double>::infinity();
  double lat = 0.0;
  for (EdgeId e : *p) lat += edges_[e].latency_ms;
  return lat;
}

Mat Topology::latency_matrix() const {
  Mat d(m_, m_);
  const double inf = std::numeric_limits<double>::infinity();
  for (int s = 0; s < m_; ++s) {
    std::vector<double> dist(m_, inf);
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[s] = 0.0;
    pq.emplace(0.0, s);
    while (!pq.empty()) {
      auto [dd, v] = pq.top();
      pq.pop();
      if (dd > dist[v]) continue;
      for (EdgeId e : out_[v]) {
        NodeId w = edges_[e].tail;
        double nd = dd + edges_[e].latency_ms;
        if (nd < dist[w]) {
          dist[w] = nd;
          pq.emplace(nd, w);
        }
      }
    }
    for (int t = 0; t < m_; ++t) d(s, t) = dist[t];
  }
  return d;
}

Topology Topology::fail_link(EdgeId e, std::vector<EdgeId>* old_to_new) const {
  if (e < 0 || e >= num_edges()) throw InputError("fail_link: no such edge");
  int link = edges_[e].link;
  std::vector<Edge> kept;
  std::vector<EdgeId> remap(num_edges(), -1);
  for (int i = 0; i < num_edges(); ++i) {
    bool gone = (link >= 0) ? edges_[i].link == link
                            : (i == e || i == edges_[e].reverse);
    if (gone) continue;
    remap[i] = static_cast<EdgeId>(kept.size());
    kept.push_back(edges_[i]);
  }
  for (Edge& ed : kept)
    if (ed.reverse >= 0) ed.reverse = remap[ed.reverse];
  if (old_to_new) *old_to_new = remap;

  Topology t;
  t.m_ = m_;
  t.edges_ = std::move(kept);
  t.node_names_ = node_names_;
  t.version_ = version_ + 1;
  t.out_.assign(m_, {});
  t.in_.assign(m_, {});
  for (int i = 0; i < t.num_edges(); ++i) {
    t.out_[t.edges_[i].head].push_back(i);
    t.in_[t.edges_[i].tail].push_back(i);
  }
  // Failures may disconnect the graph; commodities get flagged unroutable
  // downstream instead of failing here.
  return t;
}

SpMat incidence_matrix(const Topology& t) {
  SpMat M(t.num_nodes(), t.num_edges());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * t.num_edges());
  for (int e = 0; e < t.num_edges(); ++e) {
    trip.emplace_back(t.edge(e).head, e, +1.0);
    trip.emplace_back(t.edge(e).tail, e, -1.0);
  }
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

double great_circle_latency_ms(double lat1_deg, double lon1_deg,
                               double lat2_deg, double lon2_deg) {
  constexpr double kEarthRadiusKm = 6371.0;
  constexpr double kDegToRad = M_PI / 180.0;
  // 2/3 c in km per ms.
  constexpr double kKmPerMs = 299792.458 * (2.0 / 3.0) / 1e6 * 1e3;
  double p1 = lat1_deg * kDegToRad, p2 = lat2_deg * kDegToRad;
  double dp = (lat2_deg - lat1_deg) * kDegToRad;
  double dl = (lon2_deg - lon1_deg) * kDegToRad;
  double a = std::sin(dp / 2) * std::sin(dp / 2) +
             std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  double km = 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
  return km / kKmPerMs;
}

namespace {

struct LinkLine {
  std::string u, v;
  double cap;
  double lat;  // < 0 = unspecified
};

Topology build_from_links(const std::vector<LinkLine>& links,
                          const std::map<std::string, std::pair<double, double>>& coords,
                          const LoadOptions& opts) {
  std::vector<std::string> names;
  std::map<std::string, NodeId> index;
  auto intern = [&](const std::string& s) {
    auto it = index.find(s);
    if (it != index.end()) return it->second;
    NodeId id = static_cast<NodeId>(names.size());
    names.push_back(s);
    index.emplace(s, id);
    return id;
  };
  std::vector<Edge> edges;
  int link_id = 0;
  for (const LinkLine& l : links) {
    NodeId a = intern(l.u), b = intern(l.v);
    if (a == b) throw InputError("self-loop link " + l.u + "-" + l.v);
    if (!(l.cap > 0.0))
      throw InputError("non-positive capacity on link " + l.u + "-" + l.v);
    double lat = l.lat;
    if (lat < 0.0) {
      auto ia = coords.find(l.u), ib = coords.find(l.v);
      if (ia != coords.end() && ib != coords.end())
        lat = great_circle_latency_ms(ia->second.first, ia->second.second,
                                      ib->second.first, ib->second.second);
      else
        lat = opts.default_latency_ms;
    }
    EdgeId fwd = static_cast<EdgeId>(edges.size());
    edges.push_back({a, b, l.cap, lat, link_id, fwd + 1});
    edges.push_back({b, a, l.cap, lat, link_id, fwd});
    ++link_id;
  }
  int m = static_cast<int>(names.size());
  if (m < 2) throw InputError("topology needs at least 2 nodes");
  return Topology(m, std::move(edges), std::move(names));
}

}  // namespace

Topology load_edge_list(const std::string& text, const LoadOptions& opts) {
  std::vector<LinkLine> links;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    LinkLine l;
    l.lat = -1.0;
    if (!(ls >> l.u)) continue;  // blank line
    if (!(ls >> l.v >> l.cap))
      throw InputError("edge list line " + std::to_string(lineno) +
                       ": expected 'u v capacity [latency_ms]'");
    double lat;
    if (ls >> lat) l.lat = lat;
    links.push_back(l);
  }
  return build_from_links(links, {}, opts);
}

Topology load_edge_list_file(const std::string& path, const LoadOptions& opts) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_edge_list(ss.str(), opts);
}

namespace {

// Just enough XML scanning for Topology Zoo style GraphML. Attributes are
// matched textually; nesting beyond node/edge/data is ignored.
std::string attr_value(const std::string& tag, const std::string& attr) {
  auto pos = tag.find(attr + "=\"");
  if (pos == std::string::npos) return {};
  pos += attr.size() + 2;
  auto end = tag.find('"', pos);
  return tag.substr(pos, end - pos);
}

}  // namespace

Topology load_graphml(const std::string& text, const LoadOptions& opts) {
  // Map GraphML key ids to semantic names (Latitude/Longitude/LinkSpeed).
  std::map<std::string, std::string> key_name;
  std::map<std::string, std::pair<double, double>> coords;
  std::map<std::string, double> partial_lat, partial_lon;
  std::vector<LinkLine> links;

  size_t pos = 0;
  std::string cur_node, cur_edge_u, cur_edge_v;
  double cur_speed = -1.0;
  bool in_node = false, in_edge = false;
  while (true) {
    size_t lt = text.find('<', pos);
    if (lt == std::string::npos) break;
    size_t gt = text.find('>', lt);
    if (gt == std::string::npos) break;
    std::string tag = text.substr(lt + 1, gt - lt - 1);
    pos = gt + 1;
    if (tag.rfind("key", 0) == 0) {
      key_name[attr_value(tag, "id")] = attr_value(tag, "attr.name");
    } else if (tag.rfind("node", 0) == 0) {
      cur_node = attr_value(tag, "id");
      in_node = true;
    } else if (tag == "/node") {
      in_node = false;
    } else if (tag.rfind("edge", 0) == 0) {
      cur_edge_u = attr_value(tag, "source");
      cur_edge_v = attr_value(tag, "target");
      cur_speed = -1.0;
      in_edge = true;
      if (!tag.empty() && tag.back() == '/') {
        links.push_back({cur_edge_u, cur_edge_v, 1.0, -1.0});
        in_edge = false;
      }
    } else if (tag == "/edge") {
      double cap = cur_speed > 0 ? cur_speed : 1.0;
      links.push_back({cur_edge_u, cur_edge_v, cap, -1.0});
      in_edge = false;
    } else if (tag.rfind("data", 0) == 0) {
      std::string key = key_name.count(attr_value(tag, "key"))
                            ? key_name[attr_value(tag, "key")]
                            : attr_value(tag, "key");
      size_t end = text.find("</data>", pos);
      if (end == std::string::npos) break;
      std::string value = text.substr(pos, end - pos);
      pos = end + 7;
      try {
        if (in_node && key == "Latitude") partial_lat[cur_node] = std::stod(value);
        else if (in_node && key == "Longitude") partial_lon[cur_node] = std::stod(value);
        else if (in_edge && (key == "LinkSpeed" || key == "LinkSpeedRaw"))
          cur_speed = std::stod(value);
      } catch (const std::exception&) {
        // non-numeric data value: ignore
      }
    }
  }
  for (const auto& [node, lat] : partial_lat) {
    auto it = partial_lon.find(node);
    if (it != partial_lon.end()) coords[node] = {lat, it->second};
  }
  return build_from_links(links, coords, opts);
}

Topology load_graphml_file(const std::string& path, const LoadOptions& opts) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_graphml(ss.str(), opts);
}

}  // namespace dte
