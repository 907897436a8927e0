#include "dte/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dte::oracle {

namespace {

// Michelot's projection onto {y >= 0, sum y = radius} restricted to the
// active coordinate set; differs from the solver-side sort-and-threshold
// implementation on purpose.
void project_simplex_michelot(Vec& y, const std::vector<int>& active,
                              double radius) {
  std::vector<int> idx = active;
  while (true) {
    double sum = 0.0;
    for (int i : idx) sum += y[i];
    double shift = (sum - radius) / double(idx.size());
    bool removed = false;
    std::vector<int> next;
    next.reserve(idx.size());
    for (int i : idx) {
      double v = y[i] - shift;
      if (v <= 0.0) {
        y[i] = 0.0;
        removed = true;
      } else {
        next.push_back(i);
      }
    }
    if (!removed) {
      for (int i : idx) y[i] -= shift;
      break;
    }
    idx = std::move(next);
    if (idx.empty()) break;
  }
}

struct Columns {
  // Per commodity: active path list as edge-index vectors plus demand.
  std::vector<std::vector<std::vector<EdgeId>>> paths;
  std::vector<double> demand;
  std::vector<int> offset;  // into the stacked variable vector
  int total = 0;

  Vec flows(const Vec& y, int n) const {
    Vec f = Vec::Zero(n);
    for (size_t k = 0; k < paths.size(); ++k)
      for (size_t p = 0; p < paths[k].size(); ++p) {
        double amount = demand[k] * y[offset[k] + p];
        if (amount == 0.0) continue;
        for (EdgeId e : paths[k][p]) f[e] += amount;
      }
    return f;
  }
};

Columns make_columns(const TrafficMatrix& tm,
                     const std::vector<PathSet>& paths) {
  Columns cols;
  for (size_t k = 0; k < tm.commodities.size(); ++k) {
    std::vector<std::vector<EdgeId>> ps;
    for (const Path& p : paths[k].paths)
      if (p.available) ps.push_back(p.edges);
    if (ps.empty()) continue;  // unroutable: contributes nothing
    cols.offset.push_back(cols.total);
    cols.total += static_cast<int>(ps.size());
    cols.paths.push_back(std::move(ps));
    cols.demand.push_back(tm.commodities[k].demand);
  }
  return cols;
}

double mlu_value(const Vec& f, const Vec& C, int* argmax = nullptr) {
  double u = 0.0;
  int arg = 0;
  for (int e = 0; e < f.size(); ++e) {
    double v = f[e] / C[e];
    if (v > u) {
      u = v;
      arg = e;
    }
  }
  if (argmax) *argmax = arg;
  return u;
}

// Exhaustive enumeration of basic solutions of
//   min U  s.t.  per-k sum y = 1, y >= 0, flows(y) <= U*C, U >= 0.
// Returns false when the candidate count exceeds the budget.
bool vertex_enum_mlu(const Columns& cols, const Vec& C, int budget,
                     double* best_u, Vec* best_y) {
  const int K = static_cast<int>(cols.paths.size());
  const int n = static_cast<int>(C.size());
  const int V = cols.total;
  const int dim = V + 1;
  const int need = dim - K;  // tight inequalities completing a basis
  if (need < 0) return false;

  // Inequality rows: y_i >= 0 (V), U >= 0 (1), capacity rows (n).
  const int cands = V + 1 + n;
  double combos = 1.0;
  for (int i = 0; i < need; ++i) combos *= double(cands - i) / double(i + 1);
  if (combos > double(budget)) return false;

  // Row builders over variables (y..., U).
  Mat G = Mat::Zero(n, dim);  // flows - U*C
  for (int k = 0; k < K; ++k)
    for (size_t p = 0; p < cols.paths[k].size(); ++p)
      for (EdgeId e : cols.paths[k][p])
        G(e, cols.offset[k] + p) += cols.demand[k];
  for (int e = 0; e < n; ++e) G(e, V) = -C[e];

  Mat A(dim, dim);
  Vec b(dim), sol(dim);
  for (int k = 0; k < K; ++k) {
    A.row(k).setZero();
    for (size_t p = 0; p < cols.paths[k].size(); ++p)
      A(k, cols.offset[k] + p) = 1.0;
    b[k] = 1.0;
  }

  *best_u = std::numeric_limits<double>::infinity();
  std::vector<int> pick(need);
  std::iota(pick.begin(), pick.end(), 0);
  auto advance = [&]() {
    int i = need - 1;
    while (i >= 0 && pick[i] == cands - need + i) --i;
    if (i < 0) return false;
    ++pick[i];
    for (int j = i + 1; j < need; ++j) pick[j] = pick[j - 1] + 1;
    return true;
  };

  if (need == 0) {
    // Degenerate: K equalities already determine everything (never happens
    // with U present); skip.
    return false;
  }
  do {
    for (int i = 0; i < need; ++i) {
      int c = pick[i];
      int row = K + i;
      if (c < V) {
        A.row(row).setZero();
        A(row, c) = 1.0;
        b[row] = 0.0;
      } else if (c == V) {
        A.row(row).setZero();
        A(row, V) = 1.0;
        b[row] = 0.0;
      } else {
        A.row(row) = G.row(c - V - 1);
        b[row] = 0.0;
      }
    }
    Eigen::FullPivLU<Mat> lu(A);
    if (!lu.isInvertible()) continue;
    sol = lu.solve(b);
    double U = sol[V];
    if (!(U >= -1e-9) || U >= *best_u) continue;
    bool feasible = true;
    for (int i = 0; i < V && feasible; ++i) feasible = sol[i] >= -1e-9;
    if (feasible) {
      Vec g = G * sol;
      for (int e = 0; e < n && feasible; ++e) feasible = g[e] <= 1e-9;
    }
    if (feasible) {
      *best_u = std::max(U, 0.0);
      *best_y = sol.head(V);
    }
  } while (advance());
  return std::isfinite(*best_u);
}

// Deterministic projected subgradient with a Polyak-style step against a
// receding target.
double subgradient_mlu(const Columns& cols, const Vec& C,
                       const OracleOptions& opts, Vec* best_y_out) {
  const int K = static_cast<int>(cols.paths.size());
  const int V = cols.total;
  const int n = static_cast<int>(C.size());
  Vec y(V);
  std::vector<std::vector<int>> active(K);
  for (int k = 0; k < K; ++k) {
    int pk = static_cast<int>(cols.paths[k].size());
    for (int p = 0; p < pk; ++p) {
      y[cols.offset[k] + p] = 1.0 / pk;
      active[k].push_back(cols.offset[k] + p);
    }
  }
  double best = std::numeric_limits<double>::infinity();
  Vec best_y = y;
  Vec g = Vec::Zero(V);
  double last_improvement_at = 0;
  for (int it = 0; it < opts.subgradient_iters; ++it) {
    Vec f = cols.flows(y, n);
    int e_star = 0;
    double h = mlu_value(f, C, &e_star);
    if (h < best - opts.tol) {
      best = h;
      best_y = y;
      last_improvement_at = it;
    }
    if (it - last_improvement_at > opts.subgradient_iters / 4 &&
        it > opts.subgradient_iters / 10)
      break;  // stalled well below the iteration budget
    g.setZero();
    for (int k = 0; k < K; ++k)
      for (size_t p = 0; p < cols.paths[k].size(); ++p) {
        const auto& path = cols.paths[k][p];
        if (std::find(path.begin(), path.end(), e_star) != path.end())
          g[cols.offset[k] + p] = cols.demand[k] / C[e_star];
      }
    double gn2 = g.squaredNorm();
    if (gn2 <= 0.0) break;
    double target = best * (1.0 - 1.0 / std::sqrt(double(it) + 10.0));
    double step = (h - target) / gn2;
    y -= step * g;
    for (int k = 0; k < K; ++k) project_simplex_michelot(y, active[k], 1.0);
  }
  if (best_y_out) *best_y_out = best_y;
  return best;
}

}  // namespace

PathMluResult exact_path_mlu(const Topology& t, const TrafficMatrix& tm,
                             const std::vector<PathSet>& paths,
                             const OracleOptions& opts) {
  if (tm.commodities.size() != paths.size())
    throw InputError("exact_path_mlu: paths/commodities mismatch");
  Columns cols = make_columns(tm, paths);
  Vec C = t.capacities();
  long size = 0;
  for (const auto& p : cols.paths) size += static_cast<long>(p.size());
  if (size > opts.size_cap)
    throw InputError("exact_path_mlu: instance exceeds the oracle size cap");

  PathMluResult res;
  Vec y;
  double u_enum, u = std::numeric_limits<double>::infinity();
  if (cols.total <= 12 &&
      vertex_enum_mlu(cols, C, opts.vertex_enum_budget, &u_enum, &y)) {
    u = u_enum;
  } else {
    u = subgradient_mlu(cols, C, opts, &y);
  }
  res.mlu = u;

  // Scatter the stacked solution back onto the full split layout.
  res.splits.resize(tm.commodities.size());
  int kk = 0;
  for (size_t k = 0; k < tm.commodities.size(); ++k) {
    res.splits[k] = Vec::Zero(paths[k].T_paths);
    int avail = 0;
    for (const Path& p : paths[k].paths)
      if (p.available) ++avail;
    if (avail == 0) continue;
    int slot = 0;
    for (size_t p = 0; p < paths[k].paths.size(); ++p)
      if (paths[k].paths[p].available)
        res.splits[k][p] = y[cols.offset[kk] + slot++];
    ++kk;
  }
  return res;
}

std::vector<std::vector<EdgeId>> all_simple_paths(const Topology& t,
                                                  NodeId src, NodeId dst,
                                                  int max_hops) {
  std::vector<std::vector<EdgeId>> out;
  std::vector<EdgeId> cur;
  std::vector<char> visited(t.num_nodes(), 0);
  // DFS in lexicographic edge order; depth bounded by max_hops.
  std::function<void(NodeId)> dfs = [&](NodeId v) {
    if (v == dst) {
      out.push_back(cur);
      return;
    }
    if (static_cast<int>(cur.size()) >= max_hops) return;
    visited[v] = 1;
    for (EdgeId e : t.out_edges(v)) {
      NodeId w = t.edge(e).tail;
      if (visited[w]) continue;
      cur.push_back(e);
      dfs(w);
      cur.pop_back();
    }
    visited[v] = 0;
  };
  dfs(src);
  return out;
}

double exact_edge_mlu(const Topology& t, const TrafficMatrix& tm,
                      const OracleOptions& opts) {
  if (t.num_nodes() > 30)
    throw InputError("exact_edge_mlu: instance exceeds the oracle size cap");
  // Out-edges are visited in index order already; all_simple_paths yields a
  // deterministic path order.
  double prev = std::numeric_limits<double>::infinity();
  int max_bound = t.num_nodes() - 1;
  int start = std::min(2, max_bound);
  for (int bound = start; bound <= max_bound; ++bound) {
    std::vector<PathSet> sets;
    sets.reserve(tm.commodities.size());
    bool any = false;
    for (const Commodity& c : tm.commodities) {
      PathSet ps;
      ps.src = c.src;
      ps.dst = c.dst;
      auto paths = all_simple_paths(t, c.src, c.dst, bound);
      ps.T_paths = static_cast<int>(paths.size());
      for (auto& p : paths) {
        Path path;
        path.edges = std::move(p);
        ps.paths.push_back(std::move(path));
      }
      if (ps.T_paths > 0) any = true;
      sets.push_back(std::move(ps));
    }
    if (!any) continue;
    OracleOptions level = opts;
    if (bound < max_bound)
      level.subgradient_iters = std::max(20000, opts.subgradient_iters / 5);
    double u = exact_path_mlu(t, tm, sets, level).mlu;
    if (bound > start && std::abs(prev - u) <= 1e-4 * std::max(1.0, u) &&
        bound >= 4)
      return std::min(prev, u);
    prev = std::min(prev, u);
  }
  return prev;
}

MaxflowResult exact_maxflow(const Topology& t, const TrafficMatrix& tm,
                            const std::vector<PathSet>& paths,
                            const OracleOptions& opts) {
  Columns cols = make_columns(tm, paths);
  const int n = t.num_edges();
  const int V = cols.total;
  const int K = static_cast<int>(cols.paths.size());
  Vec C = t.capacities();
  MaxflowResult res;
  res.fractions.assign(tm.commodities.size(), 0.0);
  double offered = tm.total_demand();
  if (V == 0 || offered <= 0.0) return res;

  // Per-commodity flow variables f (not splits); feasible set is
  // {f >= 0, sum_p f <= d_k} per commodity.
  Vec f = Vec::Zero(V);
  std::vector<std::vector<int>> active(K);
  for (int k = 0; k < K; ++k)
    for (size_t p = 0; p < cols.paths[k].size(); ++p)
      active[k].push_back(cols.offset[k] + p);

  // Splits-in-flows wrapper: Columns::flows expects split fractions, so feed
  // per-unit demands by dividing out d_k.
  auto edge_flows = [&](const Vec& fv) {
    Vec ef = Vec::Zero(n);
    for (int k = 0; k < K; ++k)
      for (size_t p = 0; p < cols.paths[k].size(); ++p) {
        double amount = fv[cols.offset[k] + p];
        if (amount == 0.0) continue;
        for (EdgeId e : cols.paths[k][p]) ef[e] += amount;
      }
    return ef;
  };

  // Greedy admission turns a near-feasible point into a feasible one:
  // admit each path's flow up to the remaining capacity along it.
  auto greedy_feasible = [&](const Vec& fv) {
    Vec cap = C;
    Vec out = Vec::Zero(V);
    for (int k = 0; k < K; ++k)
      for (size_t p = 0; p < cols.paths[k].size(); ++p) {
        int i = cols.offset[k] + static_cast<int>(p);
        double admit = fv[i];
        for (EdgeId e : cols.paths[k][p]) admit = std::min(admit, cap[e]);
        if (admit <= 0.0) continue;
        out[i] = admit;
        for (EdgeId e : cols.paths[k][p]) cap[e] -= admit;
      }
    return out;
  };

  double mu = 4.0;
  double best_sat = 0.0;
  Vec best_f = f;
  for (int round = 0; round < 4; ++round) {
    int iters = std::max(2000, opts.subgradient_iters / 4);
    double step0 = 0.5 * tm.max_demand();
    for (int it = 0; it < iters; ++it) {
      Vec ef = edge_flows(f);
      Vec feas = greedy_feasible(f);
      double sat = feas.sum() / offered;
      if (sat > best_sat) {
        best_sat = sat;
        best_f = feas;
      }
      Vec g = Vec::Constant(V, -1.0);
      for (int e = 0; e < n; ++e) {
        if (ef[e] <= C[e]) continue;
        for (int k = 0; k < K; ++k)
          for (size_t p = 0; p < cols.paths[k].size(); ++p) {
            const auto& path = cols.paths[k][p];
            if (std::find(path.begin(), path.end(), e) != path.end())
              g[cols.offset[k] + p] += mu;
          }
      }
      double step = step0 / std::sqrt(double(it) + 1.0);
      f -= step * g;
      for (int k = 0; k < K; ++k) {
        for (int i : active[k]) f[i] = std::max(f[i], 0.0);
        double sum = 0.0;
        for (int i : active[k]) sum += f[i];
        if (sum > cols.demand[k])
          project_simplex_michelot(f, active[k], cols.demand[k]);
      }
    }
    Vec ef = edge_flows(f);
    double viol = 0.0;
    for (int e = 0; e < n; ++e) viol = std::max(viol, ef[e] - C[e]);
    if (viol <= 1e-6 * C.maxCoeff()) break;
    mu *= 4.0;
  }

  res.satisfaction = best_sat;
  int kk = 0;
  for (size_t k = 0; k < tm.commodities.size(); ++k) {
    int avail = 0;
    for (const Path& p : paths[k].paths)
      if (p.available) ++avail;
    if (avail == 0) continue;
    double routed = 0.0;
    for (size_t p = 0; p < cols.paths[kk].size(); ++p)
      routed += best_f[cols.offset[kk] + p];
    res.fractions[k] = routed / tm.commodities[k].demand;
    ++kk;
  }
  return res;
}

}  // namespace dte::oracle
