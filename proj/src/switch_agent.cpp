#include "dte/switch_agent.hpp"

#include <algorithm>
#include <cmath>

namespace dte {

std::string to_string(SolveMode m) {
  switch (m) {
    case SolveMode::kEdgeMlu: return "edge-mlu";
    case SolveMode::kEdgeMaxflow: return "edge-maxflow";
    case SolveMode::kPathMlu: return "path-mlu";
    case SolveMode::kPathMaxflow: return "path-maxflow";
  }
  return "edge-mlu";
}

SolveMode solve_mode_from_string(const std::string& s) {
  if (s == "edge-mlu") return SolveMode::kEdgeMlu;
  if (s == "edge-maxflow") return SolveMode::kEdgeMaxflow;
  if (s == "path-mlu") return SolveMode::kPathMlu;
  if (s == "path-maxflow") return SolveMode::kPathMaxflow;
  throw InputError("unknown solve mode: " + s);
}

std::vector<int> loop_leak_pinned(const Topology& t, const Commodity& c) {
  std::vector<int> pinned;
  for (EdgeId e : t.in_edges(c.src)) pinned.push_back(e);
  for (EdgeId e : t.out_edges(c.dst)) pinned.push_back(e);
  std::sort(pinned.begin(), pinned.end());
  pinned.erase(std::unique(pinned.begin(), pinned.end()), pinned.end());
  return pinned;
}

namespace {

void check_fresh(const FlowOps& ops, std::uint64_t topo_version) {
  if (ops.version != topo_version)
    throw StaleStateError("null-space factorization is stale; re-factorize");
}

// Dual PGD of the l2 switch problem with anchor v = x_prev - pull and base
// flow x0_eff. Updates s.lambda in place, returns the recovered primal
// x = x0_eff + N(N'lam + N'c).
Vec l2_dual_pgd(CommodityState& s, const Vec& v, const Vec& x0_eff,
                const FlowOps& ops, double eps, double eta, int pgd_iters) {
  const double scale = eta / (eta + eps);
  Vec pc = ops.project_null(Vec(scale * v));

  std::vector<char> pinned(s.x.size(), 0);
  for (int e : s.pinned_edges) pinned[e] = 1;

  // Gradient P(lam) + P(c) + X0; step 1 is safe since sigma_max(NN') = 1.
  // lambda is clamped at zero on free edges only; pinned edges carry
  // equality multipliers of either sign.
  for (int it = 0; it < pgd_iters; ++it) {
    Vec grad = ops.project_null(s.lambda) + pc + x0_eff;
    s.lambda -= grad;
    for (int e = 0; e < s.lambda.size(); ++e)
      if (!pinned[e] && s.lambda[e] < 0.0) s.lambda[e] = 0.0;
  }
  return x0_eff + ops.project_null(s.lambda) + pc;
}

// Reduced-simplex PGD on the splits with anchor v and effective demand d.
void path_splits_pgd(CommodityState& s, const Vec& v, double eps, double eta,
                     int pgd_iters, double d) {
  const double step = 1.0 / (s.paths.lambda_max + eps / eta);
  Vec target = s.paths.mask.transpose() * (v / d);
  for (int it = 0; it < pgd_iters; ++it) {
    Vec grad = (eps / eta) * s.splits + s.paths.gram * s.splits - target;
    s.splits =
        admm::project_simplex(Vec(s.splits - step * grad), s.paths.pinned);
  }
}

// argmin over [0,1] of
//   -d*cbar*beta + (eta*cbar^2/2)(beta - target)^2 + (eta/2)||beta*xhat - v||^2.
// The mean capacity cbar keeps the routed-demand reward and the unit-free
// consensus term commensurate with the flow-space quadratic at any scale.
double beta_step(double d, double eta, double target, const Vec& xhat,
                 const Vec& v, double cbar) {
  double c2 = cbar * cbar;
  double denom = eta * (c2 + xhat.squaredNorm());
  double numer = d * cbar + eta * c2 * target + eta * xhat.dot(v);
  return std::clamp(numer / denom, 0.0, 1.0);
}

}  // namespace

void x_update_l2(CommodityState& s, const Vec& pull, const FlowOps& ops,
                 double eps, double eta, int pgd_iters,
                 std::uint64_t topo_version) {
  check_fresh(ops, topo_version);
  if (!s.routable) {
    s.x.setZero();
    return;
  }
  Vec v = s.x - pull;
  s.x = l2_dual_pgd(s, v, s.x0, ops, eps, eta, pgd_iters);
  for (int e : s.pinned_edges) s.x[e] = 0.0;
}

void x_update_l1(CommodityState& s, const Vec& pull, const FlowOps& ops,
                 double kappa, double eps, double eta, double gamma, int iters,
                 std::uint64_t topo_version) {
  check_fresh(ops, topo_version);
  if (!s.routable) {
    s.x.setZero();
    return;
  }
  const double scale = eta / (eta + eps);
  Vec c_null = ops.project_null(Vec(scale * (s.x - pull)));
  const double thresh = kappa / (eta * gamma);

  Vec x = s.x;
  for (int it = 0; it < iters; ++it) {
    x = admm::project_nonneg_pinned(
        admm::soft_threshold(s.x0 + s.w_null + s.t_slack, thresh),
        s.pinned_edges);
    s.w_null =
        (c_null - gamma * ops.project_null(Vec(s.x0 + s.t_slack - x))) /
        (1.0 + gamma);
    s.t_slack += s.x0 + s.w_null - x;
  }
  s.x = x;
}

void x_update_path(CommodityState& s, const Vec& pull, double eps, double eta,
                   int pgd_iters, double demand_scale) {
  if (!s.routable || !s.paths.routable()) {
    s.routable = s.paths.routable();
    s.x.setZero();
    return;
  }
  const double d = s.commodity.demand * demand_scale;
  if (d <= 0.0) {
    s.x.setZero();
    return;
  }
  Vec v = s.x - pull;
  path_splits_pgd(s, v, eps, eta, pgd_iters, d);
  s.x = s.paths.edge_flow(s.splits, d);
}

void x_update_maxflow(CommodityState& s, const Vec& pull, const FlowOps* ops,
                      bool path_mode, double eps, double eta, int pgd_iters,
                      int sweeps, std::uint64_t topo_version,
                      double cap_scale) {
  if (!s.routable || (path_mode && !s.paths.routable())) {
    if (path_mode) s.routable = s.paths.routable();
    s.x.setZero();
    s.beta = 0.0;
    return;
  }
  const Vec v = s.x - pull;  // fixed anchor for the whole sweep budget
  const double d = s.commodity.demand;
  const double beta_floor = 1e-3;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double b = std::max(s.beta, beta_floor);
    if (path_mode) {
      path_splits_pgd(s, v, eps, eta, pgd_iters, d * b);
      Vec xhat = s.paths.edge_flow(s.splits, d);  // unit-fraction edge image
      s.beta = beta_step(d, eta, s.beta_target, xhat, v, cap_scale);
      s.x = s.beta * xhat;
    } else {
      check_fresh(*ops, topo_version);
      Vec x_shape = l2_dual_pgd(s, v, Vec(b * s.x0), *ops, eps, eta, pgd_iters);
      Vec w = x_shape - b * s.x0;  // null-space component, held fixed below
      s.beta = beta_step(d, eta, s.beta_target, s.x0, Vec(v - w), cap_scale);
      s.x = s.beta * s.x0 + w;
      for (int e : s.pinned_edges) s.x[e] = 0.0;
    }
  }
}

bool frr_redistribute(CommodityState& s) {
  if (s.splits.size() == 0) return false;
  bool changed = false;
  double surviving = 0.0;
  int alive = 0;
  for (int t = 0; t < s.splits.size(); ++t) {
    bool avail = t < static_cast<int>(s.paths.paths.size()) &&
                 s.paths.paths[t].available;
    if (!avail) {
      if (s.splits[t] != 0.0) changed = true;
      s.splits[t] = 0.0;
    } else {
      surviving += s.splits[t];
      ++alive;
    }
  }
  if (alive == 0) {
    s.routable = false;
    s.splits.setZero();
    s.x.setZero();
    return true;
  }
  if (!changed) return false;
  if (surviving > 1e-12) {
    s.splits /= surviving;
  } else {
    // Degenerate: every surviving path had zero mass; spread uniformly.
    for (int t = 0; t < s.splits.size(); ++t)
      s.splits[t] = (t < static_cast<int>(s.paths.paths.size()) &&
                     s.paths.paths[t].available)
                        ? 1.0 / double(alive)
                        : 0.0;
  }
  s.x = s.paths.edge_flow(s.splits, s.commodity.demand);
  return true;
}

void SwitchAgent::update_all(SolveMode mode, const Vec& pull,
                             const FlowOps* ops, const admm::AdmmConfig& cfg,
                             std::uint64_t topo_version, double cap_scale) {
  for (CommodityState& s : commodities_) {
    switch (mode) {
      case SolveMode::kEdgeMlu:
        if (cfg.kappa > 0.0)
          x_update_l1(s, pull, *ops, cfg.kappa, cfg.eps, cfg.eta, cfg.gamma,
                      cfg.pgd_iters, topo_version);
        else
          x_update_l2(s, pull, *ops, cfg.eps, cfg.eta, cfg.pgd_iters,
                      topo_version);
        break;
      case SolveMode::kPathMlu:
        x_update_path(s, pull, cfg.eps, cfg.eta, cfg.pgd_iters);
        break;
      case SolveMode::kEdgeMaxflow:
        x_update_maxflow(s, pull, ops, false, cfg.eps, cfg.eta, cfg.pgd_iters,
                         3, topo_version, cap_scale);
        break;
      case SolveMode::kPathMaxflow:
        x_update_maxflow(s, pull, nullptr, true, cfg.eps, cfg.eta,
                         cfg.pgd_iters, 3, topo_version, cap_scale);
        break;
    }
  }
}

Vec SwitchAgent::aggregate(int num_edges) const {
  Vec sum = Vec::Zero(num_edges);
  for (const CommodityState& s : commodities_)
    if (s.x.size() == num_edges) sum += s.x;
  return sum;
}

}  // namespace dte
