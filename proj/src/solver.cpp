#include "dte/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

namespace dte {

System::System(Topology topology, TrafficMatrix tm, SolverOptions opts)
    : topo_(std::move(topology)), tm_(std::move(tm)), opts_(std::move(opts)) {
  opts_.cfg.validate();
  build();
}

void System::init_commodity(CommodityState& s, std::mt19937_64& rng) {
  const int n = topo_.num_edges();
  const Commodity& c = s.commodity;
  s.x = Vec::Zero(n);
  s.routable = topo_.shortest_path(c.src, c.dst).has_value();
  s.pinned_edges = loop_leak_pinned(topo_, c);
  s.beta = 1.0;
  s.beta_target = 1.0;

  if (is_path_mode(opts_.mode)) {
    s.paths = k_shortest_paths(topo_, c.src, c.dst, opts_.T_paths);
    s.routable = s.paths.routable();
    s.splits = Vec::Zero(opts_.T_paths);
    if (!s.routable) return;
    if (opts_.cold_random_init) {
      // Seed-jittered point of the reduced simplex.
      std::uniform_real_distribution<double> u01(0.01, 1.0);
      Vec raw = Vec::Zero(opts_.T_paths);
      for (int t = 0; t < opts_.T_paths; ++t)
        if (!std::count(s.paths.pinned.begin(), s.paths.pinned.end(), t))
          raw[t] = u01(rng);
      s.splits = raw / raw.sum();
    } else {
      // Everything on the latency-shortest available path.
      for (int t = 0; t < opts_.T_paths; ++t)
        if (!std::count(s.paths.pinned.begin(), s.paths.pinned.end(), t)) {
          s.splits[t] = 1.0;
          break;
        }
    }
    s.x = s.paths.edge_flow(s.splits, c.demand);
  } else {
    if (!s.routable) {
      s.x0 = Vec::Zero(n);
      s.lambda = Vec::Zero(n);
      s.w_null = Vec::Zero(n);
      s.t_slack = Vec::Zero(n);
      return;
    }
    Vec B = demand_vector(c, topo_.num_nodes());
    s.x0 = ops_->base_flow(B);
    s.lambda = Vec::Zero(n);
    s.w_null = Vec::Zero(n);
    s.t_slack = Vec::Zero(n);
    s.x = s.x0;
  }
}

void System::build() {
  const int n = topo_.num_edges();
  bool edge_mode = !is_path_mode(opts_.mode);
  if (edge_mode)
    ops_ = make_flow_ops(topo_, n <= opts_.basis_edge_threshold);

  std::vector<int> region_of_node = opts_.region_of_node;
  if (!region_of_node.empty() &&
      static_cast<int>(region_of_node.size()) != topo_.num_nodes())
    throw InputError("region assignment size mismatch");
  if (region_of_node.empty())
    region_of_node = opts_.regions > 1 ? cluster_regions(topo_, opts_.regions)
                                       : std::vector<int>(topo_.num_nodes(), 0);
  int num_regions = 1;
  for (int r : region_of_node) num_regions = std::max(num_regions, r + 1);

  // One switch per originating node, commodities in deterministic order.
  std::map<NodeId, std::vector<int>> by_src;
  for (int k = 0; k < static_cast<int>(tm_.commodities.size()); ++k)
    by_src[tm_.commodities[k].src].push_back(k);

  std::mt19937_64 rng(opts_.seed);
  switches_.clear();
  region_of_switch_.clear();
  region_commodity_count_.assign(num_regions, 0);
  int sid = 0;
  for (auto& [node, ks] : by_src) {
    SwitchAgent sw(sid, node);
    for (int k : ks) {
      CommodityState s;
      s.commodity = tm_.commodities[k];
      s.global_index = k;
      init_commodity(s, rng);
      sw.commodities().push_back(std::move(s));
      region_commodity_count_[region_of_node[node]]++;
    }
    switches_.push_back(std::move(sw));
    region_of_switch_.push_back(region_of_node[node]);
    ++sid;
  }

  bool hierarchical = opts_.hierarchical || opts_.regions > 1;
  // One domain has nothing to reach consensus over; forcing the coupling off
  // keeps the single-region hierarchical run bit-identical to the flat one.
  double beta_eff = num_regions > 1 ? opts_.hier_beta : 0.0;

  regions_.clear();
  Vec caps = topo_.capacities();
  for (int r = 0; r < num_regions; ++r) {
    std::vector<int> members;
    for (int s = 0; s < static_cast<int>(switches_.size()); ++s)
      if (region_of_switch_[s] == r) members.push_back(s);
    RegionCoordinator coord(r, opts_.mode, opts_.cfg, opts_.barrier, caps,
                            std::max(region_commodity_count_[r], 1), members);
    coord.configure_hier(beta_eff,
                         num_regions > 1 ? 1.0 / double(num_regions) : 1.0);
    regions_.push_back(std::move(coord));
  }
  for (int r = 0; r < num_regions; ++r) {
    std::vector<SwitchReport> reps;
    for (int s = 0; s < static_cast<int>(switches_.size()); ++s)
      if (region_of_switch_[s] == r) reps.push_back(make_report(switches_[s], 0));
    regions_[r].initialize(reps);
  }

  global_.reset();
  if (hierarchical)
    global_.emplace(num_regions, n, caps, beta_eff, opts_.barrier);
}

Vec System::consensus_pull(const InnerBcast& latest, const Vec& u_prev) {
  // Xbar reconstructed from two consecutive duals; identical arithmetic on
  // the in-process and simulated paths keeps runs bit-comparable.
  Vec xbar_rec = latest.pbar + (latest.u - u_prev);
  return xbar_rec - latest.pbar + latest.u;
}

Vec System::total_flow() const {
  Vec sum = Vec::Zero(topo_.num_edges());
  for (const SwitchAgent& sw : switches_) sum += sw.aggregate(topo_.num_edges());
  return sum;
}

double System::mlu() const {
  Vec f = total_flow();
  double u = 0.0;
  for (int e = 0; e < f.size(); ++e)
    u = std::max(u, f[e] / topo_.edge(e).capacity);
  return u;
}

double System::satisfaction() const {
  double routed = 0.0, total = 0.0;
  for (const SwitchAgent& sw : switches_)
    for (const CommodityState& s : sw.commodities()) {
      total += s.commodity.demand;
      routed += s.commodity.demand * (s.routable ? s.beta : 0.0);
    }
  return total > 0 ? routed / total : 1.0;
}

double System::objective() const {
  return is_maxflow(opts_.mode) ? satisfaction() : mlu();
}

SwitchReport System::make_report(const SwitchAgent& sw, long iter) const {
  SwitchReport rep;
  rep.switch_id = sw.id();
  rep.iter = iter;
  Vec agg = sw.aggregate(topo_.num_edges());
  for (int e = 0; e < agg.size(); ++e)
    if (agg[e] != 0.0) rep.agg.emplace_back(e, agg[e]);
  if (is_maxflow(opts_.mode))
    for (const CommodityState& s : sw.commodities())
      rep.betas.emplace_back(s.global_index, s.routable ? s.beta : 0.0);
  return rep;
}

std::vector<SwitchReport> System::initial_reports() const {
  std::vector<SwitchReport> reps;
  for (const SwitchAgent& sw : switches_) reps.push_back(make_report(sw, 0));
  return reps;
}

bool System::any_unroutable() const {
  for (const SwitchAgent& sw : switches_)
    for (const CommodityState& s : sw.commodities())
      if (!s.routable) return true;
  return false;
}

void System::set_splits(const std::vector<Vec>& splits) {
  if (!is_path_mode(opts_.mode))
    throw InputError("set_splits only applies to path modes");
  for (SwitchAgent& sw : switches_)
    for (CommodityState& s : sw.commodities()) {
      if (!s.routable) continue;
      const Vec& y = splits[s.global_index];
      s.splits = y;
      double mass = y.sum();
      if (mass > 1e-12) s.splits /= mass;
      s.x = s.paths.edge_flow(
          s.splits,
          s.commodity.demand * (is_maxflow(opts_.mode) ? s.beta : 1.0));
    }
  for (int r = 0; r < static_cast<int>(regions_.size()); ++r) {
    std::vector<SwitchReport> reps;
    for (int s = 0; s < static_cast<int>(switches_.size()); ++s)
      if (region_of_switch_[s] == r)
        reps.push_back(make_report(switches_[s], regions_[r].iter()));
    regions_[r].reseed_aggregates(reps);
  }
}

void System::apply_demand_change(const TrafficMatrix& new_tm) {
  if (new_tm.commodities.size() != tm_.commodities.size())
    throw InputError("demand change must keep the commodity set");
  tm_ = new_tm;
  for (SwitchAgent& sw : switches_)
    for (CommodityState& s : sw.commodities()) {
      const Commodity& nc = tm_.commodities[s.global_index];
      double old_d = s.commodity.demand;
      s.commodity = nc;
      if (!s.routable) continue;
      if (is_path_mode(opts_.mode)) {
        // Splits carry over; the edge image rescales.
        s.x = s.paths.edge_flow(s.splits,
                                nc.demand * (is_maxflow(opts_.mode) ? s.beta : 1.0));
      } else {
        // Least-squares base flow is linear in the demand.
        if (old_d > 0) s.x0 *= nc.demand / old_d;
        double b = is_maxflow(opts_.mode) ? s.beta : 1.0;
        // Keep the previous report as warm start; re-anchor its feasible part.
        s.x = b * s.x0 + ops_->project_null(Vec(s.x - b * s.x0));
        for (int e : s.pinned_edges) s.x[e] = 0.0;
      }
    }
  for (int r = 0; r < static_cast<int>(regions_.size()); ++r) {
    std::vector<SwitchReport> reps;
    for (int s = 0; s < static_cast<int>(switches_.size()); ++s)
      if (region_of_switch_[s] == r)
        reps.push_back(make_report(switches_[s], regions_[r].iter()));
    regions_[r].reseed_aggregates(reps);
  }
}

void System::apply_link_failure(int link_index) {
  // Find a directed edge of that undirected link.
  int edge = -1;
  for (int e = 0; e < topo_.num_edges(); ++e)
    if (topo_.edge(e).link == link_index) {
      edge = e;
      break;
    }
  if (edge < 0) return;  // already gone
  std::vector<EdgeId> remap;
  Topology nt = topo_.fail_link(edge, &remap);
  int new_n = nt.num_edges();
  topo_ = std::move(nt);

  auto remap_vec = [&](const Vec& v) {
    Vec w = Vec::Zero(new_n);
    for (int e = 0; e < v.size(); ++e)
      if (remap[e] >= 0) w[remap[e]] = v[e];
    return w;
  };

  bool edge_mode = !is_path_mode(opts_.mode);
  if (edge_mode) {
    try {
      ops_ = make_flow_ops(topo_, new_n <= opts_.basis_edge_threshold);
    } catch (const InputError&) {
      // Disconnected: fall back to the SVD basis, which tolerates rank gaps.
      ops_ = make_flow_ops(topo_, true);
    }
  }

  for (SwitchAgent& sw : switches_)
    for (CommodityState& s : sw.commodities()) {
      if (is_path_mode(opts_.mode)) {
        s.paths.remap_edges(remap, new_n);
        frr_redistribute(s);
        if (s.routable)
          s.x = s.paths.edge_flow(
              s.splits,
              s.commodity.demand * (is_maxflow(opts_.mode) ? s.beta : 1.0));
        else
          s.x = Vec::Zero(new_n);
      } else {
        s.pinned_edges = loop_leak_pinned(topo_, s.commodity);
        s.routable = topo_.shortest_path(s.commodity.src, s.commodity.dst)
                         .has_value();
        Vec x_dropped = remap_vec(s.x);
        s.lambda = remap_vec(s.lambda);
        s.t_slack = remap_vec(s.t_slack);
        if (!s.routable) {
          s.x0 = Vec::Zero(new_n);
          s.w_null = Vec::Zero(new_n);
          s.x = Vec::Zero(new_n);
          continue;
        }
        Vec B = demand_vector(s.commodity, topo_.num_nodes());
        s.x0 = ops_->base_flow(B);
        double b = is_maxflow(opts_.mode) ? std::max(s.beta, 0.0) : 1.0;
        // Closest feasible point to the surviving assignment.
        s.x = b * s.x0 + ops_->project_null(Vec(x_dropped - b * s.x0));
        for (int e : s.pinned_edges) s.x[e] = 0.0;
        s.w_null = ops_->project_null(remap_vec(s.w_null));
      }
    }

  Vec caps = topo_.capacities();
  std::vector<int> iremap(remap.begin(), remap.end());
  for (int r = 0; r < static_cast<int>(regions_.size()); ++r) {
    regions_[r].remap_edges(iremap, new_n, caps);
    std::vector<SwitchReport> reps;
    for (int s = 0; s < static_cast<int>(switches_.size()); ++s)
      if (region_of_switch_[s] == r)
        reps.push_back(make_report(switches_[s], regions_[r].iter()));
    regions_[r].reseed_aggregates(reps);
  }
  if (global_) global_->remap_edges(iremap, new_n, caps);
}

namespace {

struct SwitchInbox {
  InnerBcast latest;
  Vec u_prev;
};

}  // namespace

SolveResult solve(System& sys) {
  auto t0 = std::chrono::steady_clock::now();
  const SolverOptions& opts = sys.options();
  const admm::AdmmConfig& cfg = sys.options().cfg;
  SolveResult res;
  res.solver_flagged = sys.any_unroutable();

  // Initial broadcast: Pbar = Xbar, u = 0.
  std::vector<SwitchInbox> inbox(sys.switches().size());
  for (size_t s = 0; s < sys.switches().size(); ++s) {
    const auto& coord = sys.regions()[sys.region_of_switch()[s]];
    inbox[s].latest.iter = 0;
    inbox[s].latest.pbar = coord.inner_state().Pbar;
    inbox[s].latest.u = coord.inner_state().u;
    inbox[s].u_prev = coord.inner_state().u;
  }

  admm::ConvergenceTracker tracker(opts.reference, cfg.tol_rel);
  long max_inner = static_cast<long>(opts.max_outer_rounds) *
                   cfg.inner_iters_per_outer;
  std::uint64_t version = sys.topology().version();
  const double cap_scale = sys.topology().capacities().mean();

  for (long m = 1; m <= max_inner; ++m) {
    for (int r = 0; r < static_cast<int>(sys.regions().size()); ++r) {
      RegionCoordinator& coord = sys.regions()[r];
      for (int s : coord.members()) {
        SwitchAgent& sw = sys.switches()[s];
        Vec pull = System::consensus_pull(inbox[s].latest, inbox[s].u_prev);
        sw.update_all(opts.mode, pull, sys.flow_ops(), cfg, version, cap_scale);
        coord.receive(sys.make_report(sw, m));
      }
      auto out = coord.step();
      for (int s : out.recipients) {
        inbox[s].u_prev = inbox[s].latest.u;
        inbox[s].latest = out.inner;
        if (out.outer && !out.outer->beta_targets.empty())
          for (CommodityState& cs : sys.switches()[s].commodities()) {
            auto it = out.outer->beta_targets.find(cs.global_index);
            if (it != out.outer->beta_targets.end())
              cs.beta_target = it->second;
          }
      }
      if (out.domain_report && sys.global())
        sys.global()->receive(*out.domain_report);
    }

    if (m % cfg.inner_iters_per_outer == 0) {
      if (sys.global() && sys.global()->barrier_ready()) {
        auto bcasts = sys.global()->step();
        for (auto& [d, b] : bcasts) sys.regions()[d].receive(b);
      }
      res.outer_rounds++;
      res.inner_rounds = m;
      double obj = sys.objective();
      OuterLog log;
      log.inner_iter = m;
      log.objective = obj;
      log.U = sys.regions()[0].outer_state().U;
      log.Z = sys.regions()[0].outer_state().Z;
      log.u = sys.regions()[0].inner_state().u;
      res.log.push_back(std::move(log));

      bool done = false;
      if (tracker.has_reference()) {
        done = tracker.check_objective(obj);
      } else {
        // Stack per-region residual pairs into one test vector.
        int n = sys.topology().num_edges();
        int R = static_cast<int>(sys.regions().size());
        Vec xbar(n * R), pbar(n * R);
        for (int r = 0; r < R; ++r) {
          xbar.segment(r * n, n) = sys.regions()[r].inner_state().Xbar;
          pbar.segment(r * n, n) = sys.regions()[r].inner_state().Pbar;
        }
        done = tracker.check_residuals(xbar, pbar, cfg.eta,
                                       std::max(1.0, xbar.norm()));
      }
      if (done) {
        res.converged = true;
        break;
      }
    }
  }

  res.objective = sys.objective();
  res.mlu = sys.mlu();
  res.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return res;
}

SolveResult solve_instance(const Topology& t, const TrafficMatrix& tm,
                           const SolverOptions& opts) {
  System sys(t, tm, opts);
  return solve(sys);
}

}  // namespace dte
