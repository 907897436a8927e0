#include "dte/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dte {

RegionCoordinator::RegionCoordinator(int region_id, SolveMode mode,
                                     admm::AdmmConfig cfg,
                                     BarrierConfig barrier, Vec capacities,
                                     int num_commodities,
                                     std::vector<int> member_switches)
    : region_id_(region_id),
      mode_(mode),
      cfg_(std::move(cfg)),
      barrier_(barrier),
      capacities_(std::move(capacities)),
      K_(num_commodities),
      members_(std::move(member_switches)) {
  int n = static_cast<int>(capacities_.size());
  outer_.Z = Vec::Zero(n);
  outer_.r = Vec::Zero(n);
  inner_.Pbar = Vec::Zero(n);
  inner_.u = Vec::Zero(n);
  inner_.Xbar = Vec::Zero(n);
  sum_x_ = Vec::Zero(n);
  for (int id : members_) slots_[id] = MemberSlot{Vec::Zero(n), -1, {}, false};
  if (barrier_.synchronous) barrier_.k_min = static_cast<int>(members_.size());
}

void RegionCoordinator::initialize(
    const std::vector<SwitchReport>& initial_reports) {
  for (const auto& rep : initial_reports) receive(rep);
  int n = static_cast<int>(capacities_.size());
  sum_x_ = Vec::Zero(n);
  for (auto& [id, slot] : slots_) {
    sum_x_ += slot.agg;
    slot.fresh = false;
  }
  inner_.Xbar = sum_x_ / double(std::max(K_, 1));
  inner_.Pbar = inner_.Xbar;
  inner_.u.setZero();
  // Seed the aggregate target so the first F = Z - r matches the initial
  // flows instead of pulling everything toward zero.
  outer_.Z = sum_x_;
  outer_.r.setZero();
  outer_.U = 0.0;
  for (const auto& rep : initial_reports)
    for (auto [k, b] : rep.betas) {
      beta_latest_[k] = b;
      alpha_.emplace(k, 1.0);
      alpha_dual_.emplace(k, 0.0);
    }
  iter_ = 0;
}

void RegionCoordinator::receive(const SwitchReport& report) {
  auto it = slots_.find(report.switch_id);
  if (it == slots_.end()) return;
  MemberSlot& slot = it->second;
  if (slot.agg.size() != capacities_.size())
    slot.agg = Vec::Zero(capacities_.size());
  slot.agg.setZero();
  for (auto [e, vl] : report.agg) slot.agg[e] = vl;
  slot.stamp = report.iter;
  slot.fresh = true;
  slot.betas = report.betas;
  for (auto [k, b] : report.betas) beta_latest_[k] = b;
}

void RegionCoordinator::receive(const DomainBcast& bcast) {
  hier_.reserved = bcast.R_not_d;
  hier_.R_d = bcast.R_d;
  hier_.l_d = bcast.l_d;
  hier_.O = bcast.O;
  hier_.v_d = bcast.v_d;
  hier_.beta_step = hier_beta_config_;
}

bool RegionCoordinator::barrier_ready() const {
  int fresh = 0;
  for (const auto& [id, slot] : slots_)
    if (slot.fresh) ++fresh;
  if (fresh < std::min<int>(barrier_.k_min, members_.size())) return false;
  if (!barrier_.synchronous) {
    // Nobody may miss tau full rounds: running round iter_+1 requires every
    // member's last report to be at most tau rounds old.
    for (const auto& [id, slot] : slots_)
      if ((iter_ + 1) - slot.stamp > barrier_.tau) return false;
  }
  return true;
}

bool RegionCoordinator::stalled_on_straggler() const {
  if (barrier_.synchronous) return false;
  int fresh = 0;
  for (const auto& [id, slot] : slots_)
    if (slot.fresh) ++fresh;
  if (fresh < std::min<int>(barrier_.k_min, members_.size())) return false;
  return !barrier_ready();
}

void RegionCoordinator::run_outer(OuterBcast& out) {
  Vec A = sum_x_ + outer_.r;
  double cbar = capacities_.mean();
  double g_eff = cfg_.g_slope * cfg_.rho * cbar * cbar;
  admm::ZUpdateExtras extras;
  bool hier = hier_.beta_step > 0.0;
  if (hier) {
    extras.beta_step = hier_.beta_step;
    extras.beta_u = hier_.beta_step * cfg_.rho * cbar * cbar;
    extras.reserved = hier_.reserved;
    extras.z_anchor = hier_.R_d - hier_.l_d;
    extras.u_anchor = hier_.O - hier_.v_d;
    extras.g_scale = hier_.g_scale;
  }
  if (is_maxflow(mode_)) {
    outer_.Z = admm::z_update_maxflow(A, capacities_, cfg_.rho,
                                      hier ? &extras : nullptr);
    outer_.U = 0.0;
    for (int e = 0; e < capacities_.size(); ++e)
      outer_.U = std::max(outer_.U, sum_x_[e] / capacities_[e]);
    // Fraction consensus: alpha_k tracks beta_k through a clamped average
    // with its own scaled dual.
    for (auto& [k, b] : beta_latest_) {
      double& a = alpha_[k];
      double& w = alpha_dual_[k];
      a = std::clamp(b + w, 0.0, 1.0);
      w += b - a;
      out.beta_targets[k] = a - w;
    }
  } else {
    auto [Z, U] = admm::z_update_mlu(A, capacities_, cfg_.rho, g_eff,
                                     hier ? &extras : nullptr);
    outer_.Z = Z;
    outer_.U = U;
  }
  outer_.r = admm::outer_dual_update(outer_.r, sum_x_, outer_.Z);
  out.Z = outer_.Z;
  out.r = outer_.r;
}

RegionCoordinator::RoundOutput RegionCoordinator::step() {
  RoundOutput out;
  ++iter_;

  sum_x_.setZero();
  for (auto& [id, slot] : slots_) sum_x_ += slot.agg;
  inner_.Xbar = sum_x_ / double(std::max(K_, 1));

  bool outer_round = (iter_ % cfg_.inner_iters_per_outer) == 0;
  if (outer_round) {
    OuterBcast ob;
    ob.iter = iter_;
    run_outer(ob);
    out.outer = std::move(ob);
    out.domain_report = DomainReport{region_id_, iter_, outer_.Z, outer_.U};
  }

  Vec F = outer_.Z - outer_.r;
  inner_.Pbar = admm::inner_pbar_update(F, std::max(K_, 1), cfg_.eta, cfg_.rho,
                                        inner_.u, inner_.Xbar);
  inner_.u = admm::inner_dual_update(inner_.u, inner_.Xbar, inner_.Pbar);

  out.inner.iter = iter_;
  out.inner.pbar = inner_.Pbar;
  out.inner.u = inner_.u;

  for (auto& [id, slot] : slots_) {
    if (barrier_.synchronous || slot.fresh) out.recipients.push_back(id);
    slot.fresh = false;
  }
  return out;
}

void RegionCoordinator::reseed_aggregates(
    const std::vector<SwitchReport>& reports) {
  for (const auto& rep : reports) receive(rep);
  sum_x_.setZero();
  for (auto& [id, slot] : slots_) {
    sum_x_ += slot.agg;
    slot.fresh = false;
  }
  inner_.Xbar = sum_x_ / double(std::max(K_, 1));
}

void RegionCoordinator::remap_edges(const std::vector<int>& old_to_new,
                                    int new_num_edges,
                                    const Vec& new_capacities) {
  auto remap = [&](const Vec& v) {
    Vec w = Vec::Zero(new_num_edges);
    for (int e = 0; e < v.size(); ++e)
      if (old_to_new[e] >= 0) w[old_to_new[e]] = v[e];
    return w;
  };
  capacities_ = new_capacities;
  outer_.Z = remap(outer_.Z);
  outer_.r = remap(outer_.r);
  inner_.Pbar = remap(inner_.Pbar);
  inner_.u = remap(inner_.u);
  inner_.Xbar = remap(inner_.Xbar);
  sum_x_ = remap(sum_x_);
  for (auto& [id, slot] : slots_) slot.agg = remap(slot.agg);
  if (hier_.beta_step > 0.0) {
    if (hier_.reserved.size()) hier_.reserved = remap(hier_.reserved);
    if (hier_.R_d.size()) hier_.R_d = remap(hier_.R_d);
    if (hier_.l_d.size()) hier_.l_d = remap(hier_.l_d);
  }
}

GlobalCoordinator::GlobalCoordinator(int num_domains, int num_edges,
                                     Vec capacities, double beta_step,
                                     BarrierConfig barrier)
    : D_(num_domains),
      n_(num_edges),
      capacities_(std::move(capacities)),
      beta_step_(beta_step),
      barrier_(barrier) {
  Z_.assign(D_, Vec::Zero(n_));
  R_.assign(D_, Vec::Zero(n_));
  l_.assign(D_, Vec::Zero(n_));
  U_.assign(D_, 0.0);
  v_.assign(D_, 0.0);
  stamp_.assign(D_, -1);
  fresh_.assign(D_, 0);
  if (barrier_.synchronous) barrier_.k_min = D_;
}

void GlobalCoordinator::receive(const DomainReport& report) {
  int d = report.domain_id;
  Z_[d] = report.Z_d;
  U_[d] = report.U_d;
  stamp_[d] = report.iter;
  fresh_[d] = 1;
}

bool GlobalCoordinator::barrier_ready() const {
  int fresh = std::accumulate(fresh_.begin(), fresh_.end(), 0);
  if (fresh < std::min(barrier_.k_min, D_)) return false;
  if (!barrier_.synchronous) {
    for (int d = 0; d < D_; ++d)
      if (iter_ - stamp_[d] >= barrier_.tau && !fresh_[d]) return false;
  }
  return true;
}

std::vector<std::pair<int, DomainBcast>> GlobalCoordinator::step() {
  ++iter_;
  O_ = global_O_update(U_, v_);
  infeasible_ =
      !global_domain_consensus(Z_, U_, l_, capacities_, beta_step_, R_);
  hier_dual_update(v_, l_, U_, O_, Z_, R_);

  Vec R_total = Vec::Zero(n_);
  for (const Vec& r : R_) R_total += r;

  std::vector<std::pair<int, DomainBcast>> out;
  for (int d = 0; d < D_; ++d) {
    if (!barrier_.synchronous && !fresh_[d]) continue;
    DomainBcast b;
    b.iter = iter_;
    b.R_d = R_[d];
    b.R_not_d = R_total - R_[d];
    b.O = O_;
    b.v_d = v_[d];
    b.l_d = l_[d];
    out.emplace_back(d, std::move(b));
  }
  for (int d = 0; d < D_; ++d) fresh_[d] = 0;
  return out;
}

void GlobalCoordinator::remap_edges(const std::vector<int>& old_to_new,
                                    int new_num_edges,
                                    const Vec& new_capacities) {
  auto remap = [&](const Vec& v) {
    Vec w = Vec::Zero(new_num_edges);
    for (int e = 0; e < v.size(); ++e)
      if (old_to_new[e] >= 0) w[old_to_new[e]] = v[e];
    return w;
  };
  for (int d = 0; d < D_; ++d) {
    Z_[d] = remap(Z_[d]);
    R_[d] = remap(R_[d]);
    l_[d] = remap(l_[d]);
  }
  capacities_ = new_capacities;
  n_ = new_num_edges;
}

double global_O_update(const std::vector<double>& U,
                       const std::vector<double>& v) {
  double su = std::accumulate(U.begin(), U.end(), 0.0);
  double sv = std::accumulate(v.begin(), v.end(), 0.0);
  return su / double(U.size()) + sv / double(v.size());
}

namespace {

// Dykstra's alternating projections, per edge, onto
// { rho >= 0 } and { sum_{d' != d} rho_{d'} <= c_d  for all d }.
// Each halfspace has normal (1,...,1,0,1,...,1) with squared norm D-1.
bool project_headroom(Vec& rho, const Vec& c, int sweeps = 40) {
  const int D = static_cast<int>(rho.size());
  if (D == 1) {
    rho[0] = std::max(rho[0], 0.0);
    return c[0] >= -1e-9;
  }
  Mat corr = Mat::Zero(D, D + 1);  // Dykstra corrections per constraint
  for (int s = 0; s < sweeps; ++s) {
    for (int d = 0; d <= D; ++d) {
      Vec p = rho + corr.col(d);
      Vec q;
      if (d == D) {
        q = p.cwiseMax(0.0);
      } else {
        double lhs = p.sum() - p[d];
        if (lhs <= c[d]) {
          q = p;
        } else {
          double shift = (lhs - c[d]) / double(D - 1);
          q = p;
          for (int i = 0; i < D; ++i)
            if (i != d) q[i] -= shift;
        }
      }
      corr.col(d) = p - q;
      rho = q;
    }
  }
  for (int d = 0; d < D; ++d) {
    double lhs = rho.sum() - rho[d];
    if (lhs > c[d] + 1e-6 * std::max(1.0, std::abs(c[d]))) return false;
  }
  return true;
}

}  // namespace

bool global_domain_consensus(const std::vector<Vec>& Z,
                             const std::vector<double>& U,
                             const std::vector<Vec>& l, const Vec& C,
                             double beta_step, std::vector<Vec>& R,
                             int iters) {
  const int D = static_cast<int>(Z.size());
  const int n = static_cast<int>(C.size());
  std::vector<Vec> cand = R;  // warm start
  bool feasible = true;

  // With f_e == 0 the objective separates per edge; the unconstrained optimum
  // is R[d] = Z[d] + l[d] and the gradient step with 1/beta reaches it
  // directly, so the iterations only matter when headroom constraints bind.
  const double step = beta_step > 0 ? 1.0 / beta_step : 1.0;
  Vec rho(D), head(D);
  for (int it = 0; it < iters; ++it) {
    double moved = 0.0;
    for (int e = 0; e < n; ++e) {
      for (int d = 0; d < D; ++d) {
        double grad = beta_step * (cand[d][e] - (Z[d][e] + l[d][e]));
        rho[d] = cand[d][e] - step * grad;
        head[d] = U[d] * C[e] - Z[d][e];
      }
      bool ok = project_headroom(rho, head);
      if (!ok) feasible = false;
      for (int d = 0; d < D; ++d) {
        moved = std::max(moved, std::abs(rho[d] - cand[d][e]));
        cand[d][e] = rho[d];
      }
    }
    if (moved < 1e-12) break;
  }
  if (!feasible) return false;  // keep previous R
  R = cand;
  return true;
}

void hier_dual_update(std::vector<double>& v, std::vector<Vec>& l,
                      const std::vector<double>& U, double O,
                      const std::vector<Vec>& Z, const std::vector<Vec>& R) {
  for (size_t d = 0; d < v.size(); ++d) {
    v[d] += U[d] - O;
    l[d] += Z[d] - R[d];
  }
}

std::vector<int> cluster_regions(const Topology& t, int num_regions) {
  int m = t.num_nodes();
  num_regions = std::clamp(num_regions, 1, m);
  Mat lat = t.latency_matrix();
  // Average-linkage agglomerative clustering; ties break on smallest indices.
  std::vector<std::vector<int>> clusters(m);
  for (int v = 0; v < m; ++v) clusters[v] = {v};
  while (static_cast<int>(clusters.size()) > num_regions) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<int, int> pick{-1, -1};
    for (size_t a = 0; a < clusters.size(); ++a)
      for (size_t b = a + 1; b < clusters.size(); ++b) {
        double sum = 0.0;
        for (int x : clusters[a])
          for (int y : clusters[b]) sum += lat(x, y) + lat(y, x);
        double avg = sum / double(2 * clusters[a].size() * clusters[b].size());
        if (avg < best) {
          best = avg;
          pick = {static_cast<int>(a), static_cast<int>(b)};
        }
      }
    auto& [a, b] = pick;
    clusters[a].insert(clusters[a].end(), clusters[b].begin(),
                       clusters[b].end());
    std::sort(clusters[a].begin(), clusters[a].end());
    clusters.erase(clusters.begin() + b);
  }
  std::vector<int> region(m, 0);
  for (size_t c = 0; c < clusters.size(); ++c)
    for (int v : clusters[c]) region[v] = static_cast<int>(c);
  return region;
}

NodeId latency_centroid(const Topology& t, const std::vector<NodeId>& members,
                        const Mat& latency) {
  NodeId best = members.empty() ? 0 : members[0];
  double best_cost = std::numeric_limits<double>::infinity();
  for (NodeId cand : members) {
    double worst = 0.0;
    for (NodeId v : members)
      worst = std::max(worst, std::max(latency(cand, v), latency(v, cand)));
    if (worst < best_cost) {
      best_cost = worst;
      best = cand;
    }
  }
  return best;
}

}  // namespace dte
