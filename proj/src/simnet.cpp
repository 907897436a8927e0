#include "dte/simnet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <queue>
#include <sstream>

#include "dte/csvio.hpp"

namespace dte::sim {

double objective_regret(const SimTrace& trace) {
  double sum = 0.0;
  for (const auto& s : trace.samples) {
    if (!s.on_grid) continue;
    double gap = trace.maximize ? s.optimal - s.objective
                                : s.objective - s.optimal;
    sum += std::max(0.0, gap);
  }
  return sum;
}

double capacity_regret(const SimTrace& trace) {
  double sum = 0.0;
  for (const auto& s : trace.samples)
    if (s.on_grid) sum += std::max(0.0, s.mlu - 1.0);
  return sum;
}

std::string SimTrace::to_csv(
    const std::map<std::string, std::string>& config) const {
  std::ostringstream out;
  out << config_header(config);
  if (self_referenced) out << "# optimal=self-referenced\n";
  out << "t_ms,series,value\n";
  out << std::setprecision(17);
  for (const auto& s : samples) {
    out << s.t_s * 1000.0 << ",objective," << s.objective << "\n";
    out << s.t_s * 1000.0 << ",optimal," << s.optimal << "\n";
    out << s.t_s * 1000.0 << ",mlu," << s.mlu << "\n";
  }
  for (const auto& [t, text] : annotations)
    out << t * 1000.0 << ",event," << text << "\n";
  out << "# bytes_up=" << bytes_up << " bytes_down=" << bytes_down
      << " messages=" << messages << "\n";
  return out.str();
}

namespace {

struct Event {
  double t_ms;
  std::uint64_t seq;
  enum Kind {
    kSwitchCompute,
    kCoordReceive,
    kCoordStep,
    kSwitchReceive,
    kGlobalReceive,
    kGlobalStep,
    kCouplingReceive,
    kDemandChange,
    kLinkFailure,
    kMetricSample,
  } kind;
  int target = -1;  // switch/region index
  SwitchReport report;
  InnerBcast inner;
  std::optional<OuterBcast> outer;
  DomainReport domain_report;
  DomainBcast domain_bcast;
  double fraction = 0.0;
  int link = -1;

  bool operator>(const Event& o) const {
    if (t_ms != o.t_ms) return t_ms > o.t_ms;
    return seq > o.seq;
  }
};

struct SwitchInbox {
  InnerBcast latest;
  Vec u_prev;
};

}  // namespace

SimTrace run_experiment(const Topology& topo0, const TrafficMatrix& tm0,
                        const ExperimentConfig& cfg) {
  SimTrace trace;
  trace.maximize = is_maxflow(cfg.solver.mode);

  System sys(topo0, tm0, cfg.solver);
  std::mt19937_64 rng(cfg.seed);
  TrafficMatrix initial_tm = tm0;
  double cap_scale = topo0.capacities().mean();

  // Placement: region coordinators at their members' latency centroid, the
  // global coordinator at the centroid of the region coordinators.
  Mat latency = topo0.latency_matrix();
  int R = static_cast<int>(sys.regions().size());
  std::vector<NodeId> coord_node(R);
  for (int r = 0; r < R; ++r) {
    std::vector<NodeId> members;
    for (int s : sys.regions()[r].members())
      members.push_back(sys.switches()[s].node());
    coord_node[r] = latency_centroid(topo0, members, latency);
  }
  NodeId global_node =
      sys.global() ? latency_centroid(topo0, coord_node, latency) : 0;

  auto lat_sw = [&](int region, int sw) {
    NodeId a = coord_node[region], b = sys.switches()[sw].node();
    double l = std::max(latency(a, b), latency(b, a));
    return std::isfinite(l) ? std::max(l, 0.01) : 1.0;
  };
  auto lat_global = [&](int region) {
    NodeId a = global_node, b = coord_node[region];
    double l = std::max(latency(a, b), latency(b, a));
    return std::isfinite(l) ? std::max(l, 0.01) : 1.0;
  };

  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  std::uint64_t seq = 0;
  auto push = [&](Event e) {
    e.seq = seq++;
    queue.push(std::move(e));
  };

  std::vector<SwitchInbox> inbox(sys.switches().size());
  for (size_t s = 0; s < sys.switches().size(); ++s) {
    const auto& coord = sys.regions()[sys.region_of_switch()[s]];
    inbox[s].latest.iter = 0;
    inbox[s].latest.pbar = coord.inner_state().Pbar;
    inbox[s].latest.u = coord.inner_state().u;
    inbox[s].u_prev = coord.inner_state().u;
  }

  std::vector<char> step_scheduled(R, 0);
  bool global_step_scheduled = false;
  bool idle = false;  // converged; waiting for the next disturbance
  int epoch = 0;
  double epoch_start_s = 0.0;
  long epoch_round_start = 0;
  std::vector<double> epoch_reference;  // per epoch; NaN = self-referenced

  admm::ConvergenceTracker tracker(std::nullopt, cfg.solver.cfg.tol_rel);
  std::optional<double> current_ref;
  auto begin_epoch = [&](double t_s) {
    epoch_start_s = t_s;
    epoch_round_start = sys.regions()[0].iter();
    current_ref.reset();
    if (cfg.reference) current_ref = cfg.reference(sys.topology(), sys.traffic());
    if (!current_ref) trace.self_referenced = true;
    epoch_reference.push_back(current_ref ? *current_ref
                                          : std::numeric_limits<double>::quiet_NaN());
    trace.rounds_to_converge.push_back(-1);
    trace.converge_time_s.push_back(std::numeric_limits<double>::infinity());
    tracker = admm::ConvergenceTracker(current_ref, cfg.solver.cfg.tol_rel);
    idle = false;
  };

  auto record_sample = [&](double t_s, bool on_grid) {
    SimTrace::Sample smp;
    smp.t_s = t_s;
    smp.objective = sys.objective();
    smp.mlu = sys.mlu();
    smp.optimal = current_ref ? *current_ref
                              : std::numeric_limits<double>::quiet_NaN();
    smp.on_grid = on_grid;
    smp.epoch = epoch;
    trace.samples.push_back(smp);
  };

  auto send_report = [&](int s, double now_ms) {
    int r = sys.region_of_switch()[s];
    Event ev;
    ev.kind = Event::kCoordReceive;
    ev.target = r;
    ev.report = sys.make_report(sys.switches()[s],
                                sys.regions()[r].iter() + 1);
    ev.t_ms = now_ms + lat_sw(r, s);
    trace.bytes_up += ev.report.bytes();
    trace.messages++;
    push(std::move(ev));
  };

  auto kick_all_switches = [&](double now_ms) {
    for (size_t s = 0; s < sys.switches().size(); ++s) {
      Event ev;
      ev.kind = Event::kSwitchCompute;
      ev.target = static_cast<int>(s);
      ev.t_ms = now_ms;
      push(std::move(ev));
    }
  };

  // Schedule the exogenous timeline.
  for (const auto& spec : cfg.schedule.events) {
    Event ev;
    ev.t_ms = spec.t_seconds * 1000.0;
    if (spec.kind == SimEventSpec::kDemandChange) {
      ev.kind = Event::kDemandChange;
      ev.fraction = spec.fraction;
    } else {
      ev.kind = Event::kLinkFailure;
      ev.link = spec.link;
    }
    push(std::move(ev));
  }
  // Grid marks run t = 0 .. T-1 periods; a final off-grid sample closes the
  // trace for plotting.
  for (double ts = 0.0; ts < cfg.duration_s - 1e-9; ts += cfg.sample_period_s) {
    Event ev;
    ev.kind = Event::kMetricSample;
    ev.t_ms = ts * 1000.0;
    push(std::move(ev));
  }

  if (!cfg.initial_splits.empty()) sys.set_splits(cfg.initial_splits);
  begin_epoch(0.0);
  if (cfg.reoptimize)
    kick_all_switches(0.0);
  else
    idle = true;  // FRR-only arm: hold the provided allocation

  const double horizon_ms = cfg.duration_s * 1000.0;
  while (!queue.empty()) {
    Event ev = queue.top();
    queue.pop();
    if (ev.t_ms > horizon_ms + 1e-6) break;
    double now = ev.t_ms;

    switch (ev.kind) {
      case Event::kSwitchCompute: {
        if (idle) break;
        int s = ev.target;
        auto w0 = std::chrono::steady_clock::now();
        Vec pull = System::consensus_pull(inbox[s].latest, inbox[s].u_prev);
        sys.switches()[s].update_all(cfg.solver.mode, pull, sys.flow_ops(),
                                     cfg.solver.cfg, sys.topology().version(),
                                     cap_scale);
        trace.xupdate_wall_ms_total +=
            std::chrono::duration<double, std::milli>(
                std::chrono::steady_clock::now() - w0)
                .count();
        trace.xupdate_rounds++;
        send_report(s, now + cfg.switch_compute_ms);
        break;
      }
      case Event::kCoordReceive: {
        int r = ev.target;
        sys.regions()[r].receive(ev.report);
        if (!idle && !step_scheduled[r] && sys.regions()[r].barrier_ready()) {
          step_scheduled[r] = 1;
          bool outer_next = (sys.regions()[r].iter() + 1) %
                                cfg.solver.cfg.inner_iters_per_outer ==
                            0;
          Event st;
          st.kind = Event::kCoordStep;
          st.target = r;
          st.t_ms = now + cfg.coord_compute_ms +
                    (outer_next ? cfg.coord_outer_compute_ms : 0.0);
          push(std::move(st));
        }
        break;
      }
      case Event::kCoordStep: {
        int r = ev.target;
        step_scheduled[r] = 0;
        if (idle) break;
        auto out = sys.regions()[r].step();
        bool outer_round = out.outer.has_value();
        for (int s : out.recipients) {
          Event rx;
          rx.kind = Event::kSwitchReceive;
          rx.target = s;
          rx.inner = out.inner;
          rx.outer = out.outer;
          rx.t_ms = now + lat_sw(r, s);
          trace.bytes_down += rx.inner.bytes() + (rx.outer ? rx.outer->bytes() : 0);
          trace.messages++;
          push(std::move(rx));
        }
        if (out.domain_report && sys.global()) {
          Event gr;
          gr.kind = Event::kGlobalReceive;
          gr.domain_report = *out.domain_report;
          gr.t_ms = now + lat_global(r);
          trace.bytes_up += gr.domain_report.bytes();
          trace.messages++;
          push(std::move(gr));
        }
        if (outer_round && r == 0) {
          // Harness-level convergence measurement at outer cadence.
          double obj = sys.objective();
          bool done;
          if (tracker.has_reference()) {
            done = tracker.check_objective(obj);
          } else {
            const auto& inner = sys.regions()[0].inner_state();
            done = tracker.check_residuals(inner.Xbar, inner.Pbar,
                                           cfg.solver.cfg.eta,
                                           std::max(1.0, inner.Xbar.norm()));
          }
          if (done) {
            idle = true;
            trace.rounds_to_converge[epoch] =
                sys.regions()[0].iter() - epoch_round_start;
            trace.converge_time_s[epoch] = now / 1000.0 - epoch_start_s;
            if (!current_ref) {
              current_ref = obj;  // self-referenced optimum for this epoch
              epoch_reference[epoch] = obj;
            }
            record_sample(now / 1000.0, false);
            trace.annotations.emplace_back(now / 1000.0, "converged");
          }
        }
        break;
      }
      case Event::kSwitchReceive: {
        int s = ev.target;
        inbox[s].u_prev = inbox[s].latest.u;
        inbox[s].latest = ev.inner;
        if (ev.outer && !ev.outer->beta_targets.empty())
          for (CommodityState& cs : sys.switches()[s].commodities()) {
            auto it = ev.outer->beta_targets.find(cs.global_index);
            if (it != ev.outer->beta_targets.end()) cs.beta_target = it->second;
          }
        if (!idle) {
          Event c;
          c.kind = Event::kSwitchCompute;
          c.target = s;
          c.t_ms = now;
          push(std::move(c));
        }
        break;
      }
      case Event::kGlobalReceive: {
        if (!sys.global()) break;
        sys.global()->receive(ev.domain_report);
        if (!idle && !global_step_scheduled && sys.global()->barrier_ready()) {
          global_step_scheduled = true;
          Event st;
          st.kind = Event::kGlobalStep;
          st.t_ms = now + cfg.coord_compute_ms + cfg.coord_outer_compute_ms;
          push(std::move(st));
        }
        break;
      }
      case Event::kGlobalStep: {
        global_step_scheduled = false;
        if (idle || !sys.global()) break;
        auto bcasts = sys.global()->step();
        for (auto& [d, b] : bcasts) {
          Event rx;
          rx.kind = Event::kCouplingReceive;
          rx.target = d;
          rx.domain_bcast = std::move(b);
          rx.t_ms = now + lat_global(d);
          trace.bytes_down += rx.domain_bcast.bytes();
          trace.messages++;
          push(std::move(rx));
        }
        break;
      }
      case Event::kCouplingReceive: {
        sys.regions()[ev.target].receive(ev.domain_bcast);
        break;
      }
      case Event::kDemandChange: {
        TrafficMatrix perturbed =
            cfg.perturber
                ? cfg.perturber(sys.traffic(), rng)
                : perturb_tm(sys.traffic(), ev.fraction, cfg.perturb_rule, rng,
                             sys.topology(), initial_tm);
        sys.apply_demand_change(perturbed);
        ++epoch;
        begin_epoch(now / 1000.0);
        trace.annotations.emplace_back(now / 1000.0, "demand_change");
        record_sample(now / 1000.0, false);
        kick_all_switches(now);
        break;
      }
      case Event::kLinkFailure: {
        sys.apply_link_failure(ev.link);
        cap_scale = sys.topology().capacities().mean();
        ++epoch;
        begin_epoch(now / 1000.0);
        if (!cfg.reoptimize) idle = true;  // FRR-only arm
        trace.annotations.emplace_back(now / 1000.0, "link_failure");
        record_sample(now / 1000.0, false);
        if (cfg.reoptimize) kick_all_switches(now);
        break;
      }
      case Event::kMetricSample: {
        record_sample(now / 1000.0, true);
        break;
      }
    }
  }

  // Self-referenced epochs: backfill the optimum with the epoch's converged
  // value (or its last observed objective when it never converged).
  if (trace.self_referenced) {
    std::vector<double> fill(epoch_reference.size());
    for (size_t e = 0; e < epoch_reference.size(); ++e) {
      fill[e] = epoch_reference[e];
      if (std::isnan(fill[e])) {
        double last = 0.0;
        for (const auto& s : trace.samples)
          if (s.epoch == static_cast<int>(e)) last = s.objective;
        fill[e] = last;
      }
    }
    for (auto& s : trace.samples)
      if (std::isnan(s.optimal)) s.optimal = fill[s.epoch];
  }
  return trace;
}

}  // namespace dte::sim
