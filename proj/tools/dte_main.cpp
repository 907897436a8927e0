#include <CLI11.hpp>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dte/csvio.hpp"
#include "dte/oracle.hpp"
#include "dte/simnet.hpp"
#include "dte/solver.hpp"

namespace {

using namespace dte;

struct CommonArgs {
  std::string topology_file;
  std::string tm_file;
  std::string mode = "path-mlu";
  std::string out_prefix = "dte_out";
  int T_paths = 4;
  double rho = 1.0, eta = 1.0, gamma = 1.0, eps = 1e-4, kappa = 0.0;
  int inner_iters = 10, pgd_iters = 50, max_outer = 400;
  double tol = 0.01;
  int regions = 1;
  double hier_beta = 1.0;
  bool async_barrier = false;
  int barrier_k = 0;
  int barrier_tau = 3;
  std::uint64_t seed = 0;
  double default_latency_ms = 1.0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool need_tm = true) {
  cmd->add_option("--topology", a.topology_file,
                  "edge-list or GraphML topology file")
      ->required();
  auto* tm = cmd->add_option("--tm", a.tm_file, "traffic matrix CSV");
  if (need_tm) tm->required();
  cmd->add_option("--mode", a.mode,
                  "edge-mlu | edge-maxflow | path-mlu | path-maxflow");
  cmd->add_option("--paths", a.T_paths, "paths per commodity (path modes)");
  cmd->add_option("--rho", a.rho, "outer ADMM step");
  cmd->add_option("--eta", a.eta, "inner ADMM step");
  cmd->add_option("--gamma", a.gamma, "switch-problem step");
  cmd->add_option("--eps", a.eps, "l2 regularization coefficient");
  cmd->add_option("--kappa", a.kappa, "l1 sparsity coefficient");
  cmd->add_option("--inner-iters", a.inner_iters, "inner rounds per outer");
  cmd->add_option("--pgd-iters", a.pgd_iters, "PGD iterations per x-update");
  cmd->add_option("--max-outer", a.max_outer, "outer round budget");
  cmd->add_option("--tol", a.tol, "relative convergence tolerance");
  cmd->add_option("--regions", a.regions, "region count (hierarchical if > 1)");
  cmd->add_option("--hier-beta", a.hier_beta, "inter-region consensus step");
  cmd->add_flag("--async", a.async_barrier, "partial-barrier asynchrony");
  cmd->add_option("--barrier-k", a.barrier_k, "min responders per round");
  cmd->add_option("--barrier-tau", a.barrier_tau, "max report staleness");
  cmd->add_option("--seed", a.seed, "RNG seed");
  cmd->add_option("--default-latency", a.default_latency_ms,
                  "latency for links without one (ms)");
  cmd->add_option("--out", a.out_prefix, "output file prefix");
  cmd->set_config("--config", "", "flat key=value config file");
}

Topology load_topology_arg(const CommonArgs& a) {
  LoadOptions opts;
  opts.default_latency_ms = a.default_latency_ms;
  if (!std::filesystem::exists(a.topology_file))
    throw InputError("no such file: " + a.topology_file);
  if (a.topology_file.size() > 8 &&
      a.topology_file.substr(a.topology_file.size() - 8) == ".graphml")
    return load_graphml_file(a.topology_file, opts);
  return load_edge_list_file(a.topology_file, opts);
}

SolverOptions solver_options(const CommonArgs& a) {
  SolverOptions o;
  o.mode = solve_mode_from_string(a.mode);
  o.cfg.rho = a.rho;
  o.cfg.eta = a.eta;
  o.cfg.gamma = a.gamma;
  o.cfg.eps = a.eps;
  o.cfg.kappa = a.kappa;
  o.cfg.inner_iters_per_outer = a.inner_iters;
  o.cfg.pgd_iters = a.pgd_iters;
  o.cfg.tol_rel = a.tol;
  o.T_paths = a.T_paths;
  o.max_outer_rounds = a.max_outer;
  o.regions = a.regions;
  o.hier_beta = a.hier_beta;
  o.barrier.synchronous = !a.async_barrier;
  if (a.barrier_k > 0) o.barrier.k_min = a.barrier_k;
  o.barrier.tau = a.barrier_tau;
  o.seed = a.seed;
  return o;
}

std::map<std::string, std::string> config_echo(const CommonArgs& a,
                                               const char* command) {
  std::map<std::string, std::string> kv;
  kv["command"] = command;
  kv["topology"] = a.topology_file;
  kv["tm"] = a.tm_file;
  kv["mode"] = a.mode;
  kv["paths"] = std::to_string(a.T_paths);
  kv["rho"] = std::to_string(a.rho);
  kv["eta"] = std::to_string(a.eta);
  kv["gamma"] = std::to_string(a.gamma);
  kv["eps"] = std::to_string(a.eps);
  kv["kappa"] = std::to_string(a.kappa);
  kv["inner_iters"] = std::to_string(a.inner_iters);
  kv["pgd_iters"] = std::to_string(a.pgd_iters);
  kv["tol"] = std::to_string(a.tol);
  kv["regions"] = std::to_string(a.regions);
  kv["async"] = a.async_barrier ? "1" : "0";
  kv["barrier_k"] = std::to_string(a.barrier_k);
  kv["barrier_tau"] = std::to_string(a.barrier_tau);
  kv["seed"] = std::to_string(a.seed);
  return kv;
}

std::vector<PathSet> build_paths(const Topology& t, const TrafficMatrix& tm,
                                 int T_paths) {
  std::vector<PathSet> ps;
  for (const Commodity& c : tm.commodities)
    ps.push_back(k_shortest_paths(t, c.src, c.dst, T_paths));
  return ps;
}

int cmd_solve(const CommonArgs& a) {
  Topology t = load_topology_arg(a);
  TrafficMatrix tm = tm_from_csv_file(a.tm_file, t);
  SolverOptions opts = solver_options(a);

  System sys(t, tm, opts);
  SolveResult res = solve(sys);

  std::ostringstream out;
  out << config_header(config_echo(a, "solve"));
  out << std::setprecision(17);
  if (is_path_mode(opts.mode)) {
    out << "commodity,path,split\n";
    for (const SwitchAgent& sw : sys.switches())
      for (const CommodityState& s : sw.commodities())
        for (int p = 0; p < s.splits.size(); ++p)
          if (s.splits[p] != 0.0)
            out << s.global_index << "," << p << "," << s.splits[p] << "\n";
  } else {
    out << "commodity,edge,flow\n";
    for (const SwitchAgent& sw : sys.switches())
      for (const CommodityState& s : sw.commodities())
        for (int e = 0; e < s.x.size(); ++e)
          if (std::abs(s.x[e]) > 1e-9)
            out << s.global_index << "," << e << "," << s.x[e] << "\n";
  }
  write_file(a.out_prefix + "_assignment.csv", out.str());

  std::cout << std::setprecision(6);
  std::cout << "MLU=" << sys.mlu() << "\n";
  if (is_maxflow(opts.mode))
    std::cout << "satisfaction=" << sys.satisfaction() << "\n";
  std::cout << "objective=" << res.objective << "\n"
            << "converged=" << (res.converged ? 1 : 0) << "\n"
            << "outer_rounds=" << res.outer_rounds << "\n"
            << "inner_rounds=" << res.inner_rounds << "\n"
            << "wall_ms=" << res.wall_ms << "\n";
  return res.solver_flagged ? 1 : 0;
}

int cmd_simulate(const CommonArgs& a, double duration, double perturb,
                 double every, const std::string& perturb_rule,
                 double failures, const std::string& schedule_file,
                 bool oracle_ref) {
  Topology t = load_topology_arg(a);
  TrafficMatrix tm = tm_from_csv_file(a.tm_file, t);

  sim::ExperimentConfig cfg;
  cfg.solver = solver_options(a);
  cfg.duration_s = duration;
  cfg.seed = a.seed;
  cfg.perturb_rule = perturb_rule == "gravity" ? PerturbRule::kGravity
                                               : PerturbRule::kUniform;
  if (!schedule_file.empty()) {
    std::ifstream f(schedule_file);
    if (!f) throw InputError("no such file: " + schedule_file);
    std::stringstream ss;
    ss << f.rdbuf();
    cfg.schedule = schedule_from_csv(ss.str());
  } else {
    if (perturb > 0.0)
      cfg.schedule = merge_schedules(
          cfg.schedule, demand_change_schedule(perturb, duration, every));
    if (failures > 0.0) {
      std::mt19937_64 frng(a.seed + 1);
      int num_links = 0;
      for (const Edge& e : t.edges()) num_links = std::max(num_links, e.link + 1);
      cfg.schedule = merge_schedules(
          cfg.schedule,
          failure_schedule(failures, duration, frng, num_links));
    }
  }
  int T_paths = a.T_paths;
  if (oracle_ref) {
    cfg.reference = [T_paths](const Topology& topo, const TrafficMatrix& m)
        -> std::optional<double> {
      long size = 0;
      for (size_t k = 0; k < m.commodities.size(); ++k) size += T_paths;
      if (size > 2000 || topo.num_nodes() > 40) return std::nullopt;
      auto ps = build_paths(topo, m, T_paths);
      return oracle::exact_path_mlu(topo, m, ps).mlu;
    };
  }

  sim::SimTrace trace = sim::run_experiment(t, tm, cfg);
  auto kv = config_echo(a, "simulate");
  kv["duration"] = std::to_string(duration);
  kv["perturb"] = std::to_string(perturb);
  kv["failures"] = std::to_string(failures);
  write_file(a.out_prefix + "_trace.csv", trace.to_csv(kv));

  std::ostringstream reg;
  reg << config_header(kv);
  reg << "metric,value\n";
  reg << std::setprecision(17);
  reg << "objective_regret," << sim::objective_regret(trace) << "\n";
  reg << "capacity_regret," << sim::capacity_regret(trace) << "\n";
  reg << "sampling_period_s," << cfg.sample_period_s << "\n";
  write_file(a.out_prefix + "_regret.csv", reg.str());

  std::cout << "objective_regret=" << sim::objective_regret(trace) << "\n"
            << "capacity_regret=" << sim::capacity_regret(trace) << "\n"
            << "epochs=" << trace.rounds_to_converge.size() << "\n"
            << "bytes_up=" << trace.bytes_up << "\n"
            << "bytes_down=" << trace.bytes_down << "\n";
  if (trace.xupdate_rounds > 0)
    std::cout << "xupdate_wall_ms_mean="
              << trace.xupdate_wall_ms_total / double(trace.xupdate_rounds)
              << "\n";
  return 0;
}

int cmd_sweep_kappa(const CommonArgs& a, std::vector<double> kappas) {
  Topology t = load_topology_arg(a);
  TrafficMatrix tm = tm_from_csv_file(a.tm_file, t);
  if (kappas.empty()) {
    // 7 log-spaced points over the published sweep range.
    double lo = std::log(1e-10), hi = std::log(5e-7);
    for (int i = 0; i < 7; ++i)
      kappas.push_back(std::exp(lo + (hi - lo) * double(i) / 6.0));
  }

  std::ostringstream out;
  auto kv = config_echo(a, "sweep-kappa");
  out << config_header(kv);
  out << "kappa,mlu,stretch_median,stretch_p95,nonzero_entries\n";
  for (double kappa : kappas) {
    CommonArgs run = a;
    run.kappa = kappa;
    run.mode = "edge-mlu";
    SolverOptions opts = solver_options(run);
    System sys(t, tm, opts);
    SolveResult res = solve(sys);

    std::vector<Vec> assignments(tm.commodities.size());
    long nnz = 0;
    for (const SwitchAgent& sw : sys.switches())
      for (const CommodityState& s : sw.commodities()) {
        assignments[s.global_index] = s.x;
        for (int e = 0; e < s.x.size(); ++e)
          if (s.x[e] > 1e-6 * std::max(1.0, s.commodity.demand)) ++nnz;
      }
    auto st = sim::stretch_from_assignments(assignments, sys.topology(),
                                            tm.commodities);
    out << std::setprecision(10) << kappa << "," << res.mlu << "," << st.median
        << "," << st.p95 << "," << nnz << "\n";
    std::cout << "kappa=" << kappa << " mlu=" << res.mlu
              << " stretch_median=" << st.median << " p95=" << st.p95
              << " nnz=" << nnz << "\n";
  }
  write_file(a.out_prefix + "_pareto.csv", out.str());
  return 0;
}

int cmd_oracle(const CommonArgs& a) {
  Topology t = load_topology_arg(a);
  TrafficMatrix tm = tm_from_csv_file(a.tm_file, t);
  std::cout << std::setprecision(10);
  if (a.mode == "edge-mlu") {
    std::cout << "U*=" << oracle::exact_edge_mlu(t, tm) << "\n";
  } else if (a.mode == "path-mlu") {
    auto ps = build_paths(t, tm, a.T_paths);
    std::cout << "U*=" << oracle::exact_path_mlu(t, tm, ps).mlu << "\n";
  } else if (a.mode == "path-maxflow" || a.mode == "edge-maxflow" ||
             a.mode == "maxflow") {
    auto ps = build_paths(t, tm, a.T_paths);
    std::cout << "satisfaction*=" << oracle::exact_maxflow(t, tm, ps).satisfaction
              << "\n";
  } else {
    throw InputError("oracle mode must be path-mlu, edge-mlu or maxflow");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed WAN traffic-engineering solver suite"};
  app.require_subcommand(1);

  CommonArgs sa, ma, ka, oa;
  double duration = 600.0, perturb = 0.0, every = 20.0, failures = 0.0;
  std::string perturb_rule = "uniform", schedule_file;
  bool oracle_ref = false;
  std::vector<double> kappas;

  CLI::App* solve_cmd = app.add_subcommand("solve", "one-shot solve");
  add_common(solve_cmd, sa);

  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "discrete-event experiment run");
  add_common(sim_cmd, ma);
  sim_cmd->add_option("--duration", duration, "simulated seconds");
  sim_cmd->add_option("--perturb", perturb, "demand-change fraction");
  sim_cmd->add_option("--every", every, "demand-change period (s)");
  sim_cmd->add_option("--perturb-rule", perturb_rule, "uniform | gravity");
  sim_cmd->add_option("--failures", failures,
                      "expected link failures per 5 minutes");
  sim_cmd->add_option("--schedule", schedule_file, "explicit schedule CSV");
  sim_cmd->add_flag("--oracle-ref", oracle_ref,
                    "use the oracle for per-epoch optimum (small instances)");

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep-kappa", "sparsity sweep for the edge solver");
  add_common(sweep_cmd, ka);
  sweep_cmd->add_option("--kappas", kappas, "explicit kappa values");

  CLI::App* oracle_cmd =
      app.add_subcommand("oracle", "independent reference solver");
  add_common(oracle_cmd, oa);

  try {
    app.parse(argc, argv);
    if (solve_cmd->parsed()) return cmd_solve(sa);
    if (sim_cmd->parsed())
      return cmd_simulate(ma, duration, perturb, every, perturb_rule, failures,
                          schedule_file, oracle_ref);
    if (sweep_cmd->parsed()) return cmd_sweep_kappa(ka, kappas);
    if (oracle_cmd->parsed()) return cmd_oracle(oa);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  } catch (const dte::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
