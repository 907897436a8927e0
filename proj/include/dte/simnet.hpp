#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "dte/metrics.hpp"
#include "dte/solver.hpp"

namespace dte::sim {

struct SimTrace {
  struct Sample {
    double t_s = 0.0;
    double objective = 0.0;       // MLU or satisfaction
    double optimal = 0.0;         // epoch reference O*_t
    double mlu = 0.0;
    bool on_grid = false;         // regret sums run over the 20 s grid only
    int epoch = 0;
  };
  std::vector<Sample> samples;
  std::vector<std::pair<double, std::string>> annotations;  // (t_s, text)

  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
  std::uint64_t messages = 0;
  std::vector<long> rounds_to_converge;     // per epoch; -1 = never
  std::vector<double> converge_time_s;      // per epoch; inf = never
  bool maximize = false;                    // objective sense
  bool self_referenced = false;             // O* taken from own convergence
  double xupdate_wall_ms_total = 0.0;
  long xupdate_rounds = 0;

  std::string to_csv(const std::map<std::string, std::string>& config) const;
};

// Appendix-style discrete regrets over the sampling grid.
double objective_regret(const SimTrace& trace);
double capacity_regret(const SimTrace& trace);

struct ExperimentConfig {
  SolverOptions solver;
  double duration_s = 600.0;
  double sample_period_s = 20.0;
  EventSchedule schedule;
  PerturbRule perturb_rule = PerturbRule::kUniform;
  std::uint64_t seed = 0;
  double switch_compute_ms = 1.0;
  double coord_compute_ms = 0.5;
  // Outer rounds solve the inequality-constrained utilization program on the
  // coordinator rather than the closed-form mean update, so they cost extra.
  double coord_outer_compute_ms = 10.0;
  // FRR-only arm keeps the redistributed splits without re-optimizing.
  bool reoptimize = true;
  // Per-epoch optimum; nullopt = self-referenced (the epoch's own converged
  // value, recorded into the trace at the end).
  std::function<std::optional<double>(const Topology&, const TrafficMatrix&)>
      reference;
  // Path modes: seed the run from these splits (e.g. the oracle optimum for
  // an FRR-only baseline).
  std::vector<Vec> initial_splits;
  // Overrides the uniform/gravity perturbation with a scripted change.
  std::function<TrafficMatrix(const TrafficMatrix&, std::mt19937_64&)>
      perturber;
};

// Deterministic event loop around the same switch/coordinator state machines
// the in-process solver drives: message delays follow shortest-path
// propagation latency, coordinators sit at their region's latency centroid,
// demand changes and failures warm-start re-optimization.
SimTrace run_experiment(const Topology& t, const TrafficMatrix& tm,
                        const ExperimentConfig& cfg);

}  // namespace dte::sim
