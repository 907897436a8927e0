#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dte/topology.hpp"
#include "dte/types.hpp"

namespace dte {

struct Commodity {
  NodeId src = 0;
  NodeId dst = 0;
  double demand = 0.0;
};

enum class TrafficModel { kUniform, kGravity, kBimodal };

std::string to_string(TrafficModel m);
TrafficModel traffic_model_from_string(const std::string& s);

struct TrafficMatrix {
  std::vector<Commodity> commodities;
  TrafficModel model = TrafficModel::kUniform;
  std::uint64_t seed = 0;

  double total_demand() const;
  double min_demand() const;
  double max_demand() const;
};

// Demand vector of one commodity: +d at the source, -d at the sink.
Vec demand_vector(const Commodity& c, int num_nodes);

struct TmOptions {
  double density = 0.25;      // fraction of ordered pairs carrying demand
  double d_min = 1.0;         // uniform model range
  double d_max = 10.0;
  double bimodal_mu = 1.0;    // low mode mean; high mode mean is 8x
};

// Seed-deterministic synthetic traffic. Gravity weights are proportional to
// degree(src) * degree(dst); bimodal draws 80% of demands from a low mode
// (mean mu, cv 0.25) and 20% from a high mode (mean 8*mu, cv 0.25).
TrafficMatrix generate_tm(const Topology& t, TrafficModel model,
                          std::uint64_t seed, const TmOptions& opts = {});

// Multiplies every demand by target / oracle_mlu(tm); MLU is positively
// homogeneous in demands so one oracle solve suffices. The oracle callback
// keeps this module independent of any particular solver.
TrafficMatrix scale_to_load(const TrafficMatrix& tm, double target_mlu,
                            const std::function<double(const TrafficMatrix&)>& oracle_mlu);

enum class PerturbRule { kUniform, kGravity };

// Re-draws ceil(fraction*K) demands uniformly within [min, max] of the
// initial matrix; the gravity rule instead copies entries from a freshly
// sampled gravity matrix. Endpoints never change.
TrafficMatrix perturb_tm(const TrafficMatrix& tm, double fraction,
                         PerturbRule rule, std::mt19937_64& rng,
                         const Topology& t,
                         const TrafficMatrix& initial_tm);

struct SimEventSpec {
  enum Kind { kDemandChange, kLinkFailure } kind;
  double t_seconds = 0.0;
  double fraction = 0.0;   // demand change
  int link = -1;           // undirected link index to fail
};

struct EventSchedule {
  std::vector<SimEventSpec> events;  // non-decreasing timestamps
};

// Bernoulli link-failure draws every 20 s with probability chosen so the
// expected failure count over a 300 s window equals k_failures.
EventSchedule failure_schedule(double k_failures, double horizon_s,
                               std::mt19937_64& rng, int num_links,
                               double slot_s = 20.0, double window_s = 300.0);

// Demand-change marks every `period_s` with the given fraction.
EventSchedule demand_change_schedule(double fraction, double horizon_s,
                                     double period_s = 20.0);

EventSchedule merge_schedules(const EventSchedule& a, const EventSchedule& b);

// CSV "src,dst,demand" with '#' comments.
std::string tm_to_csv(const TrafficMatrix& tm, const Topology& t);
TrafficMatrix tm_from_csv(const std::string& text, const Topology& t);
TrafficMatrix tm_from_csv_file(const std::string& path, const Topology& t);

// CSV "t_seconds,event,args".
std::string schedule_to_csv(const EventSchedule& s);
EventSchedule schedule_from_csv(const std::string& text);

}  // namespace dte
