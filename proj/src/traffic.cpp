#include "dte/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace dte {

std::string to_string(TrafficModel m) {
  switch (m) {
    case TrafficModel::kUniform: return "uniform";
    case TrafficModel::kGravity: return "gravity";
    case TrafficModel::kBimodal: return "bimodal";
  }
  return "uniform";
}

TrafficModel traffic_model_from_string(const std::string& s) {
  if (s == "uniform") return TrafficModel::kUniform;
  if (s == "gravity") return TrafficModel::kGravity;
  if (s == "bimodal") return TrafficModel::kBimodal;
  throw InputError("unknown traffic model: " + s);
}

double TrafficMatrix::total_demand() const {
  double s = 0.0;
  for (const auto& c : commodities) s += c.demand;
  return s;
}

double TrafficMatrix::min_demand() const {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& c : commodities) s = std::min(s, c.demand);
  return s;
}

double TrafficMatrix::max_demand() const {
  double s = 0.0;
  for (const auto& c : commodities) s = std::max(s, c.demand);
  return s;
}

Vec demand_vector(const Commodity& c, int num_nodes) {
  Vec b = Vec::Zero(num_nodes);
  b[c.src] = +c.demand;
  b[c.dst] = -c.demand;
  return b;
}

namespace {

// Lognormal with given mean and coefficient of variation.
double draw_lognormal(std::mt19937_64& rng, double mean, double cv) {
  double sigma2 = std::log(1.0 + cv * cv);
  double mu = std::log(mean) - 0.5 * sigma2;
  std::normal_distribution<double> normal(mu, std::sqrt(sigma2));
  return std::exp(normal(rng));
}

std::vector<std::pair<NodeId, NodeId>> pick_pairs(const Topology& t,
                                                  double density,
                                                  std::mt19937_64& rng) {
  int m = t.num_nodes();
  std::vector<std::pair<NodeId, NodeId>> all;
  all.reserve(size_t(m) * (m - 1));
  for (NodeId s = 0; s < m; ++s)
    for (NodeId d = 0; d < m; ++d)
      if (s != d) all.emplace_back(s, d);
  size_t want = static_cast<size_t>(density * all.size());
  want = std::min(want, all.size());
  // Partial Fisher-Yates, then restore (src, dst) order for reproducible
  // output files.
  for (size_t i = 0; i < want; ++i) {
    std::uniform_int_distribution<size_t> pick(i, all.size() - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(want);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

TrafficMatrix generate_tm(const Topology& t, TrafficModel model,
                          std::uint64_t seed, const TmOptions& opts) {
  if (!(opts.density > 0.0 && opts.density <= 1.0))
    throw InputError("generate_tm: density must be in (0, 1]");
  std::mt19937_64 rng(seed);
  TrafficMatrix tm;
  tm.model = model;
  tm.seed = seed;
  auto pairs = pick_pairs(t, opts.density, rng);

  std::vector<double> degree(t.num_nodes(), 0.0);
  for (const Edge& e : t.edges()) degree[e.head] += 0.5, degree[e.tail] += 0.5;
  double mean_w = 0.0;
  if (!pairs.empty()) {
    for (auto [a, b] : pairs) mean_w += degree[a] * degree[b];
    mean_w /= double(pairs.size());
  }

  for (auto [s, d] : pairs) {
    double demand = 0.0;
    switch (model) {
      case TrafficModel::kUniform: {
        std::uniform_real_distribution<double> u(opts.d_min, opts.d_max);
        demand = u(rng);
        break;
      }
      case TrafficModel::kGravity: {
        // Degree-product weights, scaled so the mean matches the uniform
        // model's midpoint.
        double w = degree[s] * degree[d];
        std::uniform_real_distribution<double> jitter(0.9, 1.1);
        demand = 0.5 * (opts.d_min + opts.d_max) * (w / mean_w) * jitter(rng);
        break;
      }
      case TrafficModel::kBimodal: {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        bool high = coin(rng) < 0.2;
        demand = draw_lognormal(rng, high ? 8.0 * opts.bimodal_mu : opts.bimodal_mu,
                                0.25);
        break;
      }
    }
    tm.commodities.push_back({s, d, std::max(demand, 1e-9)});
  }
  return tm;
}

TrafficMatrix scale_to_load(
    const TrafficMatrix& tm, double target_mlu,
    const std::function<double(const TrafficMatrix&)>& oracle_mlu) {
  double mlu = oracle_mlu(tm);
  if (!(mlu > 0.0))
    throw InputError("scale_to_load: oracle reported non-positive MLU");
  double sigma = target_mlu / mlu;
  TrafficMatrix out = tm;
  for (auto& c : out.commodities) c.demand *= sigma;
  return out;
}

TrafficMatrix perturb_tm(const TrafficMatrix& tm, double fraction,
                         PerturbRule rule, std::mt19937_64& rng,
                         const Topology& t, const TrafficMatrix& initial_tm) {
  TrafficMatrix out = tm;
  if (fraction <= 0.0 || tm.commodities.empty()) return out;
  size_t count = static_cast<size_t>(
      std::ceil(fraction * double(tm.commodities.size())));
  count = std::min(count, tm.commodities.size());
  std::vector<size_t> idx(tm.commodities.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  if (rule == PerturbRule::kUniform) {
    double lo = initial_tm.min_demand(), hi = initial_tm.max_demand();
    std::uniform_real_distribution<double> u(lo, hi);
    for (size_t i = 0; i < count; ++i) out.commodities[idx[i]].demand = u(rng);
  } else {
    // Sample a fresh gravity matrix and copy the chosen entries from it,
    // approximately preserving locality.
    std::uniform_int_distribution<std::uint64_t> reseed;
    TrafficMatrix fresh = generate_tm(t, TrafficModel::kGravity, reseed(rng));
    double lo = initial_tm.min_demand(), hi = initial_tm.max_demand();
    for (size_t i = 0; i < count; ++i) {
      const Commodity& c = out.commodities[idx[i]];
      double v = 0.0;
      bool copied = false;
      for (const Commodity& f : fresh.commodities)
        if (f.src == c.src && f.dst == c.dst) {
          v = f.demand;
          copied = true;
          break;
        }
      if (!copied) {
        std::uniform_real_distribution<double> u(lo, hi);
        v = u(rng);
      }
      out.commodities[idx[i]].demand = std::clamp(v, lo, hi);
    }
  }
  return out;
}

EventSchedule failure_schedule(double k_failures, double horizon_s,
                               std::mt19937_64& rng, int num_links,
                               double slot_s, double window_s) {
  EventSchedule sched;
  if (k_failures <= 0.0 || num_links <= 0) return sched;
  int slots_per_window = static_cast<int>(window_s / slot_s);
  double p = std::min(1.0, k_failures / double(slots_per_window));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (double ts = slot_s; ts <= horizon_s + 1e-9; ts += slot_s) {
    if (coin(rng) < p) {
      std::uniform_int_distribution<int> pick(0, num_links - 1);
      SimEventSpec ev;
      ev.kind = SimEventSpec::kLinkFailure;
      ev.t_seconds = ts;
      ev.link = pick(rng);
      sched.events.push_back(ev);
    }
  }
  return sched;
}

EventSchedule demand_change_schedule(double fraction, double horizon_s,
                                     double period_s) {
  EventSchedule sched;
  if (fraction <= 0.0) return sched;
  for (double ts = period_s; ts <= horizon_s + 1e-9; ts += period_s) {
    SimEventSpec ev;
    ev.kind = SimEventSpec::kDemandChange;
    ev.t_seconds = ts;
    ev.fraction = fraction;
    sched.events.push_back(ev);
  }
  return sched;
}

EventSchedule merge_schedules(const EventSchedule& a, const EventSchedule& b) {
  EventSchedule out = a;
  out.events.insert(out.events.end(), b.events.begin(), b.events.end());
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const SimEventSpec& x, const SimEventSpec& y) {
                     return x.t_seconds < y.t_seconds;
                   });
  return out;
}

std::string tm_to_csv(const TrafficMatrix& tm, const Topology& t) {
  std::ostringstream out;
  out << "# model=" << to_string(tm.model) << " seed=" << tm.seed << "\n";
  out << "src,dst,demand\n";
  for (const Commodity& c : tm.commodities)
    out << t.node_name(c.src) << "," << t.node_name(c.dst) << ","
        << std::setprecision(17) << c.demand << "\n";
  return out.str();
}

TrafficMatrix tm_from_csv(const std::string& text, const Topology& t) {
  TrafficMatrix tm;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("src,", 0) == 0) continue;
    std::istringstream ls(line);
    std::string s, d, dm;
    if (!std::getline(ls, s, ',') || !std::getline(ls, d, ',') ||
        !std::getline(ls, dm, ','))
      throw InputError("bad traffic matrix line: " + line);
    NodeId sv = t.node_by_name(s), dv = t.node_by_name(d);
    if (sv < 0 || dv < 0) throw InputError("unknown node in TM line: " + line);
    double demand = std::stod(dm);
    if (!(demand > 0.0)) throw InputError("non-positive demand: " + line);
    if (sv == dv) throw InputError("source equals sink: " + line);
    tm.commodities.push_back({sv, dv, demand});
  }
  return tm;
}

TrafficMatrix tm_from_csv_file(const std::string& path, const Topology& t) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return tm_from_csv(ss.str(), t);
}

std::string schedule_to_csv(const EventSchedule& s) {
  std::ostringstream out;
  out << "t_seconds,event,args\n";
  for (const auto& ev : s.events) {
    if (ev.kind == SimEventSpec::kDemandChange)
      out << ev.t_seconds << ",demand_change," << ev.fraction << "\n";
    else
      out << ev.t_seconds << ",link_failure," << ev.link << "\n";
  }
  return out.str();
}

EventSchedule schedule_from_csv(const std::string& text) {
  EventSchedule s;
  std::istringstream in(text);
  std::string line;
  double last_t = -1.0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("t_seconds", 0) == 0)
      continue;
    std::istringstream ls(line);
    std::string ts, kind, args;
    std::getline(ls, ts, ',');
    std::getline(ls, kind, ',');
    std::getline(ls, args, ',');
    SimEventSpec ev;
    ev.t_seconds = std::stod(ts);
    if (ev.t_seconds < last_t)
      throw InputError("schedule timestamps must be non-decreasing");
    last_t = ev.t_seconds;
    if (kind == "demand_change") {
      ev.kind = SimEventSpec::kDemandChange;
      ev.fraction = std::stod(args);
    } else if (kind == "link_failure") {
      ev.kind = SimEventSpec::kLinkFailure;
      ev.link = std::stoi(args);
    } else {
      throw InputError("unknown schedule event: " + kind);
    }
    s.events.push_back(ev);
  }
  return s;
}

}  // namespace dte
