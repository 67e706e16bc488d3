#ifndef VSNET_HARNESS_HPP
#define VSNET_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "rade.hpp"
#include "radv.hpp"
#include "sensing.hpp"
#include "swarm.hpp"

namespace vsnet {

enum class Algorithm { ls, admm, rade };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
  case Algorithm::ls:
    return "ls";
  case Algorithm::admm:
    return "admm";
  case Algorithm::rade:
    return "rade";
  }
  return "?";
}

struct Scenario {
  std::string id = "scenario";
  // swarm
  long long sensors = 0;
  double radius = 0.1;
  double capacity_low = 50.0;
  double capacity_high = 100.0;
  // request
  int v_count = 0;
  Topology topology = Topology::complete;
  double task_radius = 0.2;
  double demand_low = 25.0;
  double demand_high = 50.0;
  int hop_bound = 20;
  double alpha = 1.0;
  double beta = 1.0;
  int entry_sensors = 1;
  // estimation task
  long long n = 5;
  long long m = 10;
  double sigma2 = 1e-3;
  EstimatorOptions estimator;
  std::size_t max_iters = 10000;
  std::size_t max_rade_slots = 200000;
  // gossip phase caps, 0 = default
  RadvLimits limits;
  // experiment
  long long replications = 1;
  std::uint64_t seed = 1;
  std::vector<Algorithm> algorithms{Algorithm::ls, Algorithm::admm, Algorithm::rade};
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v, std::size_t line, const std::string& key) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  if (first != last && *first == '+')
    ++first;
  const auto [p, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || p != last)
    throw validation_error(line, "'" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& v, std::size_t line, const std::string& key) {
  if (v == "true" || v == "1")
    return true;
  if (v == "false" || v == "0")
    return false;
  throw validation_error(line, "'" + key + "' expects true or false");
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace detail

/// Stream seed for one replication and purpose.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t replication, std::uint64_t stream) {
  return detail::splitmix64(detail::splitmix64(base ^ detail::splitmix64(replication)) + stream);
}

inline void validate(const Scenario& s) {
  auto fail = [](const std::string& m) { throw validation_error(0, m); };
  if (s.sensors < 1)
    fail("P must be >= 1");
  if (!(s.radius > 0.0))
    fail("radius must be positive");
  if (!(s.capacity_low > 0.0) || s.capacity_low > s.capacity_high)
    fail("capacity range must satisfy 0 < low <= high");
  if (s.v_count < 1 || s.v_count > max_virtual_sensors)
    fail("V must be in [1, 64]");
  if (!(s.task_radius >= 0.0))
    fail("task_radius must be >= 0");
  if (!(s.demand_low > 0.0) || s.demand_low > s.demand_high)
    fail("demand range must satisfy 0 < low <= high");
  if (s.hop_bound < 1)
    fail("hop_bound must be >= 1");
  if (!(s.alpha >= 0.0) || !(s.beta >= 0.0))
    fail("alpha and beta must be >= 0");
  if (s.entry_sensors < 1 || s.entry_sensors > s.sensors)
    fail("entry_sensors must be in [1, P]");
  if (s.n < 1 || s.m < 1)
    fail("n and m must be >= 1");
  if (!(s.sigma2 >= 0.0) || !std::isfinite(s.sigma2))
    fail("sigma2 must be >= 0");
  if (!(s.estimator.tol.eps_abs > 0.0) || !(s.estimator.tol.eps_rel > 0.0))
    fail("eps_abs and eps_rel must be positive");
  if (!(s.estimator.penalty.rho > 0.0))
    fail("rho must be positive");
  if (s.max_iters < 1 || s.max_rade_slots < 1)
    fail("iteration caps must be >= 1");
  if (s.replications < 1)
    fail("replications must be >= 1");
}

/// Flat `key = value` text; `#` starts a comment. P and V and topology are required.
inline Scenario parse_scenario(std::istream& in) {
  Scenario s;
  std::map<std::string, std::size_t> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos)
      raw.erase(hash);
    const std::string text = detail::trim(raw);
    if (text.empty())
      continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw validation_error(line, "expected 'key = value'");
    const std::string key = detail::trim(std::string_view(text).substr(0, eq));
    const std::string val = detail::trim(std::string_view(text).substr(eq + 1));
    if (key.empty() || val.empty())
      throw validation_error(line, "expected 'key = value'");
    if (auto [it, fresh] = seen.emplace(key, line); !fresh)
      throw validation_error(line, "duplicate key '" + key + "' (first on line " + std::to_string(it->second) + ")");
    auto num = [&]<typename T>(T& dst) { dst = detail::parse_number<T>(val, line, key); };
    try {
      if (key == "scenario_id")
        s.id = val;
      else if (key == "P")
        num(s.sensors);
      else if (key == "radius")
        num(s.radius);
      else if (key == "capacity_low")
        num(s.capacity_low);
      else if (key == "capacity_high")
        num(s.capacity_high);
      else if (key == "V")
        num(s.v_count);
      else if (key == "topology")
        s.topology = parse_topology(val);
      else if (key == "task_radius")
        num(s.task_radius);
      else if (key == "demand_low")
        num(s.demand_low);
      else if (key == "demand_high")
        num(s.demand_high);
      else if (key == "hop_bound")
        num(s.hop_bound);
      else if (key == "alpha")
        num(s.alpha);
      else if (key == "beta")
        num(s.beta);
      else if (key == "entry_sensors")
        num(s.entry_sensors);
      else if (key == "n")
        num(s.n);
      else if (key == "m")
        num(s.m);
      else if (key == "sigma2")
        num(s.sigma2);
      else if (key == "eps_abs")
        num(s.estimator.tol.eps_abs);
      else if (key == "eps_rel")
        num(s.estimator.tol.eps_rel);
      else if (key == "rho")
        num(s.estimator.penalty.rho);
      else if (key == "rho_scaling") {
        if (val == "uniform")
          s.estimator.penalty.scaling = RhoScaling::uniform;
        else if (val == "degree")
          s.estimator.penalty.scaling = RhoScaling::degree;
        else
          throw validation_error(line, "rho_scaling must be uniform or degree");
      } else if (key == "z_normalization") {
        if (val == "gradient")
          s.estimator.z_norm = ZNormalization::gradient;
        else if (val == "plain-mean")
          s.estimator.z_norm = ZNormalization::plain_mean;
        else
          throw validation_error(line, "z_normalization must be gradient or plain-mean");
      } else if (key == "disjoint_pairs")
        s.estimator.disjoint_pairs = detail::parse_bool(val, line, key);
      else if (key == "max_iters")
        num(s.max_iters);
      else if (key == "max_rade_slots")
        num(s.max_rade_slots);
      else if (key == "search_slots")
        num(s.limits.search_slots);
      else if (key == "prune_slots")
        num(s.limits.prune_slots);
      else if (key == "benefit_slots")
        num(s.limits.benefit_slots);
      else if (key == "replications")
        num(s.replications);
      else if (key == "seed")
        num(s.seed);
      else if (key == "algorithms") {
        s.algorithms.clear();
        std::stringstream ss(val);
        std::string item;
        while (std::getline(ss, item, ',')) {
          item = detail::trim(item);
          if (item == "ls")
            s.algorithms.push_back(Algorithm::ls);
          else if (item == "admm")
            s.algorithms.push_back(Algorithm::admm);
          else if (item == "rade")
            s.algorithms.push_back(Algorithm::rade);
          else if (item != "none")
            throw validation_error(line, "unknown algorithm '" + item + "'");
        }
      } else
        throw validation_error(line, "unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw validation_error(line, e.what());
    }
  }
  for (const char* req : {"P", "V", "topology"})
    if (!seen.count(req))
      throw validation_error(0, std::string("missing required key '") + req + "'");
  validate(s);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw io_error("cannot read scenario file '" + path + "'");
  return parse_scenario(in);
}

struct EstimatorRecord {
  Algorithm algo = Algorithm::ls;
  std::size_t iterations = 0;
  std::uint64_t messages = 0;
  double mse = 0.0;
  bool converged = false;
};

struct MetricRecord {
  std::string scenario_id;
  std::uint64_t seed = 0;
  long long sensors = 0;
  int v_count = 0;
  Topology topology = Topology::complete;
  bool accepted = false;
  double benefit = 0.0;
  double upper_bound = 0.0;
  std::size_t search_slots = 0;
  std::size_t prune_slots = 0;
  std::size_t benefit_slots = 0;
  double msgs_per_sensor = 0.0;
  double search_msgs_per_sensor = 0.0;
  std::uint64_t radv_messages = 0;
  bool partial = false;
  std::optional<Virtualization> virtualization;
  std::vector<EstimatorRecord> estimators;
  std::string error;

  std::uint64_t total_messages() const {
    std::uint64_t t = radv_messages;
    for (const auto& e : estimators)
      if (e.algo != Algorithm::ls)
        t += e.messages;
    return t;
  }
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  unsigned parallel = 1;
  std::ostream* events = nullptr;
};

inline Swarm replication_swarm(const Scenario& sc, std::uint64_t rep_seed) {
  return generate_swarm(sc.sensors, sc.radius, sc.capacity_low, sc.capacity_high, derive_seed(rep_seed, 0, 1));
}

// Center keeps the task disk inside the unit square; draws do not depend on the topology.
inline VsnRequest replication_request(const Scenario& sc, std::uint64_t rep_seed, std::vector<SensorId>& entry) {
  Rng rng(derive_seed(rep_seed, 0, 2));
  const double lo = std::min(sc.task_radius, 0.5), hi = std::max(1.0 - sc.task_radius, 0.5);
  std::uniform_real_distribution<double> pos(lo, hi);
  const Point center{pos(rng), pos(rng)};
  std::uniform_real_distribution<double> dem(sc.demand_low, sc.demand_high);
  std::vector<double> demands(static_cast<std::size_t>(sc.v_count));
  for (auto& d : demands)
    d = sc.demand_low == sc.demand_high ? sc.demand_low : dem(rng);
  std::vector<SensorId> ids(static_cast<std::size_t>(sc.sensors));
  for (std::size_t i = 0; i < ids.size(); ++i)
    ids[i] = static_cast<SensorId>(i);
  entry.clear();
  for (int k = 0; k < sc.entry_sensors; ++k) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), ids.size() - 1);
    std::swap(ids[static_cast<std::size_t>(k)], ids[pick(rng)]);
    entry.push_back(ids[static_cast<std::size_t>(k)]);
  }
  std::sort(entry.begin(), entry.end());
  return VsnRequest::make(sc.topology, sc.v_count, center, sc.task_radius, std::move(demands), sc.hop_bound,
                          sc.alpha, sc.beta);
}

inline std::uint64_t replication_seed(const Scenario& sc, long long r) {
  return derive_seed(sc.seed, static_cast<std::uint64_t>(r), 0);
}

/// Estimators only; exposed so experiments can reuse them on a fixed topology.
inline std::vector<EstimatorRecord> run_estimators(const Scenario& sc, std::uint64_t rep_seed,
                                                   EventLog* log = nullptr) {
  std::vector<EstimatorRecord> out;
  if (sc.algorithms.empty())
    return out;
  const VirtualGraph g(sc.topology, sc.v_count);
  const EstimationTask task =
      generate_estimation_task(sc.n, sc.m, sc.v_count, std::sqrt(sc.sigma2), derive_seed(rep_seed, 0, 4));
  for (Algorithm a : sc.algorithms) {
    EstimatorRecord rec;
    rec.algo = a;
    switch (a) {
    case Algorithm::ls: {
      rec.mse = mse(centralized_ls(task), task.theta_true);
      rec.iterations = 1;
      // measurement transfer to a fusion point, in n-length vector units
      rec.messages = static_cast<std::uint64_t>(sc.v_count) * static_cast<std::uint64_t>((sc.m + sc.n - 1) / sc.n);
      rec.converged = true;
      break;
    }
    case Algorithm::admm: {
      const auto r = admm_run(g, task, sc.estimator, sc.max_iters);
      rec.mse = r.mean_mse(task.theta_true);
      rec.iterations = r.iterations;
      rec.messages = r.messages;
      rec.converged = r.converged;
      break;
    }
    case Algorithm::rade: {
      if (log)
        log->tag["phase"] = "rade";
      const auto r = rade_run(g, task, sc.estimator, derive_seed(rep_seed, 0, 5), sc.max_rade_slots, log);
      rec.mse = r.mean_mse(task.theta_true);
      rec.iterations = r.iterations;
      rec.messages = r.messages;
      rec.converged = r.converged;
      break;
    }
    }
    out.push_back(rec);
  }
  return out;
}

inline MetricRecord run_replication(const Scenario& sc, long long r, std::uint64_t base_seed, EventLog* log) {
  Scenario local = sc;
  local.seed = base_seed;
  MetricRecord rec;
  rec.scenario_id = sc.id;
  rec.seed = replication_seed(local, r);
  rec.sensors = sc.sensors;
  rec.v_count = sc.v_count;
  rec.topology = sc.topology;
  try {
    const Swarm swarm = replication_swarm(sc, rec.seed);
    std::vector<SensorId> entry;
    const VsnRequest req = replication_request(sc, rec.seed, entry);
    Rng rng(derive_seed(rec.seed, 0, 3));
    const RadvOutcome o = run_radv(swarm, req, entry, rng, sc.limits, log);
    rec.upper_bound = o.upper_bound;
    rec.search_slots = o.search.trace.slots_used;
    rec.prune_slots = o.prune.trace.slots_used;
    rec.benefit_slots = o.benefit.trace.slots_used;
    rec.radv_messages = o.search.trace.total_messages + o.prune.trace.total_messages + o.benefit.trace.total_messages;
    rec.msgs_per_sensor = static_cast<double>(rec.radv_messages) / static_cast<double>(swarm.size());
    rec.search_msgs_per_sensor = o.search.trace.mean_messages_per_sensor();
    rec.partial = o.partial();
    rec.accepted = o.selected.has_value();
    if (rec.accepted) {
      rec.benefit = o.selected->benefit;
      rec.virtualization = o.selected;
      rec.estimators = run_estimators(sc, rec.seed, log);
    }
  } catch (const std::exception& e) {
    rec.accepted = false;
    rec.error = e.what();
  }
  return rec;
}

/// One record per replication, in replication order regardless of `parallel`.
inline std::vector<MetricRecord> run_experiment(const Scenario& sc, const RunOptions& opt = {}) {
  validate(sc);
  const std::uint64_t base = opt.seed.value_or(sc.seed);
  const auto reps = static_cast<std::size_t>(sc.replications);
  std::vector<MetricRecord> out(reps);
  std::vector<std::string> logs(opt.events ? reps : 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < reps;) {
      std::ostringstream buf;
      EventLog log{&buf, {{"replication", r}}};
      out[r] = run_replication(sc, static_cast<long long>(r), base, opt.events ? &log : nullptr);
      if (opt.events)
        logs[r] = buf.str();
    }
  };
  const unsigned k = std::max(1u, std::min<unsigned>(opt.parallel, static_cast<unsigned>(reps)));
  if (k == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < k; ++t)
      pool.emplace_back(worker);
  }
  if (opt.events)
    for (const auto& l : logs)
      *opt.events << l;
  return out;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr const char* csv_header =
    "scenario_id,seed,P,V,topology,accepted,benefit,upper_bound,search_slots,prune_slots,benefit_slots,"
    "msgs_per_sensor,algo,iterations,messages,mse,converged";

inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string q = "\"";
  for (char c : s)
    q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

// One flat row per estimator run; a replication without estimator runs still yields one row.
inline std::vector<nlohmann::ordered_json> flat_rows(const MetricRecord& r) {
  nlohmann::ordered_json base;
  base["scenario_id"] = r.scenario_id;
  base["seed"] = r.seed;
  base["P"] = r.sensors;
  base["V"] = r.v_count;
  base["topology"] = std::string(to_string(r.topology));
  base["accepted"] = r.accepted;
  base["benefit"] = r.accepted ? nlohmann::ordered_json(r.benefit) : nlohmann::ordered_json(nullptr);
  base["upper_bound"] = r.upper_bound;
  base["search_slots"] = r.search_slots;
  base["prune_slots"] = r.prune_slots;
  base["benefit_slots"] = r.benefit_slots;
  base["msgs_per_sensor"] = r.msgs_per_sensor;
  std::vector<nlohmann::ordered_json> rows;
  for (const auto& e : r.estimators) {
    auto row = base;
    row["algo"] = std::string(to_string(e.algo));
    row["iterations"] = e.iterations;
    row["messages"] = e.messages;
    row["mse"] = e.mse;
    row["converged"] = e.converged;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    auto row = base;
    row["algo"] = r.error.empty() ? "none" : "error";
    row["iterations"] = 0;
    row["messages"] = 0;
    row["mse"] = nullptr;
    row["converged"] = nullptr;
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace detail

inline void write_csv(const std::vector<MetricRecord>& records, std::ostream& out) {
  out << csv_header << '\n';
  for (const auto& r : records)
    for (const auto& row : detail::flat_rows(r)) {
      bool first = true;
      for (const auto& [key, v] : row.items()) {
        if (!first)
          out << ',';
        first = false;
        if (v.is_null())
          continue;
        if (v.is_string())
          out << detail::csv_field(v.get<std::string>());
        else if (v.is_boolean())
          out << (v.get<bool>() ? "true" : "false");
        else if (v.is_number_float())
          out << format_real(v.get<double>());
        else
          out << v.dump();
      }
      out << '\n';
    }
}

inline void write_json(const std::vector<MetricRecord>& records, std::ostream& out) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : records)
    for (auto& row : detail::flat_rows(r))
      arr.push_back(std::move(row));
  out << arr.dump(2) << '\n';
}

inline void emit_results(const std::vector<MetricRecord>& records, const std::string& format,
                         const std::string& path) {
  if (format != "csv" && format != "json")
    throw std::invalid_argument("format must be csv or json");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw io_error("cannot write '" + path + "'");
  if (format == "csv")
    write_csv(records, out);
  else
    write_json(records, out);
  out.flush();
  if (!out)
    throw io_error("write to '" + path + "' failed");
}

} // namespace vsnet

#endif // VSNET_HARNESS_HPP
