#ifndef VSNET_RADV_HPP
#define VSNET_RADV_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "gossip.hpp"
#include "matching.hpp"
#include "swarm.hpp"
#include "topology.hpp"

namespace vsnet {

// Bit j set <=> virtual sensor j belongs to the set.
using DomainMask = std::uint64_t;

inline constexpr int max_virtual_sensors = 64;

inline bool has(DomainMask m, int j) { return (m >> j) & 1u; }
inline int count(DomainMask m) { return std::popcount(m); }

struct VsnRequest {
  int v_count = 1;
  Topology topology = Topology::complete;
  std::vector<VirtualLink> links;
  Point center{0.5, 0.5};
  double task_radius = 0.2;
  std::vector<double> demands;
  int hop_bound = 20;
  double alpha = 1.0;
  double beta = 1.0;

  static VsnRequest make(Topology t, int v, Point center, double task_radius, std::vector<double> demands,
                         int hop_bound, double alpha, double beta) {
    VsnRequest r;
    r.v_count = v;
    r.topology = t;
    r.links = virtual_links(t, v);
    r.center = center;
    r.task_radius = task_radius;
    r.demands = std::move(demands);
    r.hop_bound = hop_bound;
    r.alpha = alpha;
    r.beta = beta;
    r.validate();
    return r;
  }

  void validate() const {
    if (v_count < 1 || v_count > max_virtual_sensors)
      throw std::invalid_argument("V must be in [1, 64]");
    if (static_cast<int>(demands.size()) != v_count)
      throw std::invalid_argument("one demand per virtual sensor required");
    for (double d : demands)
      if (!(d > 0.0))
        throw std::invalid_argument("demands must be positive");
    if (!(task_radius >= 0.0))
      throw std::invalid_argument("task radius must be >= 0");
    if (hop_bound < 1)
      throw std::invalid_argument("hop bound must be >= 1");
    if (!(alpha >= 0.0) || !(beta >= 0.0))
      throw std::invalid_argument("incentives must be >= 0");
    if (links != virtual_links(topology, v_count))
      throw std::invalid_argument("virtual links do not match the topology");
  }

  // Virtual neighbors of each virtual sensor.
  std::vector<DomainMask> neighbor_masks() const {
    std::vector<DomainMask> m(static_cast<std::size_t>(v_count), 0);
    for (auto [a, b] : links) {
      m[a] |= DomainMask{1} << b;
      m[b] |= DomainMask{1} << a;
    }
    return m;
  }

  DomainMask all() const { return v_count == 64 ? ~DomainMask{0} : (DomainMask{1} << v_count) - 1; }
};

struct VirtualDomain {
  SensorId owner = 0;
  DomainMask members = 0;

  bool empty() const { return members == 0; }
  bool contains(int j) const { return has(members, j); }
};

inline VirtualDomain compute_domain(const Sensor& s, const VsnRequest& req) {
  VirtualDomain d{s.id, 0};
  if (std::sqrt(distance_sq(s.position, req.center)) > req.task_radius)
    return d;
  for (int j = 0; j < req.v_count; ++j)
    if (s.capacity >= req.demands[j])
      d.members |= DomainMask{1} << j;
  return d;
}

// ---------------------------------------------------------------------------
// Search

struct SearchResult {
  std::vector<char> informed;
  std::vector<DomainMask> domains; // zero for uninformed sensors
  std::vector<SensorId> eligible;  // informed sensors with a nonempty domain
  GossipTrace trace;
};

/// Push/pull epidemic of the request. An informed initiator that meets another informed
/// sensor stops. Uninformed sensors poll only while some neighbor holds the request.
class SearchProtocol {
public:
  SearchProtocol(const Swarm& s, const VsnRequest& req, const std::vector<SensorId>& seeds)
      : swarm_(s), req_(req), informed_(s.size(), 0), stopped_(s.size(), 0), informed_nb_(s.size(), 0),
        domains_(s.size(), 0) {
    for (SensorId i : seeds)
      inform(static_cast<SensorId>(s.check(i)));
  }

  bool is_active(SensorId i) const { return informed_[i] ? !stopped_[i] : informed_nb_[i] > 0; }

  void on_contact(SensorId i, SensorId j, MessageSink& sink) {
    if (informed_[i] && !informed_[j]) {
      sink.send(i, j, "request");
      inform(j);
    } else if (!informed_[i] && informed_[j]) {
      sink.send(j, i, "request");
      inform(i);
    } else if (informed_[i] && informed_[j]) {
      stopped_[i] = 1;
    }
  }

  const std::vector<char>& informed() const { return informed_; }
  const std::vector<DomainMask>& domains() const { return domains_; }

private:
  void inform(SensorId i) {
    if (informed_[i])
      return;
    informed_[i] = 1;
    domains_[i] = compute_domain(swarm_.sensor(i), req_).members;
    for (SensorId j : swarm_.neighbors(i))
      ++informed_nb_[j];
  }

  const Swarm& swarm_;
  const VsnRequest& req_;
  std::vector<char> informed_, stopped_;
  std::vector<int> informed_nb_;
  std::vector<DomainMask> domains_;
};

inline SearchResult run_search(const Swarm& s, const VsnRequest& req, const std::vector<SensorId>& seeds,
                               std::size_t max_slots, Rng& rng, EventLog* log = nullptr) {
  if (seeds.empty())
    throw std::invalid_argument("search needs at least one seed sensor");
  req.validate();
  SearchProtocol proto(s, req, seeds);
  SearchResult r;
  r.trace = run_protocol(s, proto, max_slots, rng, log);
  r.informed = proto.informed();
  r.domains = proto.domains();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (r.domains[i] != 0)
      r.eligible.push_back(static_cast<SensorId>(i));
  return r;
}

// ---------------------------------------------------------------------------
// Domain pruning

/// Keep j only if every virtual neighbor of j is offered by some received domain.
inline DomainMask prune_against(DomainMask own, DomainMask offered, const std::vector<DomainMask>& vnb) {
  DomainMask out = own;
  for (std::size_t j = 0; j < vnb.size(); ++j)
    if (has(own, static_cast<int>(j)) && (vnb[j] & ~offered) != 0)
      out &= ~(DomainMask{1} << j);
  return out;
}

struct DomainRecord {
  SensorId origin = 0;
  DomainMask members = 0;
  std::uint32_t version = 0;
  int hop = 0;
};

struct PruneResult {
  std::vector<DomainMask> domains;
  GossipTrace trace;
  std::size_t rounds = 0;
};

/// Domain exchange among informed sensors. Records travel at most H hops from their origin; a
/// newer version or a shorter route replaces a held record. Pruning is applied at quiescence and
/// the exchange restarts from the sensors whose domain shrank.
class PruneProtocol {
public:
  PruneProtocol(const Swarm& s, const VsnRequest& req, const SearchResult& search)
      : req_(req), vnb_(req.neighbor_masks()), participates_(search.informed), quiet_(s, search.informed),
        records_(s.size()), domains_(search.domains) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!participates_[i])
        continue;
      quiet_.wake(static_cast<SensorId>(i));
      if (domains_[i] != 0)
        records_[i].push_back({static_cast<SensorId>(i), domains_[i], 0, 0});
    }
  }

  bool is_active(SensorId i) const { return participates_[i] && quiet_.active(i); }

  void on_contact(SensorId n, SensorId m, MessageSink& sink) {
    if (!participates_[m])
      return;
    const auto from_n = offers(n, m);
    const auto from_m = offers(m, n);
    for (const auto& r : from_n) {
      sink.send(n, m, "domain");
      store(m, r);
    }
    for (const auto& r : from_m) {
      sink.send(m, n, "domain");
      store(n, r);
    }
    if (!from_n.empty())
      quiet_.wake(m);
    if (!from_m.empty())
      quiet_.wake(n);
    quiet_.synced(n, m);
  }

  // Prune every domain-holding sensor against what it received. Returns true if any shrank.
  bool prune_all() {
    bool changed = false;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (domains_[i] == 0)
        continue;
      DomainMask offered = 0;
      for (const auto& r : records_[i])
        if (r.origin != static_cast<SensorId>(i))
          offered |= r.members;
      const DomainMask next = prune_against(domains_[i], offered, vnb_);
      if (next == domains_[i])
        continue;
      domains_[i] = next;
      auto& own = find(static_cast<SensorId>(i), static_cast<SensorId>(i));
      own.members = next;
      ++own.version;
      quiet_.wake(static_cast<SensorId>(i));
      changed = true;
    }
    return changed;
  }

  const std::vector<DomainMask>& domains() const { return domains_; }
  const std::vector<DomainRecord>& records(SensorId i) const { return records_[i]; }

private:
  DomainRecord* lookup(SensorId holder, SensorId origin) {
    auto& v = records_[holder];
    auto it = std::lower_bound(v.begin(), v.end(), origin,
                               [](const DomainRecord& r, SensorId o) { return r.origin < o; });
    return it != v.end() && it->origin == origin ? &*it : nullptr;
  }

  DomainRecord& find(SensorId holder, SensorId origin) {
    auto* r = lookup(holder, origin);
    if (!r)
      throw std::logic_error("missing own domain record");
    return *r;
  }

  // Records `from` would hand to `to`, already stamped with the receiver's hop count.
  std::vector<DomainRecord> offers(SensorId from, SensorId to) {
    std::vector<DomainRecord> out;
    const auto& src = records_[from];
    const auto& dst = records_[to];
    auto it = dst.begin();
    for (const auto& r : src) {
      if (r.origin == to || r.hop >= req_.hop_bound)
        continue;
      while (it != dst.end() && it->origin < r.origin)
        ++it;
      const bool held = it != dst.end() && it->origin == r.origin;
      if (!held || it->version < r.version || (it->version == r.version && it->hop > r.hop + 1)) {
        DomainRecord fwd = r;
        fwd.hop = r.hop + 1;
        out.push_back(fwd);
      }
    }
    return out;
  }

  void store(SensorId holder, const DomainRecord& r) {
    if (auto* cur = lookup(holder, r.origin)) {
      *cur = r;
      return;
    }
    auto& v = records_[holder];
    auto it = std::lower_bound(v.begin(), v.end(), r.origin,
                               [](const DomainRecord& x, SensorId o) { return x.origin < o; });
    v.insert(it, r);
  }

  const VsnRequest& req_;
  std::vector<DomainMask> vnb_;
  std::vector<char> participates_;
  SyncTracker quiet_;
  std::vector<std::vector<DomainRecord>> records_;
  std::vector<DomainMask> domains_;
};

inline void accumulate(GossipTrace& into, const GossipTrace& part) {
  if (into.messages_per_sensor.empty())
    into.messages_per_sensor.assign(part.messages_per_sensor.size(), 0);
  for (std::size_t i = 0; i < part.messages_per_sensor.size(); ++i)
    into.messages_per_sensor[i] += part.messages_per_sensor[i];
  into.total_messages += part.total_messages;
  into.slots_used += part.slots_used;
  into.timed_out = into.timed_out || part.timed_out;
}

inline PruneResult prune_domains(const Swarm& s, const VsnRequest& req, const SearchResult& search,
                                 std::size_t max_slots, Rng& rng, EventLog* log = nullptr) {
  PruneProtocol proto(s, req, search);
  PruneResult r;
  r.trace.messages_per_sensor.assign(s.size(), 0);
  for (;;) {
    const std::size_t left = max_slots - std::min(max_slots, r.trace.slots_used);
    if (left == 0) {
      r.trace.timed_out = true;
      break;
    }
    accumulate(r.trace, run_protocol(s, proto, left, rng, log));
    ++r.rounds;
    if (r.trace.timed_out || !proto.prune_all())
      break;
  }
  r.domains = proto.domains();
  return r;
}

// ---------------------------------------------------------------------------
// Benefit rows

struct BenefitRow {
  SensorId candidate = 0;
  DomainMask domain = 0;
  std::vector<double> values;
  int hop = 0;

  double total() const {
    double t = 0.0;
    for (double x : values)
      t += x;
    return t;
  }
};

struct BenefitState {
  SensorId owner = 0;
  std::vector<BenefitRow> rows; // sorted by candidate id
  double min_total = 0.0;
  std::optional<SensorId> min_candidate;

  const BenefitRow* find(SensorId c) const {
    for (const auto& r : rows)
      if (r.candidate == c)
        return &r;
    return nullptr;
  }
};

inline std::vector<double> initial_benefit_row(double capacity, DomainMask domain, const VsnRequest& req) {
  std::vector<double> row(static_cast<std::size_t>(req.v_count), 0.0);
  for (int j = 0; j < req.v_count; ++j)
    if (has(domain, j))
      row[j] = req.alpha * (capacity - req.demands[j]) / capacity + req.beta;
  return row;
}

// Receive-side decay: one hop costs beta/H on every domain entry, floored at zero.
inline std::vector<double> decayed(const BenefitRow& r, const VsnRequest& req) {
  const double step = req.beta / req.hop_bound;
  std::vector<double> v = r.values;
  for (int j = 0; j < req.v_count; ++j)
    v[j] = has(r.domain, j) ? std::max(0.0, v[j] - step) : 0.0;
  return v;
}

struct BenefitResult {
  std::vector<BenefitState> states;
  GossipTrace trace;
};

/// Distributed construction of the per-sensor benefit matrices. A row travels only while its
/// hop count is below H and only when the decayed copy would change the receiver.
class BenefitProtocol {
public:
  BenefitProtocol(const Swarm& s, const VsnRequest& req, const std::vector<char>& participants,
                  const std::vector<DomainMask>& domains)
      : req_(req), participates_(participants), quiet_(s, participants), states_(s.size()) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      states_[i].owner = static_cast<SensorId>(i);
      if (!participates_[i])
        continue;
      quiet_.wake(static_cast<SensorId>(i));
      if (domains[i] != 0) {
        BenefitRow r{static_cast<SensorId>(i), domains[i],
                     initial_benefit_row(s.sensor(static_cast<SensorId>(i)).capacity, domains[i], req), 0};
        states_[i].rows.push_back(std::move(r));
        refresh_min(states_[i]);
      }
    }
  }

  bool is_active(SensorId i) const { return participates_[i] && quiet_.active(i); }

  void on_contact(SensorId n, SensorId m, MessageSink& sink) {
    if (!participates_[m])
      return;
    const std::vector<BenefitRow> snap_n = states_[n].rows;
    const std::vector<BenefitRow> snap_m = states_[m].rows;
    const bool got_m = transfer(snap_n, n, m, sink);
    const bool got_n = transfer(snap_m, m, n, sink);
    if (got_m)
      quiet_.wake(m);
    if (got_n)
      quiet_.wake(n);
    quiet_.synced(n, m);
  }

  const std::vector<BenefitState>& states() const { return states_; }

private:
  bool transfer(const std::vector<BenefitRow>& src, SensorId from, SensorId to, MessageSink& sink) {
    bool any = false;
    for (const auto& r : src) {
      if (r.candidate == to || r.hop >= req_.hop_bound)
        continue;
      BenefitRow next{r.candidate, r.domain, decayed(r, req_), r.hop + 1};
      if (!accepts(states_[to], next))
        continue;
      sink.send(from, to, "benefit_row");
      apply(states_[to], std::move(next));
      any = true;
    }
    return any;
  }

  bool accepts(const BenefitState& st, const BenefitRow& r) const {
    const double t = r.total();
    if (const auto* held = st.find(r.candidate))
      return t > held->total();
    if (static_cast<int>(st.rows.size()) < req_.v_count)
      return t > 0.0;
    return t > st.min_total;
  }

  void apply(BenefitState& st, BenefitRow r) {
    for (auto& h : st.rows)
      if (h.candidate == r.candidate) {
        h = std::move(r);
        refresh_min(st);
        return;
      }
    if (static_cast<int>(st.rows.size()) >= req_.v_count)
      st.rows.erase(std::find_if(st.rows.begin(), st.rows.end(),
                                 [&](const BenefitRow& x) { return x.candidate == *st.min_candidate; }));
    auto it = std::lower_bound(st.rows.begin(), st.rows.end(), r.candidate,
                               [](const BenefitRow& x, SensorId c) { return x.candidate < c; });
    st.rows.insert(it, std::move(r));
    refresh_min(st);
  }

  // Minimum only counts once the candidate set is full; ties go to the lowest id.
  void refresh_min(BenefitState& st) const {
    st.min_total = 0.0;
    st.min_candidate.reset();
    if (static_cast<int>(st.rows.size()) < req_.v_count)
      return;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : st.rows) {
      const double t = r.total();
      if (t < best) {
        best = t;
        st.min_candidate = r.candidate;
      }
    }
    st.min_total = best;
  }

  const VsnRequest& req_;
  std::vector<char> participates_;
  SyncTracker quiet_;
  std::vector<BenefitState> states_;
};

inline BenefitResult build_benefit_matrices(const Swarm& s, const VsnRequest& req,
                                            const std::vector<char>& participants,
                                            const std::vector<DomainMask>& domains, std::size_t max_slots,
                                            Rng& rng, EventLog* log = nullptr) {
  BenefitProtocol proto(s, req, participants, domains);
  BenefitResult r;
  r.trace = run_protocol(s, proto, max_slots, rng, log);
  r.states = proto.states();
  return r;
}

// ---------------------------------------------------------------------------
// Assignment and evaluation

struct Virtualization {
  std::vector<SensorId> assigned; // assigned[j] = sensor realizing virtual sensor j
  SensorId solver = 0;
  double benefit = 0.0;
  bool feasible = false;

  std::vector<SensorId> selected() const {
    std::vector<SensorId> s = assigned;
    std::sort(s.begin(), s.end());
    return s;
  }
};

/// Maximum-benefit assignment of the held candidates onto virtual sensors, domain-restricted.
inline std::optional<Virtualization> solve_local_assignment(const BenefitState& st, const VsnRequest& req) {
  if (static_cast<int>(st.rows.size()) != req.v_count)
    throw invalid_state("local assignment needs exactly V candidates");
  const std::size_t v = st.rows.size();
  WeightMatrix w(v);
  for (std::size_t r = 0; r < v; ++r)
    for (std::size_t c = 0; c < v; ++c) {
      const bool ok = has(st.rows[r].domain, static_cast<int>(c));
      w.set_allowed(r, c, ok);
      w.w(r, c) = ok ? st.rows[r].values[c] : 0.0;
    }
  const auto a = hungarian_max_weight(w);
  if (!a)
    return std::nullopt;
  Virtualization out;
  out.assigned.assign(v, 0);
  for (std::size_t r = 0; r < v; ++r)
    out.assigned[a->perm[r]] = st.rows[r].candidate;
  out.solver = st.owner;
  out.benefit = a->objective;
  return out;
}

/// Spare-capacity term per mapped sensor plus a path term per virtual link from substrate hops.
/// Sets feasible; links between disconnected sensors contribute nothing.
inline double total_benefit(Virtualization& v, const Swarm& s, const VsnRequest& req) {
  if (static_cast<int>(v.assigned.size()) != req.v_count)
    throw std::invalid_argument("mapping must cover every virtual sensor");
  auto sel = v.selected();
  if (std::adjacent_find(sel.begin(), sel.end()) != sel.end())
    throw std::invalid_argument("mapping must be one-to-one");
  double total = 0.0;
  for (int j = 0; j < req.v_count; ++j) {
    const double c = s.sensor(v.assigned[j]).capacity;
    total += req.alpha * (c - req.demands[j]) / c;
  }
  bool feasible = true;
  std::map<SensorId, std::vector<int>> bfs;
  for (auto [a, b] : req.links) {
    const SensorId sa = v.assigned[a], sb = v.assigned[b];
    auto it = bfs.find(sa);
    if (it == bfs.end())
      it = bfs.emplace(sa, hop_distances(s, sa)).first;
    const int h = it->second[static_cast<std::size_t>(sb)];
    if (h == unreachable) {
      feasible = false;
      continue;
    }
    if (h > req.hop_bound)
      feasible = false;
    total += req.beta * (req.hop_bound - h) / req.hop_bound;
  }
  v.benefit = total;
  v.feasible = feasible;
  return total;
}

inline double benefit_upper_bound(const VsnRequest& req, const Swarm& s) {
  if (s.size() == 0)
    throw std::invalid_argument("empty swarm");
  const double cmax = s.max_capacity();
  double b = 0.0;
  for (double d : req.demands)
    b += req.alpha * std::max(0.0, cmax - d) / cmax;
  b += static_cast<double>(req.links.size()) * req.beta * (req.hop_bound - 1) / req.hop_bound;
  return b;
}

/// Best feasible solution; ties go to the lowest solver id. nullopt means the request is rejected.
inline std::optional<Virtualization> select_virtualization(const std::vector<Virtualization>& sols) {
  const Virtualization* best = nullptr;
  for (const auto& v : sols) {
    if (!v.feasible)
      continue;
    if (!best || v.benefit > best->benefit || (v.benefit == best->benefit && v.solver < best->solver))
      best = &v;
  }
  if (!best)
    return std::nullopt;
  return *best;
}

inline nlohmann::json to_json(const Virtualization& v) {
  nlohmann::json mapping = nlohmann::json::array();
  for (std::size_t j = 0; j < v.assigned.size(); ++j)
    mapping.push_back({{"sensor", v.assigned[j]}, {"virtual", j}});
  return {{"selected", v.selected()},
          {"mapping", mapping},
          {"benefit", v.benefit},
          {"feasible", v.feasible},
          {"solver", v.solver}};
}

inline Virtualization virtualization_from_json(const nlohmann::json& j) {
  try {
    Virtualization v;
    const auto& mapping = j.at("mapping");
    v.assigned.assign(mapping.size(), -1);
    for (const auto& e : mapping) {
      const auto k = e.at("virtual").get<std::size_t>();
      if (k >= v.assigned.size() || v.assigned[k] != -1)
        throw std::invalid_argument("bad virtual id in mapping");
      v.assigned[k] = e.at("sensor").get<SensorId>();
    }
    v.benefit = j.at("benefit").get<double>();
    v.feasible = j.at("feasible").get<bool>();
    v.solver = j.at("solver").get<SensorId>();
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad virtualization document: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Whole pipeline

struct RadvLimits {
  std::size_t search_slots = 0; // 0 = default for the swarm size
  std::size_t prune_slots = 0;
  std::size_t benefit_slots = 0;
};

struct RadvOutcome {
  SearchResult search;
  PruneResult prune;
  BenefitResult benefit;
  std::vector<Virtualization> solutions;
  std::optional<Virtualization> selected;
  double upper_bound = 0.0;

  bool partial() const { return search.trace.timed_out || prune.trace.timed_out || benefit.trace.timed_out; }
};

inline RadvOutcome run_radv(const Swarm& s, const VsnRequest& req, const std::vector<SensorId>& seeds, Rng& rng,
                            RadvLimits lim = {}, EventLog* log = nullptr) {
  const std::size_t def = default_max_slots(s.size());
  auto pick = [&](std::size_t x) { return x ? x : def; };
  auto phase_log = [&](const char* name) -> EventLog* {
    if (!log)
      return nullptr;
    log->tag["phase"] = name;
    return log;
  };
  RadvOutcome out;
  out.search = run_search(s, req, seeds, pick(lim.search_slots), rng, phase_log("search"));
  out.prune = prune_domains(s, req, out.search, pick(lim.prune_slots), rng, phase_log("prune"));
  out.benefit = build_benefit_matrices(s, req, out.search.informed, out.prune.domains, pick(lim.benefit_slots), rng,
                                       phase_log("benefit"));
  for (const auto& st : out.benefit.states) {
    if (static_cast<int>(st.rows.size()) != req.v_count)
      continue;
    if (auto v = solve_local_assignment(st, req)) {
      total_benefit(*v, s, req);
      out.solutions.push_back(std::move(*v));
    }
  }
  out.selected = select_virtualization(out.solutions);
  out.upper_bound = benefit_upper_bound(req, s);
  return out;
}

} // namespace vsnet

#endif // VSNET_RADV_HPP
