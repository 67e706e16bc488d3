#ifndef VSNET_GOSSIP_HPP
#define VSNET_GOSSIP_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <ostream>
#include <random>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarm.hpp"

namespace vsnet {

template <typename G>
concept ContactGraph = requires(const G& g, SensorId i) {
  { g.size() } -> std::convertible_to<std::size_t>;
  { g.neighbors(i) } -> std::convertible_to<const std::vector<SensorId>&>;
};

using Rng = std::mt19937_64;

struct Contact {
  SensorId initiator;
  SensorId target;
  friend bool operator==(const Contact&, const Contact&) = default;
};

// Payload size unit of a message: a V-length vector (protocol records) or an n-length vector (estimates).
enum class SizeClass { v_vector, n_vector };

struct GossipTrace {
  std::size_t slots_used = 0;
  std::vector<std::uint64_t> messages_per_sensor;
  std::uint64_t total_messages = 0;
  bool timed_out = false;

  double mean_messages_per_sensor() const {
    return messages_per_sensor.empty() ? 0.0
                                       : static_cast<double>(total_messages) / messages_per_sensor.size();
  }
};

/// Optional JSON-lines event sink. Each line carries the static tag fields plus
/// slot, initiator, target and the message kinds of one contact.
struct EventLog {
  std::ostream* out = nullptr;
  nlohmann::json tag = nlohmann::json::object();
};

/// Collects the messages of one contact. Every send() is charged to its sender.
class MessageSink {
public:
  MessageSink(GossipTrace& trace, EventLog* log) : trace_(trace), log_(log) {}

  void send(SensorId sender, SensorId receiver, std::string_view kind, SizeClass = SizeClass::v_vector) {
    ++trace_.messages_per_sensor.at(static_cast<std::size_t>(sender));
    ++trace_.total_messages;
    if (log_ && log_->out)
      kinds_.push_back({{"from", sender}, {"to", receiver}, {"kind", kind}});
  }

  void begin(std::size_t slot, const Contact& c) {
    slot_ = slot;
    contact_ = c;
    kinds_.clear();
  }

  void end() {
    if (!log_ || !log_->out)
      return;
    nlohmann::json line = log_->tag;
    line["slot"] = slot_;
    line["initiator"] = contact_.initiator;
    line["target"] = contact_.target;
    line["messages"] = kinds_;
    *log_->out << line.dump() << '\n';
  }

private:
  GossipTrace& trace_;
  EventLog* log_;
  std::size_t slot_ = 0;
  Contact contact_{0, 0};
  std::vector<nlohmann::json> kinds_;
};

template <typename P>
concept GossipProtocol = requires(P& p, const P& cp, SensorId i, MessageSink& sink) {
  { cp.is_active(i) } -> std::convertible_to<bool>;
  p.on_contact(i, i, sink);
};

/// One slot of contacts: every active sensor draws one entry of its transition row.
/// Drawing itself means no contact. active must be sorted ascending; output follows it.
template <ContactGraph G>
std::vector<Contact> schedule_slot(const G& g, const std::vector<SensorId>& active, Rng& rng) {
  std::vector<Contact> out;
  out.reserve(active.size());
  for (SensorId i : active) {
    const auto& nb = g.neighbors(i);
    if (nb.empty())
      continue;
    std::uniform_int_distribution<std::size_t> pick(0, nb.size());
    const std::size_t k = pick(rng);
    const auto self_pos = static_cast<std::size_t>(std::lower_bound(nb.begin(), nb.end(), i) - nb.begin());
    if (k == self_pos)
      continue;
    out.push_back({i, nb[k < self_pos ? k : k - 1]});
  }
  return out;
}

inline std::size_t default_max_slots(std::size_t p) {
  const double n = static_cast<double>(std::max<std::size_t>(p, 2));
  return static_cast<std::size_t>(std::ceil(10.0 * n * std::log2(n)));
}

/// Runs a protocol until no sensor is active or max_slots slots have elapsed.
/// Isolated sensors never initiate. Contacts in a slot are processed in initiator order.
template <ContactGraph G, GossipProtocol P>
GossipTrace run_protocol(const G& g, P& protocol, std::size_t max_slots, Rng& rng, EventLog* log = nullptr) {
  GossipTrace trace;
  trace.messages_per_sensor.assign(g.size(), 0);
  MessageSink sink(trace, log);
  std::vector<SensorId> active;
  auto collect = [&] {
    active.clear();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto id = static_cast<SensorId>(i);
      if (!g.neighbors(id).empty() && protocol.is_active(id))
        active.push_back(id);
    }
  };
  for (std::size_t slot = 1; slot <= max_slots; ++slot) {
    collect();
    if (active.empty())
      return trace;
    if constexpr (requires { protocol.begin_slot(slot); })
      protocol.begin_slot(slot);
    for (const Contact& c : schedule_slot(g, active, rng)) {
      sink.begin(slot, c);
      protocol.on_contact(c.initiator, c.target, sink);
      sink.end();
    }
    trace.slots_used = slot;
  }
  collect();
  trace.timed_out = !active.empty();
  return trace;
}

/// Anti-entropy bookkeeping. A participating sensor stays active until it has synced with
/// every participating neighbor since its own state last changed. A contact syncs both ends.
class SyncTracker {
public:
  template <ContactGraph G>
  SyncTracker(const G& g, const std::vector<char>& participants)
      : participants_(participants), neighbors_(g.size()), pending_(g.size()), open_(g.size(), 0) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      neighbors_[i] = g.neighbors(static_cast<SensorId>(i));
      pending_[i].assign(neighbors_[i].size(), 0);
    }
  }

  bool active(SensorId i) const { return open_[static_cast<std::size_t>(i)] > 0; }

  void wake(SensorId i) {
    const auto k = static_cast<std::size_t>(i);
    if (!participants_[k])
      return;
    open_[k] = 0;
    for (std::size_t a = 0; a < neighbors_[k].size(); ++a) {
      pending_[k][a] = participants_[static_cast<std::size_t>(neighbors_[k][a])];
      open_[k] += pending_[k][a];
    }
  }

  void synced(SensorId i, SensorId j) {
    clear(i, j);
    clear(j, i);
  }

private:
  void clear(SensorId i, SensorId j) {
    const auto k = static_cast<std::size_t>(i);
    const auto& nb = neighbors_[k];
    const auto it = std::lower_bound(nb.begin(), nb.end(), j);
    if (it == nb.end() || *it != j)
      return;
    char& p = pending_[k][static_cast<std::size_t>(it - nb.begin())];
    open_[k] -= p;
    p = 0;
  }

  std::vector<char> participants_;
  std::vector<std::vector<SensorId>> neighbors_;
  std::vector<std::vector<char>> pending_;
  std::vector<std::size_t> open_;
};

} // namespace vsnet

#endif // VSNET_GOSSIP_HPP
