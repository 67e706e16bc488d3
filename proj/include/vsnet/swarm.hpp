#ifndef VSNET_SWARM_HPP
#define VSNET_SWARM_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace vsnet {

using SensorId = int;
using Point = std::array<double, 2>;

inline double distance_sq(const Point& a, const Point& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

struct Sensor {
  SensorId id = 0;
  Point position{0.0, 0.0};
  double capacity = 1.0;
};

/// Substrate random geometric graph. Immutable once built.
///
/// Two sensors are linked iff their Euclidean distance is at most the radius.
/// Neighbor lists are sorted by id.
class Swarm {
public:
  Swarm() = default;

  Swarm(std::vector<Sensor> sensors, double radius) : sensors_(std::move(sensors)), radius_(radius) {
    if (!(radius_ > 0.0))
      throw std::invalid_argument("swarm radius must be positive");
    for (std::size_t i = 0; i < sensors_.size(); ++i) {
      const auto& s = sensors_[i];
      if (s.id != static_cast<SensorId>(i))
        throw std::invalid_argument("sensor ids must be 0..P-1 in order");
      if (!(s.capacity > 0.0))
        throw std::invalid_argument("sensor capacity must be positive");
      if (s.position[0] < 0.0 || s.position[0] > 1.0 || s.position[1] < 0.0 || s.position[1] > 1.0)
        throw std::invalid_argument("sensor position outside the unit square");
    }
    build_adjacency();
  }

  std::size_t size() const noexcept { return sensors_.size(); }
  double radius() const noexcept { return radius_; }
  const std::vector<Sensor>& sensors() const noexcept { return sensors_; }
  const Sensor& sensor(SensorId i) const { return sensors_.at(check(i)); }
  const std::vector<SensorId>& neighbors(SensorId i) const { return adj_.at(check(i)); }
  std::size_t degree(SensorId i) const { return neighbors(i).size(); }

  bool adjacent(SensorId i, SensorId j) const {
    const auto& n = neighbors(i);
    return std::binary_search(n.begin(), n.end(), j);
  }

  std::size_t edge_count() const noexcept {
    std::size_t d = 0;
    for (const auto& n : adj_)
      d += n.size();
    return d / 2;
  }

  double max_capacity() const {
    double c = 0.0;
    for (const auto& s : sensors_)
      c = std::max(c, s.capacity);
    return c;
  }

  std::size_t check(SensorId i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= sensors_.size())
      throw std::invalid_argument("unknown sensor id " + std::to_string(i));
    return static_cast<std::size_t>(i);
  }

private:
  // Cell grid of side >= radius keeps construction near-linear.
  void build_adjacency() {
    const std::size_t p = sensors_.size();
    adj_.assign(p, {});
    const double r2 = radius_ * radius_;
    const int cells = std::max(1, std::min(1024, static_cast<int>(1.0 / radius_)));
    auto cell_of = [&](double x) { return std::min(cells - 1, static_cast<int>(x * cells)); };
    std::vector<std::vector<SensorId>> grid(static_cast<std::size_t>(cells) * cells);
    for (const auto& s : sensors_)
      grid[static_cast<std::size_t>(cell_of(s.position[0])) * cells + cell_of(s.position[1])].push_back(s.id);
    for (const auto& s : sensors_) {
      const int cx = cell_of(s.position[0]);
      const int cy = cell_of(s.position[1]);
      for (int gx = std::max(0, cx - 1); gx <= std::min(cells - 1, cx + 1); ++gx)
        for (int gy = std::max(0, cy - 1); gy <= std::min(cells - 1, cy + 1); ++gy)
          for (SensorId o : grid[static_cast<std::size_t>(gx) * cells + gy])
            if (o != s.id && distance_sq(s.position, sensors_[o].position) <= r2)
              adj_[s.id].push_back(o);
    }
    for (auto& n : adj_)
      std::sort(n.begin(), n.end());
  }

  std::vector<Sensor> sensors_;
  double radius_ = 0.1;
  std::vector<std::vector<SensorId>> adj_;
};

inline Swarm generate_swarm(long long count, double radius, double capacity_low, double capacity_high,
                            std::uint64_t seed) {
  if (count < 1)
    throw std::invalid_argument("sensor count must be >= 1");
  if (!(radius > 0.0))
    throw std::invalid_argument("radius must be positive");
  if (!(capacity_low > 0.0) || capacity_low > capacity_high)
    throw std::invalid_argument("capacity range must satisfy 0 < low <= high");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> cap(capacity_low, capacity_high);
  std::vector<Sensor> sensors(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    sensors[i].id = static_cast<SensorId>(i);
    sensors[i].position = {unit(rng), unit(rng)};
  }
  for (auto& s : sensors)
    s.capacity = capacity_low == capacity_high ? capacity_low : cap(rng);
  return Swarm(std::move(sensors), radius);
}

struct TransitionRow {
  SensorId owner = 0;
  std::vector<std::pair<SensorId, double>> entries; // sorted by id, self included
};

/// Contact distribution of a sensor: uniform over itself and its neighbors.
/// Works on any graph exposing size() and neighbors(i).
template <typename Graph>
TransitionRow transition_row(const Graph& g, SensorId i) {
  if (i < 0 || static_cast<std::size_t>(i) >= g.size())
    throw std::invalid_argument("unknown sensor id " + std::to_string(i));
  const auto& nb = g.neighbors(i);
  const double w = 1.0 / static_cast<double>(nb.size() + 1);
  TransitionRow row{i, {}};
  row.entries.reserve(nb.size() + 1);
  bool self_done = false;
  for (SensorId j : nb) {
    if (!self_done && i < j) {
      row.entries.emplace_back(i, w);
      self_done = true;
    }
    row.entries.emplace_back(j, w);
  }
  if (!self_done)
    row.entries.emplace_back(i, w);
  return row;
}

inline constexpr int unreachable = -1;

/// BFS hop distances from src; unreachable sensors get -1.
template <typename Graph>
std::vector<int> hop_distances(const Graph& g, SensorId src) {
  std::vector<int> dist(g.size(), unreachable);
  std::deque<SensorId> q{src};
  dist.at(static_cast<std::size_t>(src)) = 0;
  while (!q.empty()) {
    const SensorId u = q.front();
    q.pop_front();
    for (SensorId v : g.neighbors(u))
      if (dist[v] == unreachable) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  return dist;
}

inline std::optional<int> shortest_hops(const Swarm& s, SensorId i, SensorId j) {
  s.check(i);
  s.check(j);
  if (i == j)
    return 0;
  const int d = hop_distances(s, i)[static_cast<std::size_t>(j)];
  if (d == unreachable)
    return std::nullopt;
  return d;
}

inline nlohmann::json to_json(const Swarm& s) {
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& x : s.sensors())
    sensors.push_back({{"id", x.id}, {"x", x.position[0]}, {"y", x.position[1]}, {"capacity", x.capacity}});
  return {{"radius", s.radius()}, {"sensors", std::move(sensors)}};
}

// Throws std::invalid_argument on malformed documents.
inline Swarm swarm_from_json(const nlohmann::json& j) {
  try {
    std::vector<Sensor> sensors;
    for (const auto& x : j.at("sensors"))
      sensors.push_back(Sensor{x.at("id").get<SensorId>(), {x.at("x").get<double>(), x.at("y").get<double>()},
                               x.at("capacity").get<double>()});
    std::sort(sensors.begin(), sensors.end(), [](const Sensor& a, const Sensor& b) { return a.id < b.id; });
    return Swarm(std::move(sensors), j.at("radius").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad swarm document: ") + e.what());
  }
}

} // namespace vsnet

#endif // VSNET_SWARM_HPP
