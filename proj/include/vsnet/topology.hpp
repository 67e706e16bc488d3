#ifndef VSNET_TOPOLOGY_HPP
#define VSNET_TOPOLOGY_HPP

#include <algorithm>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vsnet {

// Virtual ids are 0-based; the star hub is virtual sensor 0.
enum class Topology { complete, cycle, star };

inline std::string_view to_string(Topology t) {
  switch (t) {
  case Topology::complete:
    return "complete";
  case Topology::cycle:
    return "cycle";
  case Topology::star:
    return "star";
  }
  return "?";
}

inline Topology parse_topology(std::string_view s) {
  if (s == "complete")
    return Topology::complete;
  if (s == "cycle")
    return Topology::cycle;
  if (s == "star")
    return Topology::star;
  throw std::invalid_argument("unknown topology '" + std::string(s) + "'");
}

using VirtualLink = std::pair<int, int>;

/// Undirected virtual links with first < second, sorted.
/// A 2-cycle collapses to its single link.
inline std::vector<VirtualLink> virtual_links(Topology t, int v) {
  if (v < 1)
    throw std::invalid_argument("virtual sensor count must be >= 1");
  std::vector<VirtualLink> out;
  switch (t) {
  case Topology::complete:
    for (int a = 0; a < v; ++a)
      for (int b = a + 1; b < v; ++b)
        out.emplace_back(a, b);
    break;
  case Topology::cycle:
    if (v == 2)
      out.emplace_back(0, 1);
    else if (v >= 3)
      for (int a = 0; a < v; ++a)
        out.emplace_back(std::min(a, (a + 1) % v), std::max(a, (a + 1) % v));
    break;
  case Topology::star:
    for (int b = 1; b < v; ++b)
      out.emplace_back(0, b);
    break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Adjacency view of a virtual topology; satisfies the gossip contact-graph interface.
class VirtualGraph {
public:
  VirtualGraph() = default;

  VirtualGraph(int v, const std::vector<VirtualLink>& links) : adj_(static_cast<std::size_t>(v)), links_(links) {
    for (auto [a, b] : links) {
      if (a == b || a < 0 || b < 0 || a >= v || b >= v)
        throw std::invalid_argument("bad virtual link");
      adj_[a].push_back(b);
      adj_[b].push_back(a);
    }
    for (auto& n : adj_) {
      std::sort(n.begin(), n.end());
      if (std::adjacent_find(n.begin(), n.end()) != n.end())
        throw std::invalid_argument("duplicate virtual link");
    }
  }

  VirtualGraph(Topology t, int v) : VirtualGraph(v, virtual_links(t, v)) {}

  std::size_t size() const noexcept { return adj_.size(); }
  const std::vector<int>& neighbors(int i) const { return adj_.at(static_cast<std::size_t>(i)); }
  std::size_t degree(int i) const { return neighbors(i).size(); }
  const std::vector<VirtualLink>& links() const noexcept { return links_; }

private:
  std::vector<std::vector<int>> adj_;
  std::vector<VirtualLink> links_;
};

} // namespace vsnet

#endif // VSNET_TOPOLOGY_HPP
