#include "pavesage/graph.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "pavesage/error.hpp"
#include "pavesage/rng.hpp"

namespace pavesage {

std::size_t ReferenceMarkerHash::operator()(const ReferenceMarker& m) const noexcept {
  const std::size_t a = std::hash<std::string>{}(m.route_id);
  const std::size_t b = std::hash<std::string>{}(m.value);
  return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
}

RoadGraph RoadGraph::from_edges(std::size_t n_nodes,
                                std::span<const std::pair<NodeId, NodeId>> edges) {
  std::vector<std::vector<NodeId>> adj(n_nodes);
  for (auto [u, v] : edges) {
    if (u >= n_nodes || v >= n_nodes) {
      throw IndexError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                       ") references a node outside 0.." + std::to_string(n_nodes));
    }
    if (u == v) continue;
    adj[u].push_back(v);
    adj[v].push_back(u);
  }

  RoadGraph g;
  g.offsets_.assign(n_nodes + 1, 0);
  for (std::size_t v = 0; v < n_nodes; ++v) {
    auto& list = adj[v];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    g.offsets_[v + 1] = g.offsets_[v] + list.size();
  }
  g.neighbor_ids_.reserve(g.offsets_[n_nodes]);
  for (const auto& list : adj) g.neighbor_ids_.insert(g.neighbor_ids_.end(), list.begin(), list.end());
  return g;
}

std::span<const NodeId> RoadGraph::neighbors(NodeId v) const {
  if (v >= n_nodes()) {
    throw IndexError("node " + std::to_string(v) + " out of range for graph with " +
                     std::to_string(n_nodes()) + " nodes");
  }
  return std::span<const NodeId>(neighbor_ids_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
}

std::vector<std::pair<NodeId, NodeId>> RoadGraph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(n_edges());
  for (NodeId u = 0; u < n_nodes(); ++u)
    for (NodeId v : neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

RoadGraph build_graph(std::span<const SectionEndpoints> sections) {
  if (sections.empty()) throw ConfigError("build_graph: section list is empty");

  std::unordered_set<std::string> seen;
  seen.reserve(sections.size());
  for (const auto& s : sections) {
    if (!seen.insert(s.section_id).second) {
      throw DataError("build_graph: duplicate section id '" + s.section_id + "'");
    }
  }

  std::unordered_map<ReferenceMarker, std::vector<NodeId>, ReferenceMarkerHash> by_begin;
  by_begin.reserve(sections.size());
  for (std::size_t i = 0; i < sections.size(); ++i)
    by_begin[sections[i].begin].push_back(static_cast<NodeId>(i));

  // Every match u.end == v.begin yields {u, v}; the reverse orientation is
  // covered when the loop reaches v. from_edges collapses duplicates.
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t u = 0; u < sections.size(); ++u) {
    auto it = by_begin.find(sections[u].end);
    if (it == by_begin.end()) continue;
    for (NodeId v : it->second) edges.emplace_back(static_cast<NodeId>(u), v);
  }
  return RoadGraph::from_edges(sections.size(), edges);
}

SampledNeighborhood sample_neighborhood(const RoadGraph& graph, std::span<const NodeId> seeds,
                                        std::span<const std::size_t> fanouts,
                                        std::uint64_t rng_seed) {
  if (fanouts.empty()) throw ConfigError("sample_neighborhood: fanout list is empty");
  if (seeds.empty()) throw ConfigError("sample_neighborhood: seed list is empty");

  SampledNeighborhood out;
  out.fanouts.assign(fanouts.begin(), fanouts.end());

  std::vector<NodeId> frontier(seeds.begin(), seeds.end());
  std::sort(frontier.begin(), frontier.end());
  frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());

  std::vector<NodeId> scratch;
  for (std::size_t hop = 0; hop < fanouts.size(); ++hop) {
    SampledHop layer;
    layer.centers = frontier;
    layer.samples.reserve(frontier.size());
    std::vector<NodeId> next = frontier;
    for (NodeId center : frontier) {
      auto nbrs = graph.neighbors(center);
      std::vector<NodeId> pick;
      if (fanouts[hop] >= nbrs.size()) {
        pick.assign(nbrs.begin(), nbrs.end());
      } else {
        // Partial Fisher-Yates: the first `fanout` slots are a uniform
        // sample without replacement.
        scratch.assign(nbrs.begin(), nbrs.end());
        Rng rng(derive_seed(rng_seed, hop, center));
        const std::size_t take = fanouts[hop];
        for (std::size_t i = 0; i < take; ++i) {
          const auto j = i + rng.index(scratch.size() - i);
          std::swap(scratch[i], scratch[j]);
        }
        pick.assign(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(take));
        std::sort(pick.begin(), pick.end());
      }
      next.insert(next.end(), pick.begin(), pick.end());
      layer.samples.push_back(std::move(pick));
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    frontier = std::move(next);
    out.hops.push_back(std::move(layer));
  }
  return out;
}

}  // namespace pavesage
