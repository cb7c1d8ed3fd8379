#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pavesage {

/// Dense node index 0..N-1, assigned in input order.
using NodeId = std::uint32_t;

/// Route-anchored milepost label. Compared as exact tokens; a marker value
/// such as "12.50" is never parsed into a float.
struct ReferenceMarker {
  std::string route_id;
  std::string value;

  friend bool operator==(const ReferenceMarker&, const ReferenceMarker&) = default;
};

struct ReferenceMarkerHash {
  std::size_t operator()(const ReferenceMarker& m) const noexcept;
};

/// The part of a section record the graph builder needs.
struct SectionEndpoints {
  std::string section_id;
  ReferenceMarker begin;
  ReferenceMarker end;
};

/// Immutable undirected graph in compressed sparse row form. Adjacency
/// lists are sorted ascending with no self-loops and no duplicates.
class RoadGraph {
 public:
  RoadGraph() : offsets_{0} {}

  /// Builds from an undirected edge list. Self-loops and duplicates (in
  /// either orientation) are dropped.
  static RoadGraph from_edges(std::size_t n_nodes, std::span<const std::pair<NodeId, NodeId>> edges);

  std::size_t n_nodes() const { return offsets_.size() - 1; }
  std::size_t n_edges() const { return neighbor_ids_.size() / 2; }
  bool undirected() const { return true; }

  /// Sorted neighbors of v. Throws IndexError when v is out of range.
  std::span<const NodeId> neighbors(NodeId v) const;
  std::size_t degree(NodeId v) const { return neighbors(v).size(); }

  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const NodeId> neighbor_ids() const { return neighbor_ids_; }

  /// Canonical edge list with u < v, sorted.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  friend bool operator==(const RoadGraph&, const RoadGraph&) = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> neighbor_ids_;
};

/// Connects u and v whenever u's end marker equals v's begin marker (or the
/// reverse). Node i corresponds to sections[i]. Throws DataError naming the
/// id when a section id repeats, and ConfigError on an empty list.
RoadGraph build_graph(std::span<const SectionEndpoints> sections);

/// Sentinel fanout meaning "take every neighbor".
inline constexpr std::size_t kAllNeighbors = std::numeric_limits<std::size_t>::max();

/// One hop of a sampled neighborhood: for each center, the sampled neighbor
/// ids (sorted ascending, drawn without replacement).
struct SampledHop {
  std::vector<NodeId> centers;
  std::vector<std::vector<NodeId>> samples;
};

/// hops[0] samples around the seeds; hops[k] samples around the frontier
/// formed by hops[k-1]'s centers together with everything they sampled.
struct SampledNeighborhood {
  std::vector<SampledHop> hops;
  std::vector<std::size_t> fanouts;
};

/// Deterministic multi-hop sampling. Each (hop, center) pair draws from its
/// own stream derived from rng_seed, so the result is a pure function of the
/// arguments. Seeds are deduplicated and sorted.
SampledNeighborhood sample_neighborhood(const RoadGraph& graph, std::span<const NodeId> seeds,
                                        std::span<const std::size_t> fanouts,
                                        std::uint64_t rng_seed);

}  // namespace pavesage
