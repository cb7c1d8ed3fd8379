#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <cstddef>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pavesage/baselines.hpp"
#include "pavesage/graph.hpp"
#include "pavesage/matrix.hpp"
#include "pavesage/rng.hpp"

namespace testsupport {

using pavesage::DenseMatrix;
using pavesage::NodeId;
using pavesage::RoadGraph;
using pavesage::Rng;
using Edge = std::pair<NodeId, NodeId>;

inline DenseMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

inline std::vector<NodeId> iota_nodes(std::size_t n) {
  std::vector<NodeId> out(n);
  for (NodeId v = 0; v < n; ++v) out[v] = v;
  return out;
}

/// Random graph with up to n·density extra edges on top of a random forest;
/// some nodes are left isolated.
inline RoadGraph random_graph(Rng& rng, std::size_t n, double density = 1.0) {
  std::vector<Edge> edges;
  for (NodeId v = 1; v < n; ++v)
    if (rng.uniform() < 0.85) edges.emplace_back(static_cast<NodeId>(rng.index(v)), v);
  const auto extra = static_cast<std::size_t>(density * static_cast<double>(n) * rng.uniform());
  for (std::size_t i = 0; i < extra; ++i)
    edges.emplace_back(static_cast<NodeId>(rng.index(n)), static_cast<NodeId>(rng.index(n)));
  return RoadGraph::from_edges(n, edges);
}

/// A long path with short side branches hanging off random path nodes.
inline RoadGraph path_with_branches(Rng& rng, std::size_t path_len, std::size_t n_branches) {
  std::vector<Edge> edges;
  for (NodeId v = 1; v < path_len; ++v) edges.emplace_back(v - 1, v);
  NodeId next = static_cast<NodeId>(path_len);
  for (std::size_t b = 0; b < n_branches; ++b) {
    NodeId at = static_cast<NodeId>(rng.index(path_len));
    for (std::size_t len = 1 + rng.index(3); len > 0; --len) {
      edges.emplace_back(at, next);
      at = next++;
    }
  }
  return RoadGraph::from_edges(next, edges);
}

/// Sections over a few routes with markers drawn from a small pool, so
/// coincident markers, branches and loops are common.
inline std::vector<pavesage::SectionEndpoints> random_marker_table(Rng& rng, std::size_t n) {
  static const std::vector<std::string> routes{"R1", "R2", "FM 12"};
  static const std::vector<std::string> markers{"0", "0.5", "1", "1.0", "1.5", "2", "2.5", "10", "12.25"};
  std::vector<pavesage::SectionEndpoints> out;
  for (std::size_t i = 0; i < n; ++i) {
    pavesage::SectionEndpoints s;
    s.section_id = "S" + std::to_string(i);
    s.begin = {routes[rng.index(routes.size())], markers[rng.index(markers.size())]};
    s.end = {rng.uniform() < 0.8 ? s.begin.route_id : routes[rng.index(routes.size())],
             markers[rng.index(markers.size())]};
    out.push_back(std::move(s));
  }
  return out;
}

/// Pairwise marker comparison over every pair of sections.
inline std::set<Edge> brute_force_edges(const std::vector<pavesage::SectionEndpoints>& sections) {
  std::set<Edge> out;
  for (NodeId u = 0; u < sections.size(); ++u) {
    for (NodeId v = u + 1; v < sections.size(); ++v) {
      const auto& a = sections[u];
      const auto& b = sections[v];
      const bool ab = a.end.route_id == b.begin.route_id && a.end.value == b.begin.value;
      const bool ba = b.end.route_id == a.begin.route_id && b.end.value == a.begin.value;
      if (ab || ba) out.emplace(u, v);
    }
  }
  return out;
}

inline std::vector<std::size_t> bfs_distances(const RoadGraph& g, NodeId source) {
  constexpr auto kFar = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(g.n_nodes(), kFar);
  std::queue<NodeId> q;
  dist[source] = 0;
  q.push(source);
  while (!q.empty()) {
    const NodeId v = q.front();
    q.pop();
    for (NodeId u : g.neighbors(v)) {
      if (dist[u] == kFar) {
        dist[u] = dist[v] + 1;
        q.push(u);
      }
    }
  }
  return dist;
}

// Independent greedy regression tree: scores every split by directly
// recomputing the children's sums of squared deviations.
struct OracleNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  double value = 0.0;
  std::unique_ptr<OracleNode> left, right;
};

inline double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}

inline std::unique_ptr<OracleNode> oracle_tree(const DenseMatrix& x, const std::vector<double>& y,
                                               const std::vector<std::size_t>& rows, std::size_t depth_left) {
  auto node = std::make_unique<OracleNode>();
  std::vector<double> ys;
  for (auto r : rows) ys.push_back(y[r]);
  node->value = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  const double parent = sse(ys);
  if (depth_left == 0 || rows.size() < 2 || parent <= 0.0) return node;

  double best_gain = 0.0;
  std::optional<std::pair<std::size_t, double>> best;
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::vector<double> vals;
    for (auto r : rows) vals.push_back(x(r, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      const double t = vals[i] + (vals[i + 1] - vals[i]) / 2.0;
      std::vector<double> l, r;
      for (auto row : rows) (x(row, f) <= t ? l : r).push_back(y[row]);
      const double gain = parent - sse(l) - sse(r);
      if (gain > best_gain * (1.0 + 1e-9)) {
        best_gain = gain;
        best = {f, t};
      }
    }
  }
  if (!best) return node;
  node->leaf = false;
  node->feature = best->first;
  node->threshold = best->second;
  std::vector<std::size_t> l, r;
  for (auto row : rows) (x(row, node->feature) <= node->threshold ? l : r).push_back(row);
  node->left = oracle_tree(x, y, l, depth_left - 1);
  node->right = oracle_tree(x, y, r, depth_left - 1);
  return node;
}

inline bool same_tree(const pavesage::CartTree& t, std::size_t at, const OracleNode& o) {
  const auto& n = t.nodes.at(at);
  if (std::abs(n.value - o.value) > 1e-12 || n.is_leaf() != o.leaf) return false;
  if (o.leaf) return true;
  return static_cast<std::size_t>(n.feature) == o.feature && std::abs(n.threshold - o.threshold) <= 1e-12 &&
         same_tree(t, static_cast<std::size_t>(n.left), *o.left) &&
         same_tree(t, static_cast<std::size_t>(n.right), *o.right);
}

}  // namespace testsupport
