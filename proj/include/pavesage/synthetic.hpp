#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pavesage/graph.hpp"
#include "pavesage/records.hpp"

namespace pavesage {

struct SyntheticOptions {
  std::size_t n_nodes = 2000;
  std::size_t n_routes = 40;
  /// Spatial strength in [0, 1]: 0 leaves the latent factor i.i.d.
  double rho = 0.8;
  std::uint64_t seed = 0;
  /// Probability that any single numeric cell is left missing.
  double missing_rate = 0.0;

  void validate() const;
};

/// Generator internals kept for diagnostics.
struct GroundTruth {
  std::vector<double> latent;             // standardised spatial factor per node
  std::vector<double> deterioration_rate; // yearly deterioration per node
  std::vector<double> initial_level;      // deterioration state entering 2014
  std::array<double, kIndicatorCount> base{};
  std::array<double, kIndicatorCount> drift{};  // indicator units per unit of deterioration
};

struct SyntheticData {
  std::vector<SectionRecord> records;
  GroundTruth truth;
};

/// Routes are marker chains (path graphs). A white-noise latent factor is
/// smoothed three times by closed-neighborhood averaging with weight rho and
/// drives both the starting condition and the deterioration rate; every
/// indicator is an affine, range-clamped reading of the resulting
/// deterioration state plus survey noise.
SyntheticData generate_synthetic(const SyntheticOptions& options);

/// Mixes each value with the mean over its closed neighborhood, `rounds`
/// times: v ← (1 − rho)·v + rho·mean(N(v) ∪ {v}).
std::vector<double> smooth_on_graph(const RoadGraph& graph, std::span<const double> values, double rho,
                                    std::size_t rounds);

/// Pearson correlation of (value_u, value_v) over all directed edges; a
/// lag-1 spatial autocorrelation statistic. NaN values are skipped.
double neighbor_correlation(const RoadGraph& graph, std::span<const double> values);

/// Long-format sidecar: kind,key,value rows for per-node latent factor,
/// rate and level, and per-indicator base and drift.
std::string ground_truth_csv(std::span<const SectionRecord> records, const GroundTruth& truth);
void write_ground_truth(const std::filesystem::path& path, std::span<const SectionRecord> records,
                        const GroundTruth& truth);

}  // namespace pavesage
