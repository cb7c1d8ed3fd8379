#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pavesage {

struct GradSuiteEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t points = 0;
};

/// Finite-difference check of every backward primitive and of the full
/// two-layer GraphSAGE loss (wrt each weight matrix and the head), each at
/// `n_points` random points with h = 1e-5. Points that put a ReLU input
/// within 1e-4 of the kink are redrawn.
std::vector<GradSuiteEntry> run_gradient_suite(std::size_t n_points = 100, std::uint64_t seed = 0);

}  // namespace pavesage
