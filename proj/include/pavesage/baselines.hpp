#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "pavesage/matrix.hpp"
#include "pavesage/param_io.hpp"

namespace pavesage {

// Graph-blind comparison regressors. All of them consume the same feature
// matrix as the GraphSAGE model and never look at the road graph.

struct LinearModel {
  std::vector<double> coefficients;
  double intercept = 0.0;

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

/// Least squares with an appended intercept column, solving
/// (X̃ᵀX̃ + ridge_eps·I) β = X̃ᵀy. ridge_eps only conditions the solve.
LinearModel fit_linear(const DenseMatrix& x, std::span<const double> y, double ridge_eps = 1e-8);

inline constexpr std::size_t kUnlimitedDepth = std::numeric_limits<std::size_t>::max();

struct CartNode {
  static constexpr std::int32_t kLeaf = -1;
  std::int32_t feature = kLeaf;
  double threshold = 0.0;  // x[feature] <= threshold goes left
  std::int32_t left = kLeaf;
  std::int32_t right = kLeaf;
  double value = 0.0;      // mean training target routed here
  std::size_t n_samples = 0;

  bool is_leaf() const { return left == kLeaf; }
  friend bool operator==(const CartNode&, const CartNode&) = default;
};

struct CartTree {
  std::vector<CartNode> nodes;  // nodes[0] is the root
  std::size_t n_features = 0;
  std::size_t max_depth = kUnlimitedDepth;
  std::size_t min_samples_leaf = 1;

  std::size_t depth() const;
  friend bool operator==(const CartTree&, const CartTree&) = default;
};

/// Greedy variance-reduction regression tree. Candidate thresholds are
/// midpoints of consecutive distinct sorted values; ties go to the lowest
/// feature index, then the lowest threshold.
CartTree fit_cart(const DenseMatrix& x, std::span<const double> y, std::size_t max_depth = kUnlimitedDepth,
                  std::size_t min_samples_leaf = 1);

struct MlpModel {
  DenseMatrix w1;  // hidden × d
  DenseMatrix b1;  // 1 × hidden
  DenseMatrix w2;  // 1 × hidden
  double b2 = 0.0;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

struct MlpOptions {
  std::size_t hidden = 100;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::size_t batch_size = 200;
  std::uint64_t rng_seed = 0;
};

MlpModel init_mlp(std::size_t input_dim, const MlpOptions& options);

/// One hidden ReLU layer and a linear output trained by mini-batch Adam on
/// MSE. Targets are standardised internally; the returned model predicts in
/// native units. Throws NumericError naming the epoch on a non-finite loss.
MlpModel fit_mlp(const DenseMatrix& x, std::span<const double> y, const MlpOptions& options);

/// MSE of the network on (x, y) and its gradient with respect to every
/// parameter, returned in an MlpModel-shaped holder.
double mlp_loss(const MlpModel& model, const DenseMatrix& x, std::span<const double> y,
                MlpModel* grads = nullptr);

using BaselineModel = std::variant<LinearModel, CartTree, MlpModel>;

/// Model-specific prediction; throws ShapeError when x's width differs from
/// the training width.
std::vector<double> predict_baseline(const BaselineModel& model, const DenseMatrix& x);

ParamContainer to_container(const BaselineModel& model);
BaselineModel baseline_from_container(const ParamContainer& container);

}  // namespace pavesage
