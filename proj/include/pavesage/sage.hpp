#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pavesage/graph.hpp"
#include "pavesage/matrix.hpp"
#include "pavesage/param_io.hpp"

namespace pavesage {

struct SageConfig {
  std::size_t n_layers = 2;
  std::vector<std::size_t> hidden_dims{256, 256};
  std::vector<std::size_t> fanouts{25, 10};
  double learning_rate = 0.01;
  std::size_t epochs = 400;
  std::size_t batch_size = 64;
  /// Epochs without a new best test R² before stopping; 0 disables.
  std::size_t patience = 50;
  std::uint64_t rng_seed = 0;
  /// Sensitivity switch: average over N(v) ∪ {v} instead of N(v).
  bool mean_includes_self = false;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Trainable state: one weight matrix per layer, W[k] of shape
/// hidden[k] × 2·prev_dim, plus a scalar linear head on the final embedding.
struct SageParams {
  std::vector<DenseMatrix> weights;
  DenseMatrix head_w;
  double head_b = 0.0;
  bool mean_includes_self = false;

  std::size_t n_layers() const { return weights.size(); }
  std::size_t input_dim() const { return weights.empty() ? 0 : weights.front().cols() / 2; }
  /// Throws ShapeError unless layer widths chain correctly.
  void check_shapes() const;

  friend bool operator==(const SageParams&, const SageParams&) = default;
};

/// Glorot-uniform weights, zero head bias; a pure function of
/// (input_dim, config).
SageParams init_params(std::size_t input_dim, const SageConfig& config);

/// Per-layer embeddings h^0 (= input features) through h^K; z = h^K.
struct Embeddings {
  std::vector<DenseMatrix> layers;
  const DenseMatrix& z() const { return layers.back(); }
};

/// Row v = mean of h_prev over v's full neighborhood (zero row when v is
/// isolated). h_prev must have one row per graph node.
DenseMatrix aggregate(const RoadGraph& graph, const DenseMatrix& h_prev,
                      bool mean_includes_self = false);

/// Row c = mean of h_prev over hop.samples[c]; `prev_nodes` names the node
/// behind each h_prev row and must be sorted. Throws Error when a sampled
/// node has no row (coverage gap).
DenseMatrix aggregate(const SampledHop& hop, const DenseMatrix& h_prev,
                      std::span<const NodeId> prev_nodes, bool mean_includes_self = false);

/// relu([h_self ‖ h_agg] · W_kᵀ).
DenseMatrix layer_forward(const DenseMatrix& h_self, const DenseMatrix& h_agg, const DenseMatrix& w_k);

Embeddings embed_full(const RoadGraph& graph, const DenseMatrix& features, const SageParams& params);

/// All-node predictions with unsampled neighborhoods, as an n × 1 column.
DenseMatrix forward_full(const RoadGraph& graph, const DenseMatrix& features, const SageParams& params);

/// Predictions for `batch` (in the given order) computed over a sampled
/// neighborhood. With fanouts of kAllNeighbors this equals forward_full
/// restricted to the batch, bit for bit.
DenseMatrix forward_sampled(const RoadGraph& graph, const DenseMatrix& features,
                            const SageParams& params, std::span<const NodeId> batch,
                            std::span<const std::size_t> fanouts, std::uint64_t rng_seed);

/// Inference entry point; same contract as forward_full.
DenseMatrix predict(const RoadGraph& graph, const DenseMatrix& features, const SageParams& params);

/// Gradient of a loss with respect to every trainable tensor.
struct SageGradients {
  std::vector<DenseMatrix> weights;
  DenseMatrix head_w;
  double head_b = 0.0;
};

/// MSE of forward_full over `nodes` against targets[node], and its exact
/// gradient. Used by training diagnostics and the gradient checker.
double sage_loss(const RoadGraph& graph, const DenseMatrix& features, const SageParams& params,
                 std::span<const double> targets, std::span<const NodeId> nodes,
                 SageGradients* grads = nullptr);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double train_r2 = 0.0;  // NaN when train targets have no variance
  double test_r2 = 0.0;   // NaN when test targets have no variance
};

struct TrainResult {
  SageParams params;
  std::vector<EpochRecord> history;
  /// Epoch whose parameters were kept (best test R²); 0 when epochs = 0.
  std::size_t best_epoch = 0;
};

/// Mini-batch Adam on MSE over train nodes using sampled neighborhoods.
/// Test nodes are those outside the mask with finite targets; nodes with
/// NaN targets are neither. One history entry per epoch, computed with
/// forward_full. Targets are standardised internally and the affine map is
/// folded back into the head, so returned parameters predict native units.
TrainResult train(const RoadGraph& graph, const DenseMatrix& features,
                  std::span<const double> targets, const std::vector<bool>& train_mask,
                  const SageConfig& config);

ParamContainer to_container(const SageParams& params, const SageConfig* config_echo = nullptr);
/// Rejects containers of another kind and inconsistent layer shapes; when
/// expected_input_dim is non-zero the first layer must match it.
SageParams sage_from_container(const ParamContainer& container, std::size_t expected_input_dim = 0);

}  // namespace pavesage
