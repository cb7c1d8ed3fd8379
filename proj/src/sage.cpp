#include "pavesage/sage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pavesage/adam.hpp"
#include "pavesage/error.hpp"
#include "pavesage/metrics.hpp"
#include "pavesage/rng.hpp"

namespace pavesage {

void SageConfig::validate() const {
  if (n_layers == 0) throw ConfigError("GraphSAGE needs at least one layer");
  if (hidden_dims.size() != n_layers || fanouts.size() != n_layers) {
    throw ConfigError("GraphSAGE config: " + std::to_string(n_layers) + " layers but " +
                      std::to_string(hidden_dims.size()) + " hidden widths and " +
                      std::to_string(fanouts.size()) + " fanouts");
  }
  for (std::size_t h : hidden_dims)
    if (h == 0) throw ConfigError("GraphSAGE config: zero hidden width");
  for (std::size_t f : fanouts)
    if (f == 0) throw ConfigError("GraphSAGE config: zero fanout");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("GraphSAGE config: learning rate must be positive");
  if (batch_size == 0) throw ConfigError("GraphSAGE config: zero batch size");
}

void SageParams::check_shapes() const {
  if (weights.empty()) throw ShapeError("GraphSAGE params: no layers");
  std::size_t prev = weights.front().cols();
  if (prev == 0 || prev % 2 != 0) {
    throw ShapeError("GraphSAGE params: first layer width " + weights.front().shape_string() +
                     " is not 2 x input_dim");
  }
  prev /= 2;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const auto& w = weights[k];
    if (w.cols() != 2 * prev || w.rows() == 0) {
      throw ShapeError("GraphSAGE params: W[" + std::to_string(k) + "] is " + w.shape_string() +
                       ", expected ?x" + std::to_string(2 * prev));
    }
    prev = w.rows();
  }
  if (head_w.rows() != 1 || head_w.cols() != prev) {
    throw ShapeError("GraphSAGE params: head is " + head_w.shape_string() + ", expected 1x" +
                     std::to_string(prev));
  }
}

namespace {

void glorot_fill(DenseMatrix& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
}

}  // namespace

SageParams init_params(std::size_t input_dim, const SageConfig& config) {
  config.validate();
  if (input_dim == 0) throw ConfigError("GraphSAGE init: input_dim must be at least 1");
  Rng rng(derive_seed(config.rng_seed, 0x1417));
  SageParams p;
  p.mean_includes_self = config.mean_includes_self;
  std::size_t prev = input_dim;
  for (std::size_t k = 0; k < config.n_layers; ++k) {
    DenseMatrix w(config.hidden_dims[k], 2 * prev);
    glorot_fill(w, rng);
    p.weights.push_back(std::move(w));
    prev = config.hidden_dims[k];
  }
  p.head_w = DenseMatrix(1, prev);
  glorot_fill(p.head_w, rng);
  p.head_b = 0.0;
  return p;
}

// ---------------------------------------------------------------------------
// Computation plans. A plan lists, per layer, which previous-layer rows feed
// each output row as "self" and which as neighbors. The full and sampled
// forwards share one executor so that saturating fanouts reproduce the full
// forward exactly.

namespace {

struct LayerPlan {
  std::vector<std::size_t> self_rows;
  std::vector<std::vector<std::size_t>> neighbor_rows;
};

struct ComputePlan {
  std::vector<NodeId> input_nodes;
  std::vector<LayerPlan> layers;
  std::vector<NodeId> output_nodes;
};

ComputePlan full_plan(const RoadGraph& graph, std::size_t n_layers, bool include_self) {
  ComputePlan plan;
  const std::size_t n = graph.n_nodes();
  plan.input_nodes.resize(n);
  std::iota(plan.input_nodes.begin(), plan.input_nodes.end(), NodeId{0});
  plan.output_nodes = plan.input_nodes;

  LayerPlan layer;
  layer.self_rows.resize(n);
  std::iota(layer.self_rows.begin(), layer.self_rows.end(), std::size_t{0});
  layer.neighbor_rows.resize(n);
  for (NodeId v = 0; v < n; ++v) {
    auto nbrs = graph.neighbors(v);
    auto& rows = layer.neighbor_rows[v];
    rows.assign(nbrs.begin(), nbrs.end());
    if (include_self) rows.insert(std::lower_bound(rows.begin(), rows.end(), v), v);
  }
  plan.layers.assign(n_layers, layer);
  return plan;
}

std::size_t row_of(std::span<const NodeId> sorted_nodes, NodeId v) {
  auto it = std::lower_bound(sorted_nodes.begin(), sorted_nodes.end(), v);
  if (it == sorted_nodes.end() || *it != v) {
    throw Error("sampled plan: node " + std::to_string(v) +
                " is not covered by the previous layer's rows");
  }
  return static_cast<std::size_t>(it - sorted_nodes.begin());
}

LayerPlan layer_from_hop(const SampledHop& hop, std::span<const NodeId> prev_nodes,
                         bool include_self) {
  LayerPlan layer;
  layer.self_rows.reserve(hop.centers.size());
  layer.neighbor_rows.resize(hop.centers.size());
  for (std::size_t c = 0; c < hop.centers.size(); ++c) {
    const NodeId center = hop.centers[c];
    layer.self_rows.push_back(row_of(prev_nodes, center));
    auto& rows = layer.neighbor_rows[c];
    const auto& sample = hop.samples[c];
    rows.reserve(sample.size() + (include_self ? 1 : 0));
    bool self_done = !include_self;
    for (NodeId u : sample) {
      if (!self_done && center < u) {
        rows.push_back(row_of(prev_nodes, center));
        self_done = true;
      }
      rows.push_back(row_of(prev_nodes, u));
    }
    if (!self_done) rows.push_back(row_of(prev_nodes, center));
  }
  return layer;
}

ComputePlan sampled_plan(const SampledNeighborhood& hood, bool include_self) {
  const std::size_t k_layers = hood.hops.size();
  ComputePlan plan;
  // Rows of h^0: the outermost frontier plus everything it sampled.
  const auto& outer = hood.hops.back();
  plan.input_nodes = outer.centers;
  for (const auto& s : outer.samples) plan.input_nodes.insert(plan.input_nodes.end(), s.begin(), s.end());
  std::sort(plan.input_nodes.begin(), plan.input_nodes.end());
  plan.input_nodes.erase(std::unique(plan.input_nodes.begin(), plan.input_nodes.end()),
                         plan.input_nodes.end());

  // Layer k (1-based) evaluates the centers of hop K-k.
  std::span<const NodeId> prev = plan.input_nodes;
  for (std::size_t k = 1; k <= k_layers; ++k) {
    const auto& hop = hood.hops[k_layers - k];
    plan.layers.push_back(layer_from_hop(hop, prev, include_self));
    prev = hop.centers;
  }
  plan.output_nodes = hood.hops.front().centers;
  return plan;
}

struct ForwardCache {
  std::vector<DenseMatrix> h;       // h[0] .. h[K], rows per plan
  std::vector<DenseMatrix> concat;  // input to layer k
  std::vector<DenseMatrix> pre;     // pre-activation of layer k
  DenseMatrix pred;                 // output_nodes × 1
};

ForwardCache run_plan(const ComputePlan& plan, const DenseMatrix& features, const SageParams& params) {
  params.check_shapes();
  if (features.cols() != params.input_dim()) {
    throw ShapeError("GraphSAGE forward: features are " + features.shape_string() +
                     " but the model expects " + std::to_string(params.input_dim()) + " columns");
  }
  if (plan.layers.size() != params.n_layers()) {
    throw ShapeError("GraphSAGE forward: plan depth differs from model depth");
  }
  ForwardCache cache;
  std::vector<std::size_t> input_rows(plan.input_nodes.begin(), plan.input_nodes.end());
  cache.h.push_back(gather_rows(features, input_rows));
  for (std::size_t k = 0; k < plan.layers.size(); ++k) {
    const auto& layer = plan.layers[k];
    const DenseMatrix& prev = cache.h.back();
    DenseMatrix self = gather_rows(prev, layer.self_rows);
    DenseMatrix agg = mean_rows(prev, layer.neighbor_rows);
    DenseMatrix cat = concat_cols(self, agg);
    DenseMatrix pre = matmul_bt(cat, params.weights[k]);
    cache.h.push_back(relu(pre));
    cache.concat.push_back(std::move(cat));
    cache.pre.push_back(std::move(pre));
  }
  cache.pred = matmul_bt(cache.h.back(), params.head_w);
  for (double& v : cache.pred.values()) v += params.head_b;
  return cache;
}

/// Backpropagates d loss / d pred through a cached forward.
SageGradients backprop(const ComputePlan& plan, const ForwardCache& cache, const SageParams& params,
                       const DenseMatrix& dpred) {
  SageGradients g;
  g.weights.resize(params.n_layers());
  g.head_w = matmul_at(dpred, cache.h.back());
  g.head_b = 0.0;
  for (double v : dpred.values()) g.head_b += v;

  DenseMatrix dh = matmul(dpred, params.head_w);
  for (std::size_t k = params.n_layers(); k-- > 0;) {
    DenseMatrix dpre = relu_backward(cache.pre[k], dh);
    g.weights[k] = matmul_at(dpre, cache.concat[k]);
    if (k == 0) break;
    DenseMatrix dcat = matmul(dpre, params.weights[k]);
    const std::size_t self_cols = cache.h[k].cols();
    auto [dself, dagg] = split_cols(dcat, self_cols);
    const auto& layer = plan.layers[k];
    DenseMatrix dprev = gather_rows_backward(dself, layer.self_rows, cache.h[k].rows());
    add_inplace(dprev, mean_rows_backward(dagg, layer.neighbor_rows, cache.h[k].rows()));
    dh = std::move(dprev);
  }
  return g;
}

}  // namespace

DenseMatrix aggregate(const RoadGraph& graph, const DenseMatrix& h_prev, bool mean_includes_self) {
  if (h_prev.rows() != graph.n_nodes()) {
    throw ShapeError("aggregate: embedding has " + std::to_string(h_prev.rows()) +
                     " rows for a graph of " + std::to_string(graph.n_nodes()) + " nodes");
  }
  const auto plan = full_plan(graph, 1, mean_includes_self);
  return mean_rows(h_prev, plan.layers.front().neighbor_rows);
}

DenseMatrix aggregate(const SampledHop& hop, const DenseMatrix& h_prev,
                      std::span<const NodeId> prev_nodes, bool mean_includes_self) {
  if (h_prev.rows() != prev_nodes.size()) {
    throw ShapeError("aggregate: embedding rows do not match the listed frontier");
  }
  const auto layer = layer_from_hop(hop, prev_nodes, mean_includes_self);
  return mean_rows(h_prev, layer.neighbor_rows);
}

DenseMatrix layer_forward(const DenseMatrix& h_self, const DenseMatrix& h_agg, const DenseMatrix& w_k) {
  if (h_self.rows() != h_agg.rows()) {
    throw ShapeError("layer_forward: self rows " + h_self.shape_string() + " vs aggregate rows " +
                     h_agg.shape_string());
  }
  if (w_k.cols() != h_self.cols() + h_agg.cols()) {
    throw ShapeError("layer_forward: weight " + w_k.shape_string() + " does not accept " +
                     std::to_string(h_self.cols() + h_agg.cols()) + " concatenated columns");
  }
  return relu(matmul_bt(concat_cols(h_self, h_agg), w_k));
}

Embeddings embed_full(const RoadGraph& graph, const DenseMatrix& features, const SageParams& params) {
  if (features.rows() != graph.n_nodes()) {
    throw ShapeError("GraphSAGE forward: " + std::to_string(features.rows()) +
                     " feature rows for a graph of " + std::to_string(graph.n_nodes()) + " nodes");
  }
  const auto plan = full_plan(graph, params.n_layers(), params.mean_includes_self);
  auto cache = run_plan(plan, features, params);
  return Embeddings{std::move(cache.h)};
}

DenseMatrix forward_full(const RoadGraph& graph, const DenseMatrix& features, const SageParams& params) {
  if (features.rows() != graph.n_nodes()) {
    throw ShapeError("GraphSAGE forward: " + std::to_string(features.rows()) +
                     " feature rows for a graph of " + std::to_string(graph.n_nodes()) + " nodes");
  }
  const auto plan = full_plan(graph, params.n_layers(), params.mean_includes_self);
  return run_plan(plan, features, params).pred;
}

DenseMatrix predict(const RoadGraph& graph, const DenseMatrix& features, const SageParams& params) {
  return forward_full(graph, features, params);
}

DenseMatrix forward_sampled(const RoadGraph& graph, const DenseMatrix& features,
                            const SageParams& params, std::span<const NodeId> batch,
                            std::span<const std::size_t> fanouts, std::uint64_t rng_seed) {
  if (batch.empty()) throw ConfigError("forward_sampled: empty batch");
  if (features.rows() != graph.n_nodes()) {
    throw ShapeError("GraphSAGE forward: " + std::to_string(features.rows()) +
                     " feature rows for a graph of " + std::to_string(graph.n_nodes()) + " nodes");
  }
  if (fanouts.size() != params.n_layers()) {
    throw ConfigError("forward_sampled: " + std::to_string(fanouts.size()) + " fanouts for a " +
                      std::to_string(params.n_layers()) + "-layer model");
  }
  const auto hood = sample_neighborhood(graph, batch, fanouts, rng_seed);
  const auto plan = sampled_plan(hood, params.mean_includes_self);
  const auto cache = run_plan(plan, features, params);
  DenseMatrix out(batch.size(), 1);
  for (std::size_t i = 0; i < batch.size(); ++i) out(i, 0) = cache.pred(row_of(plan.output_nodes, batch[i]), 0);
  return out;
}

double sage_loss(const RoadGraph& graph, const DenseMatrix& features, const SageParams& params,
                 std::span<const double> targets, std::span<const NodeId> nodes, SageGradients* grads) {
  if (nodes.empty()) throw ConfigError("sage_loss: empty node list");
  if (targets.size() != graph.n_nodes()) throw ShapeError("sage_loss: one target per node required");
  if (features.rows() != graph.n_nodes()) throw ShapeError("sage_loss: one feature row per node required");
  const auto plan = full_plan(graph, params.n_layers(), params.mean_includes_self);
  const auto cache = run_plan(plan, features, params);

  DenseMatrix pred(nodes.size(), 1);
  DenseMatrix target(nodes.size(), 1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    pred(i, 0) = cache.pred(nodes[i], 0);
    target(i, 0) = targets[nodes[i]];
  }
  auto lg = mse_loss(pred, target);
  if (grads != nullptr) {
    DenseMatrix dpred(graph.n_nodes(), 1);
    for (std::size_t i = 0; i < nodes.size(); ++i) dpred(nodes[i], 0) += lg.grad(i, 0);
    *grads = backprop(plan, cache, params, dpred);
  }
  return lg.loss;
}

// ---------------------------------------------------------------------------
// Training

namespace {

double r2_or_nan(std::span<const double> y, std::span<const double> p) {
  try {
    return r2_score(y, p);
  } catch (const MetricError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

struct TargetScale {
  double mean = 0.0;
  double sd = 1.0;
};

SageParams fold_scale(const SageParams& scaled, const TargetScale& s) {
  SageParams out = scaled;
  for (double& v : out.head_w.values()) v *= s.sd;
  out.head_b = scaled.head_b * s.sd + s.mean;
  return out;
}

}  // namespace

TrainResult train(const RoadGraph& graph, const DenseMatrix& features, std::span<const double> targets,
                  const std::vector<bool>& train_mask, const SageConfig& config) {
  config.validate();
  const std::size_t n = graph.n_nodes();
  if (features.rows() != n || targets.size() != n || train_mask.size() != n) {
    throw ShapeError("train: features, targets and mask must all have one entry per node (" +
                     std::to_string(n) + ")");
  }

  std::vector<NodeId> train_nodes;
  std::vector<NodeId> test_nodes;
  for (NodeId v = 0; v < n; ++v) {
    if (!std::isfinite(targets[v])) continue;
    (train_mask[v] ? train_nodes : test_nodes).push_back(v);
  }
  if (train_nodes.empty() || test_nodes.empty()) {
    throw ConfigError("train: need at least one labelled train node and one labelled test node");
  }

  TrainResult result;
  SageParams params = init_params(features.cols(), config);
  if (config.epochs == 0) {
    result.params = std::move(params);
    return result;
  }

  TargetScale scale;
  for (NodeId v : train_nodes) scale.mean += targets[v];
  scale.mean /= static_cast<double>(train_nodes.size());
  double var = 0.0;
  for (NodeId v : train_nodes) var += (targets[v] - scale.mean) * (targets[v] - scale.mean);
  var /= static_cast<double>(train_nodes.size());
  scale.sd = var > 0.0 ? std::sqrt(var) : 1.0;

  std::vector<double> y_train(train_nodes.size());
  std::vector<double> y_test(test_nodes.size());
  for (std::size_t i = 0; i < train_nodes.size(); ++i) y_train[i] = targets[train_nodes[i]];
  for (std::size_t i = 0; i < test_nodes.size(); ++i) y_test[i] = targets[test_nodes[i]];

  Adam adam(AdamOptions{config.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<NodeId> order = train_nodes;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<double> p_train(train_nodes.size());
  std::vector<double> p_test(test_nodes.size());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.rng_seed, 0x5eed, epoch));
    shuffle_rng.shuffle(order.begin(), order.end());

    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::span<const NodeId> batch(order.data() + start, stop - start);

      const auto hood = sample_neighborhood(graph, batch, config.fanouts,
                                            derive_seed(config.rng_seed, epoch, batch_index));
      const auto plan = sampled_plan(hood, params.mean_includes_self);
      const auto cache = run_plan(plan, features, params);

      // plan.output_nodes is the sorted batch; targets follow that order.
      DenseMatrix target(plan.output_nodes.size(), 1);
      for (std::size_t i = 0; i < plan.output_nodes.size(); ++i)
        target(i, 0) = (targets[plan.output_nodes[i]] - scale.mean) / scale.sd;
      auto lg = mse_loss(cache.pred, target);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      auto grads = backprop(plan, cache, params, lg.grad);

      DenseMatrix head_b(1, 1, params.head_b);
      DenseMatrix head_b_grad(1, 1, grads.head_b);
      std::vector<DenseMatrix*> ps;
      std::vector<const DenseMatrix*> gs;
      for (std::size_t k = 0; k < params.weights.size(); ++k) {
        ps.push_back(&params.weights[k]);
        gs.push_back(&grads.weights[k]);
      }
      ps.push_back(&params.head_w);
      gs.push_back(&grads.head_w);
      ps.push_back(&head_b);
      gs.push_back(&head_b_grad);
      adam.step(ps, gs);
      params.head_b = head_b(0, 0);
      for (const auto* p : ps) {
        if (!p->all_finite()) {
          throw NumericError("train: non-finite parameters at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
        }
      }
    }

    SageParams native = fold_scale(params, scale);
    const DenseMatrix pred = forward_full(graph, features, native);
    if (!pred.all_finite()) {
      throw NumericError("train: non-finite predictions after epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string((order.size() - 1) / config.batch_size));
    }
    for (std::size_t i = 0; i < train_nodes.size(); ++i) p_train[i] = pred(train_nodes[i], 0);
    for (std::size_t i = 0; i < test_nodes.size(); ++i) p_test[i] = pred(test_nodes[i], 0);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = mse_mae(y_train, p_train).mse;
    rec.test_loss = mse_mae(y_test, p_test).mse;
    rec.train_r2 = r2_or_nan(y_train, p_train);
    rec.test_r2 = r2_or_nan(y_test, p_test);
    result.history.push_back(rec);

    const double score = std::isnan(rec.test_r2) ? -rec.test_loss : rec.test_r2;
    if (score > best_score) {
      best_score = score;
      result.params = std::move(native);
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience != 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string join(const std::vector<std::size_t>& values) {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ',';
    if (values[i] == kAllNeighbors) os << "all";
    else os << values[i];
  }
  return os.str();
}

}  // namespace

ParamContainer to_container(const SageParams& params, const SageConfig* config_echo) {
  params.check_shapes();
  ParamContainer c;
  c.kind = "sage";
  c.meta["n_layers"] = std::to_string(params.n_layers());
  c.meta["input_dim"] = std::to_string(params.input_dim());
  c.meta["mean_includes_self"] = params.mean_includes_self ? "true" : "false";
  if (config_echo != nullptr) {
    c.meta["config.hidden_dims"] = join(config_echo->hidden_dims);
    c.meta["config.fanouts"] = join(config_echo->fanouts);
    std::ostringstream lr;
    lr.precision(17);
    lr << config_echo->learning_rate;
    c.meta["config.learning_rate"] = lr.str();
    c.meta["config.epochs"] = std::to_string(config_echo->epochs);
    c.meta["config.batch_size"] = std::to_string(config_echo->batch_size);
    c.meta["config.patience"] = std::to_string(config_echo->patience);
    c.meta["config.rng_seed"] = std::to_string(config_echo->rng_seed);
  }
  for (std::size_t k = 0; k < params.n_layers(); ++k) c.matrices["W" + std::to_string(k)] = params.weights[k];
  c.matrices["head_w"] = params.head_w;
  c.matrices["head_b"] = DenseMatrix(1, 1, params.head_b);
  return c;
}

SageParams sage_from_container(const ParamContainer& c, std::size_t expected_input_dim) {
  if (c.kind != "sage") throw DataError("expected a sage parameter container, found '" + c.kind + "'");
  SageParams p;
  std::size_t layers = 0;
  try {
    layers = std::stoul(c.meta_value("n_layers"));
  } catch (const std::logic_error&) {
    throw DataError("sage container: unreadable n_layers");
  }
  for (std::size_t k = 0; k < layers; ++k) p.weights.push_back(c.matrix("W" + std::to_string(k)));
  p.head_w = c.matrix("head_w");
  const auto& b = c.matrix("head_b");
  if (b.rows() != 1 || b.cols() != 1) throw ShapeError("sage container: head_b must be 1x1");
  p.head_b = b(0, 0);
  p.mean_includes_self = c.meta_value("mean_includes_self") == "true";
  p.check_shapes();
  if (expected_input_dim != 0 && p.input_dim() != expected_input_dim) {
    throw ShapeError("sage container expects " + std::to_string(p.input_dim()) +
                     " input features, data has " + std::to_string(expected_input_dim));
  }
  for (const auto& w : p.weights)
    if (!w.all_finite()) throw DataError("sage container: non-finite weights");
  return p;
}

}  // namespace pavesage
