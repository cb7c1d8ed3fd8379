#include "pavesage/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pavesage/adam.hpp"
#include "pavesage/error.hpp"
#include "pavesage/rng.hpp"

namespace pavesage {

namespace {

void require_finite(const DenseMatrix& x, std::span<const double> y, const char* who) {
  if (x.rows() != y.size()) {
    throw ShapeError(std::string(who) + ": " + std::to_string(x.rows()) + " rows vs " +
                     std::to_string(y.size()) + " targets");
  }
  if (x.rows() == 0) throw DataError(std::string(who) + ": no samples");
  if (!x.all_finite()) throw DataError(std::string(who) + ": non-finite feature value");
  for (double v : y)
    if (!std::isfinite(v)) throw DataError(std::string(who) + ": non-finite target value");
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear regression

LinearModel fit_linear(const DenseMatrix& x, std::span<const double> y, double ridge_eps) {
  require_finite(x, y, "fit_linear");
  if (!(ridge_eps >= 0.0)) throw ConfigError("fit_linear: ridge_eps must be non-negative");
  const std::size_t d = x.cols();
  const std::size_t p = d + 1;  // last slot is the intercept

  // Normal equations accumulated and factored in extended precision.
  std::vector<long double> a(p * p, 0.0L);
  std::vector<long double> rhs(p, 0.0L);
  std::vector<long double> row(p);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < d; ++j) row[j] = x(r, j);
    row[d] = 1.0L;
    for (std::size_t i = 0; i < p; ++i) {
      rhs[i] += row[i] * y[r];
      for (std::size_t j = 0; j <= i; ++j) a[i * p + j] += row[i] * row[j];
    }
  }
  for (std::size_t i = 0; i < p; ++i) a[i * p + i] += ridge_eps;

  // Cholesky: a = L Lᵀ, stored in the lower triangle.
  for (std::size_t j = 0; j < p; ++j) {
    long double diag = a[j * p + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * p + k] * a[j * p + k];
    if (!(diag > 0.0L)) {
      throw DataError("fit_linear: normal matrix is not positive definite (column " + std::to_string(j) +
                      "); increase ridge_eps");
    }
    const long double ljj = std::sqrt(diag);
    a[j * p + j] = ljj;
    for (std::size_t i = j + 1; i < p; ++i) {
      long double s = a[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
      a[i * p + j] = s / ljj;
    }
  }
  std::vector<long double> z(p);
  for (std::size_t i = 0; i < p; ++i) {
    long double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * p + k] * z[k];
    z[i] = s / a[i * p + i];
  }
  std::vector<long double> beta(p);
  for (std::size_t i = p; i-- > 0;) {
    long double s = z[i];
    for (std::size_t k = i + 1; k < p; ++k) s -= a[k * p + i] * beta[k];
    beta[i] = s / a[i * p + i];
  }

  LinearModel m;
  m.coefficients.resize(d);
  for (std::size_t j = 0; j < d; ++j) m.coefficients[j] = static_cast<double>(beta[j]);
  m.intercept = static_cast<double>(beta[d]);
  return m;
}

// ---------------------------------------------------------------------------
// CART

namespace {

struct CartBuilder {
  const DenseMatrix& x;
  std::span<const double> y;
  std::size_t max_depth;
  std::size_t min_leaf;
  std::vector<CartNode> nodes;

  static constexpr double kTieTolerance = 1e-9;

  std::int32_t grow(std::vector<std::size_t>& idx, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    const std::size_t m = idx.size();

    double sum = 0.0;
    for (std::size_t i : idx) sum += y[i];
    const double mean = sum / static_cast<double>(m);
    nodes[id].value = mean;
    nodes[id].n_samples = m;

    const auto [lo, hi] = std::minmax_element(idx.begin(), idx.end(),
                                              [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    if (depth >= max_depth || m < 2 * min_leaf || y[*lo] == y[*hi]) return id;

    // With targets centred on the node mean the parent sum is zero, and the
    // SSE reduction of a split is S_L² (1/n_L + 1/n_R).
    double best_gain = 0.0;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    bool found = false;
    std::vector<std::size_t> order(idx);
    for (std::size_t f = 0; f < x.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        left_sum += y[order[i]] - mean;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = m - n_left;
        const double xi = x(order[i], f);
        const double xn = x(order[i + 1], f);
        if (!(xi < xn)) continue;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double gain =
            left_sum * left_sum * (1.0 / static_cast<double>(n_left) + 1.0 / static_cast<double>(n_right));
        // Gains within kTieTolerance of the best are ties; the earlier candidate stays.
        if (gain > best_gain * (1.0 + kTieTolerance)) {
          best_gain = gain;
          best_feature = f;
          best_threshold = xi + (xn - xi) / 2.0;
          found = true;
        }
      }
    }
    if (!found) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t i : idx) (x(i, best_feature) <= best_threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();

    nodes[id].feature = static_cast<std::int32_t>(best_feature);
    nodes[id].threshold = best_threshold;
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }
};

std::size_t subtree_depth(const std::vector<CartNode>& nodes, std::int32_t id) {
  const auto& n = nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) return 0;
  return 1 + std::max(subtree_depth(nodes, n.left), subtree_depth(nodes, n.right));
}

}  // namespace

std::size_t CartTree::depth() const { return nodes.empty() ? 0 : subtree_depth(nodes, 0); }

CartTree fit_cart(const DenseMatrix& x, std::span<const double> y, std::size_t max_depth,
                  std::size_t min_samples_leaf) {
  require_finite(x, y, "fit_cart");
  if (min_samples_leaf == 0) throw ConfigError("fit_cart: min_samples_leaf must be at least 1");
  CartBuilder b{x, y, max_depth, min_samples_leaf, {}};
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  b.grow(idx, 0);
  CartTree t;
  t.nodes = std::move(b.nodes);
  t.n_features = x.cols();
  t.max_depth = max_depth;
  t.min_samples_leaf = min_samples_leaf;
  return t;
}

// ---------------------------------------------------------------------------
// MLP

namespace {

struct MlpForward {
  DenseMatrix pre;     // n × hidden
  DenseMatrix hidden;  // relu(pre)
  DenseMatrix out;     // n × 1
};

MlpForward mlp_forward(const MlpModel& m, const DenseMatrix& x) {
  if (x.cols() != m.w1.cols()) {
    throw ShapeError("MLP expects " + std::to_string(m.w1.cols()) + " features, got " +
                     std::to_string(x.cols()));
  }
  MlpForward f;
  f.pre = matmul_bt(x, m.w1);
  for (std::size_t r = 0; r < f.pre.rows(); ++r) {
    auto row = f.pre.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += m.b1(0, c);
  }
  f.hidden = relu(f.pre);
  f.out = matmul_bt(f.hidden, m.w2);
  for (double& v : f.out.values()) v += m.b2;
  return f;
}

MlpModel mlp_backward(const MlpModel& m, const DenseMatrix& x, const MlpForward& f, const DenseMatrix& dout) {
  MlpModel g;
  g.w2 = matmul_at(dout, f.hidden);
  g.b2 = 0.0;
  for (double v : dout.values()) g.b2 += v;
  DenseMatrix dpre = relu_backward(f.pre, matmul(dout, m.w2));
  g.w1 = matmul_at(dpre, x);
  g.b1 = DenseMatrix(1, m.w1.rows());
  for (std::size_t r = 0; r < dpre.rows(); ++r) {
    auto row = dpre.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) g.b1(0, c) += row[c];
  }
  return g;
}

}  // namespace

MlpModel init_mlp(std::size_t input_dim, const MlpOptions& options) {
  if (input_dim == 0 || options.hidden == 0) throw ConfigError("MLP: zero input or hidden width");
  Rng rng(derive_seed(options.rng_seed, 0x3170));
  MlpModel m;
  m.w1 = DenseMatrix(options.hidden, input_dim);
  m.b1 = DenseMatrix(1, options.hidden);
  m.w2 = DenseMatrix(1, options.hidden);
  const double bound1 = std::sqrt(6.0 / static_cast<double>(input_dim + options.hidden));
  const double bound2 = std::sqrt(6.0 / static_cast<double>(options.hidden + 1));
  for (double& v : m.w1.values()) v = rng.uniform(-bound1, bound1);
  for (double& v : m.b1.values()) v = rng.uniform(-bound1, bound1);
  for (double& v : m.w2.values()) v = rng.uniform(-bound2, bound2);
  m.b2 = rng.uniform(-bound2, bound2);
  return m;
}

double mlp_loss(const MlpModel& model, const DenseMatrix& x, std::span<const double> y, MlpModel* grads) {
  if (x.rows() != y.size()) throw ShapeError("mlp_loss: row/target count mismatch");
  const auto f = mlp_forward(model, x);
  const auto lg = mse_loss(f.out, DenseMatrix::column(y));
  if (grads != nullptr) *grads = mlp_backward(model, x, f, lg.grad);
  return lg.loss;
}

MlpModel fit_mlp(const DenseMatrix& x, std::span<const double> y, const MlpOptions& options) {
  require_finite(x, y, "fit_mlp");
  if (options.batch_size == 0) throw ConfigError("fit_mlp: zero batch size");
  MlpModel m = init_mlp(x.cols(), options);
  if (options.epochs == 0) return m;

  const auto n = static_cast<double>(y.size());
  double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = var > 0.0 ? std::sqrt(var) : 1.0;

  Adam adam(AdamOptions{options.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    Rng rng(derive_seed(options.rng_seed, 0xe90c, epoch));
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      std::span<const std::size_t> rows(order.data() + start, stop - start);
      const DenseMatrix xb = gather_rows(x, rows);
      DenseMatrix yb(rows.size(), 1);
      for (std::size_t i = 0; i < rows.size(); ++i) yb(i, 0) = (y[rows[i]] - mean) / sd;
      const auto f = mlp_forward(m, xb);
      const auto lg = mse_loss(f.out, yb);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("fit_mlp: non-finite loss at epoch " + std::to_string(epoch));
      }
      MlpModel g = mlp_backward(m, xb, f, lg.grad);
      DenseMatrix b2(1, 1, m.b2);
      DenseMatrix gb2(1, 1, g.b2);
      std::vector<DenseMatrix*> ps{&m.w1, &m.b1, &m.w2, &b2};
      std::vector<const DenseMatrix*> gs{&g.w1, &g.b1, &g.w2, &gb2};
      adam.step(ps, gs);
      m.b2 = b2(0, 0);
    }
  }
  for (double& v : m.w2.values()) v *= sd;
  m.b2 = m.b2 * sd + mean;
  return m;
}

// ---------------------------------------------------------------------------
// Prediction and serialization

namespace {

struct Predictor {
  const DenseMatrix& x;

  std::vector<double> operator()(const LinearModel& m) const {
    if (x.cols() != m.coefficients.size()) {
      throw ShapeError("linear model expects " + std::to_string(m.coefficients.size()) + " features, got " +
                       std::to_string(x.cols()));
    }
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double s = m.intercept;
      for (std::size_t j = 0; j < x.cols(); ++j) s += m.coefficients[j] * x(r, j);
      out[r] = s;
    }
    return out;
  }

  std::vector<double> operator()(const CartTree& t) const {
    if (x.cols() != t.n_features) {
      throw ShapeError("tree expects " + std::to_string(t.n_features) + " features, got " +
                       std::to_string(x.cols()));
    }
    if (t.nodes.empty()) throw DataError("tree has no nodes");
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      std::size_t id = 0;
      while (!t.nodes[id].is_leaf()) {
        const auto& n = t.nodes[id];
        id = static_cast<std::size_t>(x(r, static_cast<std::size_t>(n.feature)) <= n.threshold ? n.left : n.right);
      }
      out[r] = t.nodes[id].value;
    }
    return out;
  }

  std::vector<double> operator()(const MlpModel& m) const {
    const auto f = mlp_forward(m, x);
    return {f.out.values().begin(), f.out.values().end()};
  }
};

std::string size_string(std::size_t v) { return v == kUnlimitedDepth ? "unlimited" : std::to_string(v); }

std::size_t parse_size(const std::string& s) {
  if (s == "unlimited") return kUnlimitedDepth;
  try {
    return std::stoul(s);
  } catch (const std::logic_error&) {
    throw DataError("parameter container: bad integer '" + s + "'");
  }
}

}  // namespace

std::vector<double> predict_baseline(const BaselineModel& model, const DenseMatrix& x) {
  return std::visit(Predictor{x}, model);
}

ParamContainer to_container(const BaselineModel& model) {
  ParamContainer c;
  if (const auto* lm = std::get_if<LinearModel>(&model)) {
    c.kind = "lr";
    c.matrices["coefficients"] = DenseMatrix(1, lm->coefficients.size(), lm->coefficients);
    c.matrices["intercept"] = DenseMatrix(1, 1, lm->intercept);
  } else if (const auto* t = std::get_if<CartTree>(&model)) {
    c.kind = "cart";
    c.meta["n_features"] = std::to_string(t->n_features);
    c.meta["max_depth"] = size_string(t->max_depth);
    c.meta["min_samples_leaf"] = std::to_string(t->min_samples_leaf);
    // One row per node: feature, threshold, left, right, value, n_samples.
    DenseMatrix nodes(t->nodes.size(), 6);
    for (std::size_t i = 0; i < t->nodes.size(); ++i) {
      const auto& n = t->nodes[i];
      nodes(i, 0) = n.feature;
      nodes(i, 1) = n.threshold;
      nodes(i, 2) = n.left;
      nodes(i, 3) = n.right;
      nodes(i, 4) = n.value;
      nodes(i, 5) = static_cast<double>(n.n_samples);
    }
    c.matrices["nodes"] = std::move(nodes);
  } else {
    const auto& m = std::get<MlpModel>(model);
    c.kind = "nn";
    c.matrices["w1"] = m.w1;
    c.matrices["b1"] = m.b1;
    c.matrices["w2"] = m.w2;
    c.matrices["b2"] = DenseMatrix(1, 1, m.b2);
  }
  return c;
}

BaselineModel baseline_from_container(const ParamContainer& c) {
  if (c.kind == "lr") {
    const auto& coef = c.matrix("coefficients");
    const auto& b = c.matrix("intercept");
    if (coef.rows() != 1 || b.size() != 1) throw ShapeError("lr container: bad shapes");
    return LinearModel{{coef.values().begin(), coef.values().end()}, b(0, 0)};
  }
  if (c.kind == "cart") {
    CartTree t;
    t.n_features = parse_size(c.meta_value("n_features"));
    t.max_depth = parse_size(c.meta_value("max_depth"));
    t.min_samples_leaf = parse_size(c.meta_value("min_samples_leaf"));
    const auto& nodes = c.matrix("nodes");
    if (nodes.cols() != 6 || nodes.rows() == 0) throw ShapeError("cart container: nodes must be Nx6");
    const auto n = static_cast<double>(nodes.rows());
    for (std::size_t i = 0; i < nodes.rows(); ++i) {
      CartNode node;
      node.feature = static_cast<std::int32_t>(nodes(i, 0));
      node.threshold = nodes(i, 1);
      node.left = static_cast<std::int32_t>(nodes(i, 2));
      node.right = static_cast<std::int32_t>(nodes(i, 3));
      node.value = nodes(i, 4);
      node.n_samples = static_cast<std::size_t>(nodes(i, 5));
      const bool leaf = node.left == CartNode::kLeaf;
      if (!leaf && (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n ||
                    node.feature < 0 || static_cast<std::size_t>(node.feature) >= t.n_features)) {
        throw ShapeError("cart container: node " + std::to_string(i) + " references out-of-range data");
      }
      t.nodes.push_back(node);
    }
    return t;
  }
  if (c.kind == "nn") {
    MlpModel m;
    m.w1 = c.matrix("w1");
    m.b1 = c.matrix("b1");
    m.w2 = c.matrix("w2");
    const auto& b2 = c.matrix("b2");
    if (m.b1.rows() != 1 || m.b1.cols() != m.w1.rows() || m.w2.rows() != 1 || m.w2.cols() != m.w1.rows() ||
        b2.size() != 1) {
      throw ShapeError("nn container: inconsistent layer shapes");
    }
    m.b2 = b2(0, 0);
    return m;
  }
  throw DataError("unknown baseline container kind '" + c.kind + "'");
}

}  // namespace pavesage
