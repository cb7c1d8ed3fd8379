#include "pavesage/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "pavesage/baselines.hpp"
#include "pavesage/matrix.hpp"
#include "pavesage/rng.hpp"
#include "pavesage/sage.hpp"

namespace pavesage {

namespace {

constexpr double kStep = 1e-5;
constexpr double kKinkMargin = 1e-4;

DenseMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

double weighted_sum(const DenseMatrix& c, const DenseMatrix& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.values().size(); ++i) s += c.values()[i] * y.values()[i];
  return s;
}

bool clear_of_kink(const DenseMatrix& pre) {
  return std::all_of(pre.values().begin(), pre.values().end(),
                     [](double v) { return std::abs(v) >= kKinkMargin; });
}

RoadGraph random_graph(Rng& rng, std::size_t n) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId v = 1; v < n; ++v) edges.emplace_back(static_cast<NodeId>(rng.index(v)), v);
  for (std::size_t extra = rng.index(4); extra > 0; --extra) {
    edges.emplace_back(static_cast<NodeId>(rng.index(n)), static_cast<NodeId>(rng.index(n)));
  }
  return RoadGraph::from_edges(n, edges);
}

struct Tracker {
  std::vector<GradSuiteEntry> entries;

  void record(const std::string& name, double err) {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.name == name; });
    if (it == entries.end()) it = entries.insert(entries.end(), GradSuiteEntry{name, 0.0, 0});
    it->max_rel_error = std::max(it->max_rel_error, err);
    ++it->points;
  }
  void check(const std::string& name, const ScalarFunction& f, const DenseMatrix& at) {
    record(name, grad_check(f, at, kStep).max_rel_error);
  }
};

void primitive_point(Tracker& t, Rng& rng) {
  const std::size_t m = 2 + rng.index(4), k = 2 + rng.index(4), n = 2 + rng.index(4);
  const DenseMatrix a = random_matrix(rng, m, k);
  const DenseMatrix b = random_matrix(rng, k, n);
  const DenseMatrix bt = random_matrix(rng, n, k);
  const DenseMatrix c_mn = random_matrix(rng, m, n);

  t.check("matmul/a", [&](const DenseMatrix& x, DenseMatrix* g) {
    if (g) *g = matmul_bt(c_mn, b);
    return weighted_sum(c_mn, matmul(x, b));
  }, a);
  t.check("matmul/b", [&](const DenseMatrix& x, DenseMatrix* g) {
    if (g) *g = matmul_at(a, c_mn);
    return weighted_sum(c_mn, matmul(a, x));
  }, b);
  t.check("matmul_bt/a", [&](const DenseMatrix& x, DenseMatrix* g) {
    if (g) *g = matmul(c_mn, bt);
    return weighted_sum(c_mn, matmul_bt(x, bt));
  }, a);
  t.check("matmul_bt/b", [&](const DenseMatrix& x, DenseMatrix* g) {
    if (g) *g = matmul_at(c_mn, a);
    return weighted_sum(c_mn, matmul_bt(a, x));
  }, bt);

  DenseMatrix z = random_matrix(rng, m, k, -2.0, 2.0);
  while (!clear_of_kink(z)) z = random_matrix(rng, m, k, -2.0, 2.0);
  const DenseMatrix c_mk = random_matrix(rng, m, k);
  t.check("relu", [&](const DenseMatrix& x, DenseMatrix* g) {
    if (g) *g = relu_backward(x, c_mk);
    return weighted_sum(c_mk, relu(x));
  }, z);

  const DenseMatrix right = random_matrix(rng, m, n);
  const DenseMatrix c_cat = random_matrix(rng, m, k + n);
  t.check("concat_cols", [&](const DenseMatrix& x, DenseMatrix* g) {
    if (g) *g = split_cols(c_cat, k).first;
    return weighted_sum(c_cat, concat_cols(x, right));
  }, a);

  std::vector<std::vector<std::size_t>> groups(3);
  for (auto& grp : groups)
    for (std::size_t j = rng.index(4); j > 0; --j) grp.push_back(rng.index(m));
  const DenseMatrix c_g = random_matrix(rng, groups.size(), k);
  t.check("mean_rows", [&](const DenseMatrix& x, DenseMatrix* g) {
    if (g) *g = mean_rows_backward(c_g, groups, m);
    return weighted_sum(c_g, mean_rows(x, groups));
  }, a);

  std::vector<std::size_t> index;
  for (std::size_t j = 1 + rng.index(6); j > 0; --j) index.push_back(rng.index(m));
  const DenseMatrix c_i = random_matrix(rng, index.size(), k);
  t.check("gather_rows", [&](const DenseMatrix& x, DenseMatrix* g) {
    if (g) *g = gather_rows_backward(c_i, index, m);
    return weighted_sum(c_i, gather_rows(x, index));
  }, a);

  const DenseMatrix target = random_matrix(rng, m, k);
  t.check("mse_loss", [&](const DenseMatrix& x, DenseMatrix* g) {
    LossGrad lg = mse_loss(x, target);
    if (g) *g = std::move(lg.grad);
    return lg.loss;
  }, a);
}

void sage_point(Tracker& t, Rng& rng, bool include_self) {
  constexpr std::size_t kNodes = 10;
  constexpr std::size_t kDim = 6;
  const RoadGraph graph = random_graph(rng, kNodes);
  const DenseMatrix features = random_matrix(rng, kNodes, kDim, -1.5, 1.5);
  std::vector<double> targets(kNodes);
  for (double& y : targets) y = rng.normal();
  std::vector<NodeId> nodes(kNodes);
  for (NodeId v = 0; v < kNodes; ++v) nodes[v] = v;

  SageConfig cfg;
  cfg.hidden_dims = {5, 4};
  cfg.mean_includes_self = include_self;
  SageParams params;
  for (;;) {
    cfg.rng_seed = rng.next();
    params = init_params(kDim, cfg);
    params.head_b = rng.normal();
    DenseMatrix h = features;
    bool ok = true;
    for (const auto& w : params.weights) {
      const DenseMatrix pre = matmul_bt(concat_cols(h, aggregate(graph, h, include_self)), w);
      ok = ok && clear_of_kink(pre);
      h = relu(pre);
    }
    if (ok) break;
  }

  auto loss_with = [&](auto&& assign, auto&& pick) -> ScalarFunction {
    return [&, assign, pick](const DenseMatrix& x, DenseMatrix* g) {
      SageParams p = params;
      assign(p, x);
      SageGradients grads;
      const double loss = sage_loss(graph, features, p, targets, nodes, g ? &grads : nullptr);
      if (g) *g = pick(grads);
      return loss;
    };
  };
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    t.check("sage/W" + std::to_string(k),
            loss_with([k](SageParams& p, const DenseMatrix& x) { p.weights[k] = x; },
                      [k](SageGradients& g) { return g.weights[k]; }),
            params.weights[k]);
  }
  t.check("sage/head_w",
          loss_with([](SageParams& p, const DenseMatrix& x) { p.head_w = x; },
                    [](SageGradients& g) { return g.head_w; }),
          params.head_w);
  t.check("sage/head_b",
          loss_with([](SageParams& p, const DenseMatrix& x) { p.head_b = x(0, 0); },
                    [](SageGradients& g) { return DenseMatrix(1, 1, g.head_b); }),
          DenseMatrix(1, 1, params.head_b));
}

void mlp_point(Tracker& t, Rng& rng) {
  constexpr std::size_t kRows = 8;
  constexpr std::size_t kDim = 4;
  const DenseMatrix x = random_matrix(rng, kRows, kDim, -1.5, 1.5);
  std::vector<double> y(kRows);
  for (double& v : y) v = rng.normal();
  MlpOptions opt;
  opt.hidden = 6;
  MlpModel model;
  for (;;) {
    opt.rng_seed = rng.next();
    model = init_mlp(kDim, opt);
    DenseMatrix pre = matmul_bt(x, model.w1);
    for (std::size_t r = 0; r < pre.rows(); ++r)
      for (std::size_t c = 0; c < pre.cols(); ++c) pre(r, c) += model.b1(0, c);
    if (clear_of_kink(pre)) break;
  }
  auto check = [&](const std::string& name, DenseMatrix MlpModel::*field) {
    t.check(name, [&, field](const DenseMatrix& p, DenseMatrix* g) {
      MlpModel m = model;
      m.*field = p;
      MlpModel grads;
      const double loss = mlp_loss(m, x, y, g ? &grads : nullptr);
      if (g) *g = grads.*field;
      return loss;
    }, model.*field);
  };
  check("nn/w1", &MlpModel::w1);
  check("nn/b1", &MlpModel::b1);
  check("nn/w2", &MlpModel::w2);
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::size_t n_points, std::uint64_t seed) {
  Tracker t;
  Rng rng(derive_seed(seed, 0x9c4ec));
  for (std::size_t i = 0; i < n_points; ++i) {
    primitive_point(t, rng);
    sage_point(t, rng, i % 2 == 1);
    mlp_point(t, rng);
  }
  return t.entries;
}

}  // namespace pavesage
