#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "pavesage/baselines.hpp"
#include "pavesage/error.hpp"
#include "pavesage/param_io.hpp"
#include "support.hpp"

using namespace pavesage;
using testsupport::random_matrix;

namespace {

double training_mse(const BaselineModel& m, const DenseMatrix& x, std::span<const double> y) {
  const auto p = predict_baseline(m, x);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (p[i] - y[i]) * (p[i] - y[i]);
  return s / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("fit_linear recovers exact lines") {
  DenseMatrix x(20, 1);
  std::vector<double> y(20), c(20, 4.25);
  for (std::size_t i = 0; i < 20; ++i) {
    x(i, 0) = static_cast<double>(i) - 7.5;
    y[i] = 3.0 * x(i, 0) + 1.0;
  }
  const auto m = fit_linear(x, y);
  CHECK(std::abs(m.coefficients[0] - 3.0) <= 1e-6);
  CHECK(std::abs(m.intercept - 1.0) <= 1e-6);
  const auto k = fit_linear(x, c);
  CHECK(std::abs(k.coefficients[0]) <= 1e-6);
  CHECK(std::abs(k.intercept - 4.25) <= 1e-6);
}

TEST_CASE("fit_linear satisfies the normal equations") {
  Rng rng(13);
  const auto x = random_matrix(rng, 200, 5, -2.0, 2.0);
  std::vector<double> y(200);
  double norm = 0.0;
  for (double& v : y) {
    v = 5.0 * rng.normal() + 2.0;
    norm += v * v;
  }
  norm = std::sqrt(norm);
  const auto m = fit_linear(x, y);
  std::vector<double> resid(200);
  for (std::size_t i = 0; i < 200; ++i) {
    double p = m.intercept;
    for (std::size_t j = 0; j < 5; ++j) p += m.coefficients[j] * x(i, j);
    resid[i] = p - y[i];
  }
  for (std::size_t j = 0; j <= 5; ++j) {
    double g = 0.0;
    for (std::size_t i = 0; i < 200; ++i) g += (j < 5 ? x(i, j) : 1.0) * resid[i];
    CHECK(std::abs(g) <= 1e-6 * norm);
  }
}

TEST_CASE("fit_linear rejects non-finite data") {
  DenseMatrix x(3, 1, 1.0);
  x(1, 0) = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> y{1, 2, 3};
  CHECK_THROWS_AS(fit_linear(x, y), DataError);
  CHECK_THROWS_AS(fit_linear(DenseMatrix(2, 1), y), ShapeError);
}

TEST_CASE("predict_baseline simple cases") {
  LinearModel lm{{2.0}, 1.0};
  CHECK(predict_baseline(lm, DenseMatrix(1, 1, 3.0)).at(0) == 7.0);
  CHECK_THROWS_AS(predict_baseline(lm, DenseMatrix(1, 2)), ShapeError);

  CartTree leaf;
  leaf.n_features = 3;
  leaf.nodes = {CartNode{CartNode::kLeaf, 0.0, CartNode::kLeaf, CartNode::kLeaf, 5.0, 1}};
  Rng rng(1);
  for (double v : predict_baseline(leaf, random_matrix(rng, 4, 3))) CHECK(v == 5.0);

  // x0 <= 0 ? (x1 <= 0 ? 1 : 2) : (x1 <= 0 ? 3 : 4)
  CartTree quad;
  quad.n_features = 2;
  quad.nodes = {CartNode{0, 0.0, 1, 2, 0.0, 4},       CartNode{1, 0.0, 3, 4, 0.0, 2},
                CartNode{1, 0.0, 5, 6, 0.0, 2},       CartNode{CartNode::kLeaf, 0, -1, -1, 1.0, 1},
                CartNode{CartNode::kLeaf, 0, -1, -1, 2.0, 1}, CartNode{CartNode::kLeaf, 0, -1, -1, 3.0, 1},
                CartNode{CartNode::kLeaf, 0, -1, -1, 4.0, 1}};
  const auto q = predict_baseline(quad, DenseMatrix::from_rows({{-1, -1}, {-1, 1}, {1, -1}, {1, 1}, {0, 0}}));
  CHECK(q == std::vector<double>{1, 2, 3, 4, 1});
}

TEST_CASE("cart degenerate and separable data") {
  const std::vector<double> one{9.5};
  const auto single = fit_cart(DenseMatrix(1, 2, 0.3), one);
  REQUIRE(single.nodes.size() == 1);
  CHECK(single.nodes[0].value == 9.5);

  DenseMatrix x(10, 1);
  std::vector<double> y(10);
  for (std::size_t i = 0; i < 10; ++i) {
    x(i, 0) = static_cast<double>(i) - 4.5;
    y[i] = x(i, 0) > 0.0 ? 1.0 : 0.0;
  }
  const auto step = fit_cart(x, y);
  CHECK(training_mse(step, x, y) == 0.0);
  CHECK(step.depth() == 1);
  CHECK(step.nodes[0].threshold == 0.0);
}

TEST_CASE("cart reaches zero training error on distinct rows") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_matrix(rng, 80, 4);
    std::vector<double> y(80);
    for (double& v : y) v = rng.normal();
    CHECK(training_mse(fit_cart(x, y), x, y) == 0.0);
  }
}

TEST_CASE("cart training error is non-increasing in depth") {
  Rng rng(29);
  const auto x = random_matrix(rng, 120, 3);
  std::vector<double> y(120);
  for (std::size_t i = 0; i < 120; ++i) y[i] = std::sin(3 * x(i, 0)) + x(i, 1) * x(i, 2) + 0.1 * rng.normal();
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d <= 10; ++d) {
    const auto t = fit_cart(x, y, d);
    CHECK(t.depth() <= d);
    const double mse = training_mse(t, x, y);
    CHECK(mse <= prev);
    prev = mse;
  }
}

TEST_CASE("cart matches the exhaustive depth-2 oracle") {
  Rng rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    DenseMatrix x(30, 3);
    // One decimal so repeated values (and so midpoint handling) occur.
    for (double& v : x.values()) v = std::round(rng.uniform(-2.0, 2.0) * 10.0) / 10.0;
    std::vector<double> y(30);
    for (std::size_t i = 0; i < 30; ++i) y[i] = x(i, trial % 3) > 0.0 ? 2.0 + rng.normal() : rng.normal();
    const auto tree = fit_cart(x, y, 2);
    std::vector<std::size_t> rows(30);
    std::iota(rows.begin(), rows.end(), 0);
    CHECK(testsupport::same_tree(tree, 0, *testsupport::oracle_tree(x, y, rows, 2)));
  }
}

TEST_CASE("cart tie-breaking prefers the lowest feature") {
  // Both columns separate y identically.
  const auto x = DenseMatrix::from_rows({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  const std::vector<double> y{0, 0, 1, 1};
  const auto t = fit_cart(x, y);
  CHECK(t.nodes[0].feature == 0);
  CHECK(t.nodes[0].threshold == 1.5);
}

TEST_CASE("cart respects min_samples_leaf") {
  Rng rng(41);
  const auto x = random_matrix(rng, 50, 2);
  std::vector<double> y(50);
  for (double& v : y) v = rng.normal();
  const auto t = fit_cart(x, y, kUnlimitedDepth, 5);
  for (const auto& n : t.nodes)
    if (n.is_leaf()) CHECK(n.n_samples >= 5);
}

TEST_CASE("mlp behaviour") {
  Rng rng(43);
  DenseMatrix x(200, 1);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    x(i, 0) = rng.uniform(-1.0, 1.0);
    y[i] = 2.0 * x(i, 0);
  }
  MlpOptions opt;
  opt.rng_seed = 3;
  opt.epochs = 0;
  const auto init = fit_mlp(x, y, opt);
  CHECK(predict_baseline(init, x) == predict_baseline(init_mlp(1, opt), x));

  opt.epochs = 300;
  opt.batch_size = 32;
  const auto fit = fit_mlp(x, y, opt);
  DenseMatrix xt(100, 1);
  std::vector<double> yt(100);
  for (std::size_t i = 0; i < 100; ++i) {
    xt(i, 0) = rng.uniform(-1.0, 1.0);
    yt[i] = 2.0 * xt(i, 0);
  }
  double var = 0.0, mean = std::accumulate(yt.begin(), yt.end(), 0.0) / 100.0;
  for (double v : yt) var += (v - mean) * (v - mean) / 100.0;
  CHECK(training_mse(fit, xt, yt) <= 0.05 * var);
  CHECK(fit_mlp(x, y, opt) == fit);
}

TEST_CASE("mlp loss gradient") {
  Rng rng(47);
  const auto x = random_matrix(rng, 10, 3);
  std::vector<double> y(10);
  for (double& v : y) v = rng.normal();
  MlpOptions opt;
  opt.hidden = 7;
  const auto model = init_mlp(3, opt);
  auto f = [&](const DenseMatrix& w1, DenseMatrix* g) {
    MlpModel m = model;
    m.w1 = w1;
    MlpModel grads;
    const double loss = mlp_loss(m, x, y, g ? &grads : nullptr);
    if (g) *g = grads.w1;
    return loss;
  };
  CHECK(grad_check(f, model.w1).max_rel_error <= 1e-4);
}

TEST_CASE("baseline containers round-trip") {
  Rng rng(53);
  const auto x = random_matrix(rng, 40, 3);
  std::vector<double> y(40);
  for (double& v : y) v = rng.normal();
  MlpOptions opt;
  opt.epochs = 3;
  const std::vector<BaselineModel> models{fit_linear(x, y), fit_cart(x, y, 4), fit_mlp(x, y, opt)};
  for (const auto& m : models) {
    const auto back = baseline_from_container(deserialize(serialize(to_container(m))));
    CHECK(back == m);
    CHECK(predict_baseline(back, x) == predict_baseline(m, x));
  }
  ParamContainer wrong;
  wrong.kind = "sage";
  CHECK_THROWS(baseline_from_container(wrong));
}
