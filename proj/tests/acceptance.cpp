// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pavesage/baselines.hpp"
#include "pavesage/experiment.hpp"
#include "pavesage/error.hpp"
#include "pavesage/gradcheck.hpp"
#include "pavesage/metrics.hpp"
#include "pavesage/records.hpp"
#include "pavesage/sage.hpp"
#include "pavesage/synthetic.hpp"
#include "support.hpp"

using namespace pavesage;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1 -------------------------------------------------------------------------
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto entries = run_gradient_suite(100, 2024);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  bool complete = true;
  for (const auto& e : entries) {
    complete = complete && e.points == 100;
    if (e.max_rel_error >= worst) {
      worst = e.max_rel_error;
      worst_name = e.name;
    }
  }
  const bool has_model = std::ranges::any_of(entries, [](const auto& e) { return e.name == "sage/W1"; }) &&
                         std::ranges::any_of(entries, [](const auto& e) { return e.name == "sage/head_w"; });
  return {complete && has_model && worst <= 1e-4 && secs <= 30.0,
          std::to_string(entries.size()) + " checks x 100 points, max rel error " + fmt("%.2e", worst) + " (" +
              worst_name + "), " + fmt("%.1fs", secs)};
}

// 2 -------------------------------------------------------------------------
Outcome sampling_oracle() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(2024, 2));
  double worst = 0.0;
  std::size_t preds = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(200);
    const auto g = testsupport::random_graph(rng, n, 1.5);
    const std::size_t d = 1 + rng.index(12);
    const auto x = testsupport::random_matrix(rng, n, d, -2.0, 2.0);
    SageConfig cfg;
    cfg.hidden_dims = {1 + rng.index(32), 1 + rng.index(32)};
    cfg.rng_seed = rng.next();
    cfg.mean_includes_self = trial % 2 == 1;
    const auto p = init_params(d, cfg);
    const auto full = forward_full(g, x, p);
    std::vector<NodeId> batch;
    for (NodeId v = 0; v < n; ++v)
      if (rng.uniform() < 0.5) batch.push_back(v);
    if (batch.empty()) batch.push_back(static_cast<NodeId>(rng.index(n)));
    rng.shuffle(batch.begin(), batch.end());
    // Fanouts at or above the maximum degree saturate just like the sentinel.
    std::size_t max_deg = 0;
    for (NodeId v = 0; v < n; ++v) max_deg = std::max(max_deg, g.degree(v));
    const std::vector<std::size_t> fan = trial % 3 == 0 ? std::vector<std::size_t>{kAllNeighbors, kAllNeighbors}
                                                        : std::vector<std::size_t>{max_deg, max_deg + 3};
    const auto sampled = forward_sampled(g, x, p, batch, fan, rng.next());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      worst = std::max(worst, std::abs(sampled(i, 0) - full(batch[i], 0)));
      ++preds;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs <= 30.0, "50 graphs, " + std::to_string(preds) + " predictions, max |diff| " +
                                              fmt("%.2e", worst) + ", " + fmt("%.1fs", secs)};
}

// 3 -------------------------------------------------------------------------
Outcome graph_oracle() {
  Rng rng(derive_seed(2024, 3));
  std::size_t mismatches = 0, edges = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto table = testsupport::random_marker_table(rng, 1 + rng.index(100));
    const auto built = build_graph(table).edges();
    const std::set<std::pair<NodeId, NodeId>> got(built.begin(), built.end());
    const auto want = testsupport::brute_force_edges(table);
    edges += want.size();
    if (got != want || got.size() != built.size()) ++mismatches;
  }
  return {mismatches == 0, "100 tables, " + std::to_string(edges) + " oracle edges, " +
                               std::to_string(mismatches) + " mismatching tables"};
}

// 4 -------------------------------------------------------------------------
Outcome locality() {
  Rng rng(derive_seed(2024, 4));
  std::size_t checked = 0, violations = 0, sensitive = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testsupport::path_with_branches(rng, 15 + rng.index(30), 3 + rng.index(8));
    const std::size_t n = g.n_nodes();
    const auto x = testsupport::random_matrix(rng, n, 5);
    SageConfig cfg;
    cfg.hidden_dims = {16, 16};
    cfg.rng_seed = rng.next();
    const auto p = init_params(5, cfg);
    const auto base = forward_full(g, x, p);
    for (NodeId t = 0; t < n; ++t) {
      auto xp = x;
      for (std::size_t c = 0; c < 5; ++c) xp(t, c) += rng.normal() * 5.0;
      const auto moved = forward_full(g, xp, p);
      const auto dist = testsupport::bfs_distances(g, t);
      for (NodeId v = 0; v < n; ++v) {
        if (v == t) continue;
        if (dist[v] >= 3) {
          ++checked;
          if (moved(v, 0) != base(v, 0)) ++violations;
        } else if (moved(v, 0) != base(v, 0)) {
          ++sensitive;
        }
      }
    }
  }
  return {violations == 0 && checked > 0, "20 graphs, " + std::to_string(checked) + " far pairs, " +
                                              std::to_string(violations) + " changed (" + std::to_string(sensitive) +
                                              " near pairs did change)"};
}

// 5 and 9 share the GraphSAGE runs ---------------------------------------------
struct ClaimRun {
  double sage_r2 = 0.0;
  double lr_r2 = 0.0;
  std::vector<EpochRecord> history;
};

ClaimRun claim_run(double rho, std::uint64_t seed) {
  SyntheticOptions so;
  so.n_nodes = 2000;
  so.n_routes = 40;
  so.rho = rho;
  so.seed = seed;
  const auto data = generate_synthetic(so);
  ExperimentConfig cfg;  // library defaults: K=2, 256 hidden, fanouts 25,10, 400 epochs, patience 50
  cfg.master_seed = seed;
  const std::vector<Indicator> inds{Indicator::Iri};
  const std::vector<ModelKind> models{ModelKind::Lr, ModelKind::Sage};
  const auto report = run_experiment(prepare_datasets(data.records, inds, cfg), models, cfg);
  ClaimRun out;
  const auto& lr = report.cell(Indicator::Iri, ModelKind::Lr);
  const auto& sage = report.cell(Indicator::Iri, ModelKind::Sage);
  if (!lr.metrics || !sage.metrics) throw std::runtime_error("claim run failed: " + lr.error + sage.error);
  out.lr_r2 = lr.metrics->r2;
  out.sage_r2 = sage.metrics->r2;
  out.history = report.history.at(Indicator::Iri);
  return out;
}

constexpr std::uint64_t kClaimSeeds[] = {1, 2, 3, 4, 5};

Outcome central_claim(std::vector<EpochRecord>& first_history) {
  const auto t0 = Clock::now();
  std::string detail;
  double gaps[2] = {0.0, 0.0};
  const double rhos[2] = {0.8, 0.0};
  for (int i = 0; i < 2; ++i) {
    std::vector<double> sage, lr;
    for (auto seed : kClaimSeeds) {
      auto run = claim_run(rhos[i], seed);
      sage.push_back(run.sage_r2);
      lr.push_back(run.lr_r2);
      if (i == 0 && first_history.empty()) first_history = std::move(run.history);
      std::printf("  rho=%.1f seed=%llu  sage r2=%.4f  lr r2=%.4f\n", rhos[i], static_cast<unsigned long long>(seed),
                  sage.back(), lr.back());
    }
    gaps[i] = median(sage) - median(lr);
    detail += fmt("rho=%.1f: ", rhos[i]) + fmt("median sage %.4f", median(sage)) + fmt(" vs lr %.4f", median(lr)) +
              fmt(" (gap %+.4f); ", gaps[i]);
  }
  const double secs = seconds_since(t0);
  detail += fmt("%.0fs", secs);
  return {gaps[0] >= 0.05 && std::abs(gaps[1]) <= 0.05 && secs <= 600.0, detail};
}

// 6 -------------------------------------------------------------------------
Outcome baseline_correctness() {
  Rng rng(derive_seed(2024, 6));
  double lr_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50 + rng.index(150), d = 1 + rng.index(8);
    const auto x = testsupport::random_matrix(rng, n, d, -3.0, 3.0);
    std::vector<double> beta(d);
    for (double& b : beta) b = rng.uniform(-5.0, 5.0);
    const double b0 = rng.uniform(-10.0, 10.0);
    std::vector<double> y(n, b0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) y[i] += beta[j] * x(i, j);
    const auto m = fit_linear(x, y);
    for (std::size_t j = 0; j < d; ++j) lr_err = std::max(lr_err, std::abs(m.coefficients[j] - beta[j]));
    lr_err = std::max(lr_err, std::abs(m.intercept - b0));
  }

  double cart_mse = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + rng.index(200);
    const auto x = testsupport::random_matrix(rng, n, 1 + rng.index(5));
    std::vector<double> y(n);
    for (double& v : y) v = rng.normal();
    const auto pred = predict_baseline(fit_cart(x, y), x);
    for (std::size_t i = 0; i < n; ++i) cart_mse = std::max(cart_mse, (pred[i] - y[i]) * (pred[i] - y[i]));
  }

  std::size_t oracle_mismatch = 0;
  for (int trial = 0; trial < 50; ++trial) {
    DenseMatrix x(30, 1 + rng.index(4));
    for (double& v : x.values()) v = std::round(rng.uniform(-2.0, 2.0) * 10.0) / 10.0;
    std::vector<double> y(30);
    for (std::size_t i = 0; i < 30; ++i) y[i] = 3.0 * (x(i, 0) > 0.3) + rng.normal();
    std::vector<std::size_t> rows(30);
    std::iota(rows.begin(), rows.end(), 0);
    if (!testsupport::same_tree(fit_cart(x, y, 2), 0, *testsupport::oracle_tree(x, y, rows, 2))) ++oracle_mismatch;
  }
  return {lr_err <= 1e-6 && cart_mse == 0.0 && oracle_mismatch == 0,
          "LR max param error " + fmt("%.2e", lr_err) + ", CART max train sq error " + fmt("%.1e", cart_mse) + ", " +
              std::to_string(oracle_mismatch) + "/50 depth-2 oracle mismatches"};
}

// 7 -------------------------------------------------------------------------
Outcome metric_correctness() {
  double err = 0.0;
  const std::vector<double> y{0, 1, 2};
  err = std::max(err, std::abs(r2_score(y, std::vector<double>{2, 2, 2}) + 1.5));
  err = std::max(err, std::abs(r2_score(y, y) - 1.0));
  const auto one = mse_mae(std::vector<double>{0}, std::vector<double>{3});
  err = std::max({err, std::abs(one.mse - 9.0), std::abs(one.mae - 3.0)});
  const auto same = mse_mae(y, y);
  err = std::max({err, same.mse, same.mae});
  bool zero_var_raises = false;
  try {
    r2_score(std::vector<double>{4, 4}, std::vector<double>{4, 5});
  } catch (const MetricError&) {
    zero_var_raises = true;
  }
  Rng rng(derive_seed(2024, 7));
  double mean_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.index(500);
    std::vector<double> v(n);
    for (double& a : v) a = rng.normal() * rng.uniform(0.1, 100.0) + rng.uniform(-1e3, 1e3);
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    if (*std::max_element(v.begin(), v.end()) == *std::min_element(v.begin(), v.end())) continue;
    mean_err = std::max(mean_err, std::abs(r2_score(v, std::vector<double>(n, m))));
  }
  return {err <= 1e-12 && mean_err <= 1e-12 && zero_var_raises,
          "worked examples max error " + fmt("%.1e", err) + ", mean-predictor |r2| max " + fmt("%.1e", mean_err)};
}

// 8 -------------------------------------------------------------------------
std::map<std::string, std::string> read_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

Outcome determinism() {
  SyntheticOptions so;
  so.n_nodes = 400;
  so.n_routes = 8;
  so.seed = 8;
  const auto records = generate_synthetic(so).records;
  const std::vector<Indicator> inds{Indicator::Iri, Indicator::AlligatorCracking, Indicator::ConditionScore};
  const auto base = std::filesystem::temp_directory_path() / "pavesage_acceptance";
  std::filesystem::remove_all(base);

  auto compare_once = [&](std::size_t jobs, const std::string& name) {
    ExperimentConfig cfg;
    cfg.master_seed = 77;
    cfg.jobs = jobs;
    cfg.sage.epochs = 30;
    const auto report = run_experiment(prepare_datasets(records, inds, cfg), all_models(), cfg);
    emit_report(report, base / name);
    return read_dir(base / name);
  };
  const auto a = compare_once(1, "serial_a");
  const auto b = compare_once(1, "serial_b");
  const auto c = compare_once(4, "parallel");
  std::filesystem::remove_all(base);
  return {a == b && a == c && a.size() == 5,
          std::to_string(a.size()) + " files; serial rerun " + (a == b ? "identical" : "DIFFERS") +
              ", 4-way parallel " + (a == c ? "identical" : "DIFFERS")};
}

// 9 -------------------------------------------------------------------------
Outcome history_shape(const std::vector<EpochRecord>& h) {
  if (h.empty()) return {false, "no history recorded"};
  std::vector<double> running;
  double best = -std::numeric_limits<double>::infinity();
  bool finite = true;
  for (const auto& r : h) {
    finite = finite && std::isfinite(r.test_r2);
    best = std::max(best, r.test_r2);
    running.push_back(best);
  }
  const bool monotone = std::is_sorted(running.begin(), running.end());
  const std::size_t n = running.size();
  const bool long_enough = n >= 50;
  const double tail_change = long_enough ? running[n - 1] - running[n - 50] : INFINITY;
  double raw_lo = INFINITY, raw_hi = -INFINITY;
  for (std::size_t i = n >= 50 ? n - 50 : 0; i < n; ++i) {
    raw_lo = std::min(raw_lo, h[i].test_r2);
    raw_hi = std::max(raw_hi, h[i].test_r2);
  }
  return {finite && monotone && long_enough && tail_change <= 0.005 && n <= 800,
          std::to_string(n) + " epochs, best test r2 " + fmt("%.4f", best) + ", running-max change over last 50 " +
              fmt("%.4f", tail_change) + " (raw test r2 spread there " + fmt("%.4f", raw_hi - raw_lo) + ")"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  std::vector<EpochRecord> history;
  report(1, "gradient suite", gradient_suite);
  report(2, "sampling oracle", sampling_oracle);
  report(3, "graph-construction oracle", graph_oracle);
  report(4, "two-hop locality", locality);
  report(5, "spatial advantage over LR", [&] { return central_claim(history); });
  report(6, "baseline correctness", baseline_correctness);
  report(7, "metric correctness", metric_correctness);
  report(8, "report determinism", determinism);
  report(9, "training-history shape", [&] { return history_shape(history); });
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
