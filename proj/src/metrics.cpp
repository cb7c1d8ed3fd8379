#include "pavesage/metrics.hpp"

#include <cmath>
#include <string>

#include "pavesage/error.hpp"

namespace pavesage {

double r2_score(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw MetricError("r2_score: " + std::to_string(y_true.size()) + " targets vs " +
                      std::to_string(y_pred.size()) + " predictions");
  }
  if (y_true.size() < 2) throw MetricError("r2_score: needs at least two values");
  double mean = 0.0;
  for (double y : y_true) mean += y;
  mean /= static_cast<double>(y_true.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double r = y_true[i] - y_pred[i];
    const double d = y_true[i] - mean;
    ss_res += r * r;
    ss_tot += d * d;
  }
  if (ss_tot == 0.0) throw MetricError("r2_score: undefined for a target with zero variance");
  return 1.0 - ss_res / ss_tot;
}

ErrorMoments mse_mae(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty()) {
    throw MetricError("mse_mae: needs equal, non-zero lengths");
  }
  ErrorMoments out;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - y_pred[i];
    out.mse += d * d;
    out.mae += std::abs(d);
  }
  const auto n = static_cast<double>(y_true.size());
  out.mse /= n;
  out.mae /= n;
  return out;
}

Metrics evaluate_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
  const auto m = mse_mae(y_true, y_pred);
  return {r2_score(y_true, y_pred), m.mse, m.mae};
}

}  // namespace pavesage
