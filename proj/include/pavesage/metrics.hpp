#pragma once

#include <span>

namespace pavesage {

/// Test-split regression metrics. r2 may be negative.
struct Metrics {
  double r2 = 0.0;
  double mse = 0.0;
  double mae = 0.0;
};

/// 1 − Σ(y − ŷ)² / Σ(y − ȳ)². Throws MetricError for fewer than two values,
/// mismatched lengths, or zero variance in y_true.
double r2_score(std::span<const double> y_true, std::span<const double> y_pred);

struct ErrorMoments {
  double mse = 0.0;
  double mae = 0.0;
};

ErrorMoments mse_mae(std::span<const double> y_true, std::span<const double> y_pred);

Metrics evaluate_metrics(std::span<const double> y_true, std::span<const double> y_pred);

}  // namespace pavesage
