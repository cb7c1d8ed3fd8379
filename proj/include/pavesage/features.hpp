#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pavesage/graph.hpp"
#include "pavesage/matrix.hpp"
#include "pavesage/records.hpp"

namespace pavesage {

enum class TreatmentEncoding {
  Level,         // one dummy per treatment level (PM, LR, MR, HR)
  PerTreatment,  // one dummy per individual treatment
};

enum class ColumnKind { Numeric, OneHot, TreatmentDummy };

struct FeatureColumn {
  std::string name;
  ColumnKind kind;

  friend bool operator==(const FeatureColumn&, const FeatureColumn&) = default;
};

/// Column layout of the design matrix. Default layout (d = 83):
/// 48 condition-history columns (indicator-major within each year,
/// 2014..2017), traffic, years since treatment, 4 treatment-level dummies,
/// climate one-hot (5), pavement-type one-hot (5), functional-class
/// one-hot (19).
struct FeatureSpec {
  Indicator target = Indicator::Iri;
  int target_year = kTargetYear;
  std::vector<int> history_years;
  TreatmentEncoding treatment_encoding = TreatmentEncoding::Level;
  std::vector<FeatureColumn> columns;

  std::size_t width() const { return columns.size(); }
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

FeatureSpec make_feature_spec(Indicator target,
                              TreatmentEncoding encoding = TreatmentEncoding::Level);

/// Imputation and standardisation statistics for each column. Only numeric
/// columns use them; categorical columns carry (0, 0, 1).
struct ColumnStats {
  std::vector<double> median;
  std::vector<double> mean;
  std::vector<double> sd;  // 0 marks a zero-variance column (pinned to 0)

  friend bool operator==(const ColumnStats&, const ColumnStats&) = default;
};

struct Dataset {
  RoadGraph graph;
  std::vector<std::string> section_ids;
  DenseMatrix raw;  // unimputed, unstandardised; NaN marks missing
  DenseMatrix x;    // imputed and standardised with `stats`
  std::vector<double> y;  // target in native units; NaN when unobserved
  FeatureSpec spec;
  ColumnStats stats;
  /// Labelled nodes inside the training split. Every labelled node outside
  /// it is a test node; unlabelled nodes belong to neither.
  std::vector<bool> train_mask;

  bool labelled(std::size_t v) const;
  std::vector<NodeId> train_nodes() const;
  std::vector<NodeId> test_nodes() const;
};

/// Builds the design matrix and target for one indicator. Statistics are
/// computed over all rows until split() recomputes them on the train rows.
/// Throws VocabularyError for a categorical label outside its vocabulary.
Dataset assemble_features(std::span<const SectionRecord> records, const FeatureSpec& spec);

ColumnStats compute_stats(const DenseMatrix& raw, const FeatureSpec& spec, const std::vector<bool>& rows);
DenseMatrix apply_stats(const DenseMatrix& raw, const FeatureSpec& spec, const ColumnStats& stats);

/// Uniform node-level split of the labelled nodes: round(test_fraction·n)
/// go to test. Statistics are recomputed from train rows only. Throws
/// ConfigError for fewer than five labelled nodes or an empty side.
Dataset split(const Dataset& dataset, double test_fraction, std::uint64_t rng_seed);

}  // namespace pavesage
