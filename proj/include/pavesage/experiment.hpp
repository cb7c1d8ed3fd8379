#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pavesage/baselines.hpp"
#include "pavesage/features.hpp"
#include "pavesage/metrics.hpp"
#include "pavesage/param_io.hpp"
#include "pavesage/records.hpp"
#include "pavesage/sage.hpp"

namespace pavesage {

enum class ModelKind { Lr, Cart, Nn, Sage };

std::span<const ModelKind> all_models();
std::string_view model_name(ModelKind kind);  // lr, cart, nn, sage
/// Throws ConfigError for an unknown token.
ModelKind parse_model(std::string_view name);

struct ExperimentConfig {
  std::uint64_t master_seed = 0;
  double test_fraction = 0.2;
  TreatmentEncoding treatment_encoding = TreatmentEncoding::Level;
  SageConfig sage;
  MlpOptions mlp;
  std::size_t cart_max_depth = kUnlimitedDepth;
  std::size_t cart_min_samples_leaf = 1;
  /// Worker threads for independent cells; results do not depend on it.
  std::size_t jobs = 1;
};

/// Seed owned by one (indicator, model) cell.
std::uint64_t cell_seed(std::uint64_t master_seed, Indicator indicator, ModelKind model);
/// Seed of the train/test split shared by every model of one indicator.
std::uint64_t split_seed(std::uint64_t master_seed, Indicator indicator);

/// Assembles and splits one dataset per indicator.
std::vector<Dataset> prepare_datasets(std::span<const SectionRecord> records, std::span<const Indicator> indicators,
                                      const ExperimentConfig& config);

struct CellResult {
  Indicator indicator = Indicator::Iri;
  ModelKind model = ModelKind::Lr;
  std::uint64_t seed = 0;
  std::optional<Metrics> metrics;  // empty when the cell failed
  std::string error;
  std::optional<ParamContainer> params;
};

struct EvalReport {
  std::vector<Indicator> indicators;
  std::vector<ModelKind> models;
  std::vector<CellResult> cells;  // indicator-major, models in request order
  std::map<Indicator, std::vector<EpochRecord>> history;  // GraphSAGE cells only
  std::uint64_t master_seed = 0;
  std::string dataset_checksum;
  std::string config_json;

  const CellResult& cell(Indicator indicator, ModelKind model) const;
};

/// Trains every requested model on each dataset's train rows and scores it on
/// the test rows. A throwing cell records its message and leaves the others
/// untouched. Throws ConfigError when there is no dataset or no model.
EvalReport run_experiment(std::span<const Dataset> datasets, std::span<const ModelKind> models,
                          const ExperimentConfig& config);

/// FNV-1a over features, targets and split of every dataset, as 16 hex digits.
std::string dataset_checksum(std::span<const Dataset> datasets);

std::string comparison_csv(const EvalReport& report);
std::string history_csv(const std::vector<EpochRecord>& history);
std::string manifest_json(const EvalReport& report);

/// Writes comparison.csv, history_<indicator>.csv per GraphSAGE cell, and
/// manifest.json into out_dir (created when absent).
std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace pavesage
