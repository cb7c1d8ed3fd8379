#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pavesage/graph.hpp"

namespace pavesage {

// ---------------------------------------------------------------------------
// Vocabularies

inline constexpr int kFirstYear = 2014;
inline constexpr int kTargetYear = 2018;
inline constexpr std::size_t kYearCount = 5;        // 2014..2018
inline constexpr std::size_t kIndicatorCount = 12;

enum class Indicator : std::size_t {
  ShallowRutting,
  DeepRutting,
  Patching,
  Failures,
  BlockCracking,
  AlligatorCracking,
  LongitudinalCracking,
  TransverseCracking,
  Iri,
  RideScore,
  DistressScore,
  ConditionScore,
};

struct IndicatorInfo {
  Indicator id;
  std::string_view name;  // CSV / CLI token
  std::string_view unit;
  double lo;
  double hi;  // +inf when unbounded above
};

/// Condition indicators in canonical order with their admissible ranges.
std::span<const IndicatorInfo> indicators();
const IndicatorInfo& indicator_info(Indicator id);
/// Throws VocabularyError for an unknown token.
Indicator parse_indicator(std::string_view name);

/// Closed categorical vocabularies, in the order their one-hot blocks use.
std::span<const std::string_view> climate_zones();      // west, east, north, south, central
std::span<const std::string_view> pavement_types();     // 4, 5, 6, 9, 10
std::span<const std::string_view> functional_classes(); // 19 highway systems

enum class TreatmentLevel : std::size_t {
  PreventiveMaintenance,
  LightRehabilitation,
  MediumRehabilitation,
  HeavyRehabilitation,
};

struct TreatmentInfo {
  std::string_view name;
  TreatmentLevel level;
};

std::span<const TreatmentInfo> treatments();
std::span<const std::string_view> treatment_level_codes();  // PM, LR, MR, HR
/// Index into treatments(); throws VocabularyError when unknown.
std::size_t treatment_index(std::string_view name);

/// Index of `label` within `vocabulary`; throws VocabularyError naming the
/// label and the vocabulary.
std::size_t vocabulary_index(std::span<const std::string_view> vocabulary, std::string_view label,
                             std::string_view what);

// ---------------------------------------------------------------------------
// Records

/// One pavement section with five survey years of condition data. Missing
/// numerics are empty optionals, never zeros.
struct SectionRecord {
  std::string section_id;
  std::string route_id;
  std::string begin_marker;
  std::string end_marker;
  /// condition[year - kFirstYear][indicator]
  std::array<std::array<std::optional<double>, kIndicatorCount>, kYearCount> condition{};
  std::optional<double> traffic_esal_k;        // 18-kip ESALs, thousands
  std::optional<double> years_since_treatment;
  std::vector<std::string> treatments;         // names from treatments()
  std::string climate_zone;
  std::string pavement_type;
  std::string functional_class;

  std::optional<double>& value(int year, Indicator ind) {
    return condition[static_cast<std::size_t>(year - kFirstYear)][static_cast<std::size_t>(ind)];
  }
  const std::optional<double>& value(int year, Indicator ind) const {
    return condition[static_cast<std::size_t>(year - kFirstYear)][static_cast<std::size_t>(ind)];
  }

  friend bool operator==(const SectionRecord&, const SectionRecord&) = default;
};

std::vector<SectionEndpoints> endpoints(std::span<const SectionRecord> records);
RoadGraph build_graph(std::span<const SectionRecord> records);

// ---------------------------------------------------------------------------
// CSV

/// The documented header, in order.
std::vector<std::string> csv_header();

struct RowDiagnostic {
  std::size_t line = 0;  // 1-based file line; the header is line 1
  std::string column;
  std::string message;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
  std::vector<RowDiagnostic> diagnostics;
};

struct LoadResult {
  std::vector<SectionRecord> records;
  LoadReport report;
};

/// Parses CSV text. Throws SchemaError if any documented column is missing
/// from the header; rows with unparseable numbers, out-of-range values or
/// unknown categories are dropped and reported.
LoadResult parse_csv(std::string_view text);
LoadResult load_csv(const std::filesystem::path& path);

std::string to_csv(std::span<const SectionRecord> records);
void write_csv(const std::filesystem::path& path, std::span<const SectionRecord> records);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace pavesage
