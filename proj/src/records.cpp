#include "pavesage/records.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "pavesage/error.hpp"

namespace pavesage {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<IndicatorInfo, kIndicatorCount> kIndicators{{
    {Indicator::ShallowRutting, "shallow_rutting", "percent", 0.0, 100.0},
    {Indicator::DeepRutting, "deep_rutting", "percent", 0.0, 100.0},
    {Indicator::Patching, "patching", "percent", 0.0, 100.0},
    {Indicator::Failures, "failures", "count", 0.0, kInf},
    {Indicator::BlockCracking, "block_cracking", "percent", 0.0, 100.0},
    {Indicator::AlligatorCracking, "alligator_cracking", "percent", 0.0, 100.0},
    {Indicator::LongitudinalCracking, "longitudinal_cracking", "feet", 0.0, kInf},
    {Indicator::TransverseCracking, "transverse_cracking", "count", 0.0, kInf},
    {Indicator::Iri, "iri", "inch/mile", 0.0, kInf},
    {Indicator::RideScore, "ride_score", "score", 0.0, 5.0},
    {Indicator::DistressScore, "distress_score", "score", 0.0, 100.0},
    {Indicator::ConditionScore, "condition_score", "score", 0.0, 100.0},
}};

constexpr std::array<std::string_view, 5> kClimate{"west", "east", "north", "south", "central"};
constexpr std::array<std::string_view, 5> kPavement{"4", "5", "6", "9", "10"};
// TxDOT highway systems: interstate, US and state highways with their
// alternates/loops/spurs/business routes, farm/ranch-to-market, park and
// recreational roads, and principal arterial streets.
constexpr std::array<std::string_view, 19> kFunctional{
    "IH", "US", "UA", "UP", "SH", "SA", "SL", "SS", "BI", "BU",
    "BS", "BF", "FM", "RM", "RR", "PR", "RE", "FS", "PA"};

using TL = TreatmentLevel;
constexpr std::array<TreatmentInfo, 20> kTreatments{{
    {"cape_seal", TL::PreventiveMaintenance},
    {"fog_seal", TL::PreventiveMaintenance},
    {"micro_surfacing", TL::PreventiveMaintenance},
    {"seal_coat", TL::PreventiveMaintenance},
    {"thin_overlay", TL::PreventiveMaintenance},
    {"ultra_thin_friction_course", TL::PreventiveMaintenance},
    {"base_repair_and_seal", TL::LightRehabilitation},
    {"cold_in_place_recycling", TL::LightRehabilitation},
    {"hot_in_place_recycling", TL::LightRehabilitation},
    {"mill_and_inlay", TL::LightRehabilitation},
    {"overlay_2_to_3_in", TL::LightRehabilitation},
    {"base_repair_spot_seal_edge_repair_overlay", TL::MediumRehabilitation},
    {"level_up_and_overlay", TL::MediumRehabilitation},
    {"mill_and_overlay", TL::MediumRehabilitation},
    {"mill_stabilize_base_and_seal", TL::MediumRehabilitation},
    {"overlay_3_to_5_in", TL::MediumRehabilitation},
    {"full_depth_reclamation", TL::HeavyRehabilitation},
    {"mill_cement_stabilize_base_overlay", TL::HeavyRehabilitation},
    {"reconstruction", TL::HeavyRehabilitation},
    {"thick_overlay_over_5_in", TL::HeavyRehabilitation},
}};

constexpr std::array<std::string_view, 4> kLevelCodes{"PM", "LR", "MR", "HR"};

std::string indicator_column(Indicator ind, int year) {
  return std::string(indicator_info(ind).name) + "_" + std::to_string(year);
}

}  // namespace

std::span<const IndicatorInfo> indicators() { return kIndicators; }

const IndicatorInfo& indicator_info(Indicator id) { return kIndicators[static_cast<std::size_t>(id)]; }

Indicator parse_indicator(std::string_view name) {
  for (const auto& info : kIndicators)
    if (info.name == name) return info.id;
  throw VocabularyError("unknown condition indicator '" + std::string(name) + "'");
}

std::span<const std::string_view> climate_zones() { return kClimate; }
std::span<const std::string_view> pavement_types() { return kPavement; }
std::span<const std::string_view> functional_classes() { return kFunctional; }
std::span<const TreatmentInfo> treatments() { return kTreatments; }
std::span<const std::string_view> treatment_level_codes() { return kLevelCodes; }

std::size_t vocabulary_index(std::span<const std::string_view> vocabulary, std::string_view label,
                             std::string_view what) {
  auto it = std::find(vocabulary.begin(), vocabulary.end(), label);
  if (it == vocabulary.end()) {
    throw VocabularyError("unknown " + std::string(what) + " label '" + std::string(label) + "'");
  }
  return static_cast<std::size_t>(it - vocabulary.begin());
}

std::size_t treatment_index(std::string_view name) {
  for (std::size_t i = 0; i < kTreatments.size(); ++i)
    if (kTreatments[i].name == name) return i;
  throw VocabularyError("unknown treatment label '" + std::string(name) + "'");
}

std::vector<SectionEndpoints> endpoints(std::span<const SectionRecord> records) {
  std::vector<SectionEndpoints> out;
  out.reserve(records.size());
  for (const auto& r : records)
    out.push_back({r.section_id, {r.route_id, r.begin_marker}, {r.route_id, r.end_marker}});
  return out;
}

RoadGraph build_graph(std::span<const SectionRecord> records) {
  const auto eps = endpoints(records);
  return build_graph(std::span<const SectionEndpoints>(eps));
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> csv_header() {
  std::vector<std::string> h{"section_id", "route_id", "begin_marker", "end_marker"};
  for (int year = kFirstYear; year <= kTargetYear; ++year)
    for (const auto& info : kIndicators) h.push_back(indicator_column(info.id, year));
  h.insert(h.end(), {"traffic_esal_k", "years_since_treatment", "treatments", "climate_zone",
                     "pavement_type", "functional_class"});
  return h;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw DataError("cannot format number");
  return std::string(buf.data(), ptr);
}

namespace {

/// Splits one CSV record honouring double-quoted fields. `pos` advances past
/// the record's line terminator.
std::vector<std::string> next_record(std::string_view text, std::size_t& pos) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field.push_back('"');
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
      break;
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string range_text(double lo, double hi) {
  if (std::isinf(hi)) return ">= " + format_double(lo);
  return format_double(lo) + "-" + format_double(hi);
}

struct RowParser {
  const std::vector<std::string>& fields;
  const std::unordered_map<std::string, std::size_t>& col;
  std::size_t line;
  std::vector<RowDiagnostic>& diags;
  bool ok = true;

  const std::string& cell(const std::string& name) const { return fields[col.at(name)]; }

  void fail(const std::string& column, std::string message) {
    diags.push_back({line, column, std::move(message)});
    ok = false;
  }

  std::optional<double> number(const std::string& column, double lo, double hi) {
    const std::string& s = cell(column);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      fail(column, "unparseable number '" + s + "'");
      return std::nullopt;
    }
    if (v < lo || v > hi) {
      fail(column, column + "=" + s + " outside range " + range_text(lo, hi));
      return std::nullopt;
    }
    return v;
  }

  std::string required(const std::string& column) {
    const std::string& s = cell(column);
    if (s.empty()) fail(column, "required value is empty");
    return s;
  }

  std::string category(const std::string& column, std::span<const std::string_view> vocab) {
    const std::string& s = cell(column);
    if (std::find(vocab.begin(), vocab.end(), s) == vocab.end()) {
      fail(column, "unknown " + column + " label '" + s + "'");
    }
    return s;
  }
};

}  // namespace

LoadResult parse_csv(std::string_view text) {
  // Tolerate a UTF-8 byte-order mark.
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::size_t pos = 0;
  if (text.empty()) throw SchemaError("CSV input is empty; a header row is required");
  const auto header = next_record(text, pos);

  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
  std::vector<std::string> missing;
  for (const auto& name : csv_header())
    if (!col.contains(name)) missing.push_back(name);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw SchemaError("CSV header lacks mandatory column(s): " + list);
  }

  LoadResult result;
  std::size_t line = 1;
  while (pos < text.size()) {
    ++line;
    const auto fields = next_record(text, pos);
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    ++result.report.rows_read;
    if (fields.size() != header.size()) {
      result.report.diagnostics.push_back({line, "", "expected " + std::to_string(header.size()) +
                                                         " fields, found " + std::to_string(fields.size())});
      ++result.report.rows_dropped;
      continue;
    }

    RowParser p{fields, col, line, result.report.diagnostics};
    SectionRecord r;
    r.section_id = p.required("section_id");
    r.route_id = p.required("route_id");
    r.begin_marker = p.required("begin_marker");
    r.end_marker = p.required("end_marker");
    for (int year = kFirstYear; year <= kTargetYear; ++year) {
      for (const auto& info : kIndicators) r.value(year, info.id) = p.number(indicator_column(info.id, year), info.lo, info.hi);
    }
    r.traffic_esal_k = p.number("traffic_esal_k", 0.0, kInf);
    r.years_since_treatment = p.number("years_since_treatment", 0.0, kInf);
    const std::string& treat = p.cell("treatments");
    std::size_t start = 0;
    while (start <= treat.size() && !treat.empty()) {
      const auto stop = std::min(treat.find(';', start), treat.size());
      std::string name = treat.substr(start, stop - start);
      bool known = false;
      for (const auto& t : kTreatments) known = known || t.name == name;
      if (!known) p.fail("treatments", "unknown treatment label '" + name + "'");
      r.treatments.push_back(std::move(name));
      start = stop + 1;
    }
    r.climate_zone = p.category("climate_zone", kClimate);
    r.pavement_type = p.category("pavement_type", kPavement);
    r.functional_class = p.category("functional_class", kFunctional);

    if (p.ok) {
      result.records.push_back(std::move(r));
    } else {
      ++result.report.rows_dropped;
    }
  }
  return result;
}

LoadResult load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::string to_csv(std::span<const SectionRecord> records) {
  std::string out;
  const auto header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : records) {
    out += quote_if_needed(r.section_id) + ',' + quote_if_needed(r.route_id) + ',' +
           quote_if_needed(r.begin_marker) + ',' + quote_if_needed(r.end_marker);
    for (const auto& year : r.condition)
      for (const auto& v : year) out += ',' + opt(v);
    out += ',' + opt(r.traffic_esal_k) + ',' + opt(r.years_since_treatment) + ',';
    for (std::size_t i = 0; i < r.treatments.size(); ++i) out += (i ? ";" : "") + r.treatments[i];
    out += ',' + quote_if_needed(r.climate_zone) + ',' + quote_if_needed(r.pavement_type) + ',' +
           quote_if_needed(r.functional_class) + '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, std::span<const SectionRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << to_csv(records);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace pavesage
