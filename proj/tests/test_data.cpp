#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "pavesage/error.hpp"
#include "pavesage/features.hpp"
#include "pavesage/records.hpp"
#include "pavesage/synthetic.hpp"

using namespace pavesage;

namespace {

std::vector<SectionRecord> synthetic(std::size_t n, std::uint64_t seed, double rho = 0.8, double missing = 0.0) {
  SyntheticOptions o;
  o.n_nodes = n;
  o.n_routes = std::max<std::size_t>(1, n / 50);
  o.seed = seed;
  o.rho = rho;
  o.missing_rate = missing;
  return generate_synthetic(o).records;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Rewrites one cell of a single-record CSV.
std::string with_cell(const std::string& csv, const std::string& column, const std::string& value) {
  const auto nl = csv.find('\n');
  const std::string header = csv.substr(0, nl);
  std::string row = csv.substr(nl + 1);
  if (!row.empty() && row.back() == '\n') row.pop_back();
  const auto names = split_commas(header);
  auto cells = split_commas(row);
  const auto at = static_cast<std::size_t>(std::find(names.begin(), names.end(), column) - names.begin());
  REQUIRE(at < names.size());
  cells[at] = value;
  std::string out = header + "\n";
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
  return out + "\n";
}

std::string header_line() {
  std::string h;
  for (const auto& c : csv_header()) h += (h.empty() ? "" : ",") + c;
  return h + "\n";
}

std::size_t col(const FeatureSpec& spec, const std::string& name) {
  for (std::size_t i = 0; i < spec.columns.size(); ++i)
    if (spec.columns[i].name == name) return i;
  FAIL("no column " << name);
  return 0;
}

}  // namespace

TEST_CASE("vocabularies") {
  CHECK(indicators().size() == 12);
  CHECK(climate_zones().size() == 5);
  CHECK(pavement_types().size() == 5);
  CHECK(functional_classes().size() == 19);
  CHECK(treatment_level_codes().size() == 4);
  CHECK(parse_indicator("ride_score") == Indicator::RideScore);
  CHECK_THROWS_AS(parse_indicator("potholes"), VocabularyError);
  CHECK(indicator_info(Indicator::RideScore).hi == 5.0);
  CHECK(indicator_info(Indicator::Iri).lo == 0.0);
  CHECK(std::isinf(indicator_info(Indicator::Iri).hi));
  CHECK(csv_header().size() == 4 + 60 + 6);
}

TEST_CASE("CSV schema handling") {
  const auto empty = parse_csv(header_line());
  CHECK(empty.records.empty());
  CHECK(empty.report.rows_dropped == 0);
  CHECK_THROWS_AS(parse_csv(""), SchemaError);
  try {
    parse_csv("section_id,route_id\n");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("begin_marker") != std::string::npos);
  }
}

TEST_CASE("row-level validation drops bad rows") {
  const auto recs = synthetic(1, 1);
  const std::string base = to_csv(recs);
  REQUIRE(parse_csv(base).records.size() == 1);

  const auto ride = parse_csv(with_cell(base, "ride_score_2016", "7.2"));
  CHECK(ride.records.empty());
  CHECK(ride.report.rows_dropped == 1);
  REQUIRE(ride.report.diagnostics.size() == 1);
  CHECK(ride.report.diagnostics[0].line == 2);
  CHECK(ride.report.diagnostics[0].column == "ride_score_2016");
  CHECK(ride.report.diagnostics[0].message.find("0-5") != std::string::npos);

  CHECK(parse_csv(with_cell(base, "iri_2015", "12,5")).records.empty());
  CHECK(parse_csv(with_cell(base, "iri_2015", "abc")).report.rows_dropped == 1);
  CHECK(parse_csv(with_cell(base, "climate_zone", "arctic")).records.empty());
  CHECK(parse_csv(with_cell(base, "treatments", "paint")).records.empty());
  CHECK(parse_csv(with_cell(base, "traffic_esal_k", "-1")).records.empty());

  // An empty numeric cell is missing, not zero.
  const auto gap = parse_csv(with_cell(base, "iri_2015", ""));
  REQUIRE(gap.records.size() == 1);
  CHECK_FALSE(gap.records[0].value(2015, Indicator::Iri).has_value());
}

TEST_CASE("CSV round-trip of 500 records") {
  const auto recs = synthetic(500, 2, 0.8, 0.05);
  const auto back = parse_csv(to_csv(recs));
  CHECK(back.report.rows_dropped == 0);
  CHECK(back.records == recs);

  const auto path = std::filesystem::temp_directory_path() / "pavesage_roundtrip.csv";
  write_csv(path, recs);
  CHECK(load_csv(path).records == recs);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_csv("/nonexistent/dir/x.csv"), IoError);
}

TEST_CASE("generated data respects schema and ranges") {
  const auto recs = synthetic(600, 3);
  CHECK(parse_csv(to_csv(recs)).report.rows_dropped == 0);
  for (const auto& r : recs) {
    for (int year = kFirstYear; year <= kTargetYear; ++year)
      for (const auto& info : indicators()) {
        const auto& v = r.value(year, info.id);
        REQUIRE(v.has_value());
        CHECK(*v >= info.lo);
        CHECK(*v <= info.hi);
      }
    CHECK(*r.years_since_treatment >= 1.0);
    CHECK(*r.traffic_esal_k >= 0.0);
  }
  // Routes are marker chains.
  const auto g = build_graph(recs);
  CHECK(g.n_edges() == recs.size() - 600 / 50);
  CHECK(generate_synthetic({600, 12, 0.8, 3, 0.0}).records == recs);
}

TEST_CASE("generator option validation") {
  CHECK_THROWS_AS(generate_synthetic({5, 10, 0.5, 0, 0.0}), ConfigError);
  CHECK_THROWS_AS(generate_synthetic({10, 0, 0.5, 0, 0.0}), ConfigError);
  CHECK_THROWS_AS(generate_synthetic({10, 2, 1.5, 0, 0.0}), ConfigError);
}

TEST_CASE("latent spatial autocorrelation follows rho") {
  SyntheticOptions o;
  o.n_nodes = 5000;
  o.n_routes = 50;
  o.seed = 11;
  o.rho = 0.0;
  auto d0 = generate_synthetic(o);
  o.rho = 0.8;
  auto d8 = generate_synthetic(o);
  const auto g = build_graph(d0.records);
  CHECK(std::abs(neighbor_correlation(g, d0.truth.latent)) <= 0.05);
  CHECK(neighbor_correlation(g, d8.truth.latent) >= 0.5);
}

TEST_CASE("target neighbor correlation increases with rho") {
  const std::vector<double> rhos{0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<double> mean_corr;
  for (double rho : rhos) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      SyntheticOptions o;
      o.n_nodes = 2000;
      o.n_routes = 40;
      o.rho = rho;
      o.seed = seed;
      const auto d = generate_synthetic(o);
      std::vector<double> y;
      for (const auto& r : d.records) y.push_back(*r.value(kTargetYear, Indicator::Iri));
      sum += neighbor_correlation(build_graph(d.records), y);
    }
    mean_corr.push_back(sum / 10.0);
  }
  for (std::size_t i = 1; i < mean_corr.size(); ++i) CHECK(mean_corr[i] > mean_corr[i - 1]);
}

TEST_CASE("ground truth sidecar") {
  SyntheticOptions o;
  o.n_nodes = 20;
  o.n_routes = 2;
  const auto d = generate_synthetic(o);
  const auto text = ground_truth_csv(d.records, d.truth);
  CHECK(text.rfind("kind,key,value\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 3 * 20 + 2 * 12);
  CHECK(text.find("indicator_drift,iri,6\n") != std::string::npos);
}

TEST_CASE("feature layout") {
  const auto spec = make_feature_spec(Indicator::Iri);
  CHECK(spec.width() == 83);
  CHECK(spec.columns[0].name == "shallow_rutting_2014");
  CHECK(spec.columns[47].name == "condition_score_2017");
  CHECK(spec.columns[48].name == "traffic_esal_k");
  CHECK(spec.columns[49].name == "years_since_treatment");
  CHECK(spec.columns[50].name == "treat_level_PM");
  CHECK(spec.columns[54].name == "climate_west");
  CHECK(spec.columns[59].name == "pavement_4");
  CHECK(spec.columns[64].name == "fclass_IH");
  CHECK(make_feature_spec(Indicator::Iri, TreatmentEncoding::PerTreatment).width() == 99);
}

TEST_CASE("one-hot blocks and a single zero-history record") {
  auto recs = synthetic(1, 4);
  for (auto& year : recs[0].condition)
    for (auto& v : year) v = 0.0;
  recs[0].climate_zone = "east";
  const auto spec = make_feature_spec(Indicator::Iri);
  const auto ds = assemble_features(recs, spec);
  for (std::size_t c = 0; c < 50; ++c) CHECK(ds.x(0, c) == 0.0);
  for (std::size_t z = 0; z < 5; ++z) CHECK(ds.x(0, col(spec, "climate_west") + z) == (z == 1 ? 1.0 : 0.0));

  recs[0].climate_zone = "tropical";
  CHECK_THROWS_AS(assemble_features(recs, spec), VocabularyError);
}

TEST_CASE("structural audit of 100 records") {
  const auto recs = synthetic(100, 5, 0.5, 0.1);
  for (auto enc : {TreatmentEncoding::Level, TreatmentEncoding::PerTreatment}) {
    const auto spec = make_feature_spec(Indicator::DistressScore, enc);
    const auto ds = assemble_features(recs, spec);
    CHECK(ds.x.cols() == spec.width());
    CHECK(ds.x.all_finite());
    const std::size_t c0 = col(spec, "climate_west"), p0 = col(spec, "pavement_4"), f0 = col(spec, "fclass_IH");
    for (std::size_t r = 0; r < 100; ++r) {
      double cs = 0, ps = 0, fs = 0;
      for (std::size_t i = 0; i < 5; ++i) cs += ds.x(r, c0 + i);
      for (std::size_t i = 0; i < 5; ++i) ps += ds.x(r, p0 + i);
      for (std::size_t i = 0; i < 19; ++i) fs += ds.x(r, f0 + i);
      CHECK(cs == 1.0);
      CHECK(ps == 1.0);
      CHECK(fs == 1.0);
      // Treatment dummies mark presence.
      for (const auto& name : recs[r].treatments) {
        const auto t = treatment_index(name);
        const std::string dummy = enc == TreatmentEncoding::Level
                                      ? "treat_level_" + std::string(treatment_level_codes()[static_cast<std::size_t>(treatments()[t].level)])
                                      : "treat_" + name;
        CHECK(ds.x(r, col(spec, dummy)) == 1.0);
      }
    }
    // Determinism and layout stability.
    CHECK(assemble_features(recs, spec).x == ds.x);
  }
  auto bad = make_feature_spec(Indicator::Iri);
  std::swap(bad.columns[0], bad.columns[1]);
  CHECK_THROWS_AS(assemble_features(recs, bad), ConfigError);
}

TEST_CASE("median imputation fills missing cells") {
  auto recs = synthetic(5, 6);
  for (std::size_t i = 0; i < 5; ++i) recs[i].traffic_esal_k = 10.0 * static_cast<double>(i + 1);
  recs[4].traffic_esal_k.reset();
  const auto spec = make_feature_spec(Indicator::Iri);
  const auto ds = assemble_features(recs, spec);
  const auto c = col(spec, "traffic_esal_k");
  CHECK(std::isnan(ds.raw(4, c)));
  CHECK(ds.stats.median[c] == 25.0);
  // Imputed value 25 sits between rows 1 (20) and 2 (30).
  CHECK(ds.x(4, c) > ds.x(1, c));
  CHECK(ds.x(4, c) < ds.x(2, c));
}

TEST_CASE("split sizes, determinism and leakage") {
  const auto ds10 = assemble_features(synthetic(10, 7), make_feature_spec(Indicator::Iri));
  const auto s10 = split(ds10, 0.2, 1);
  CHECK(s10.test_nodes().size() == 2);
  CHECK(s10.train_nodes().size() == 8);
  CHECK(split(ds10, 0.2, 1).train_mask == s10.train_mask);
  CHECK_THROWS_AS(split(ds10, 0.0, 1), ConfigError);
  const auto tiny = assemble_features(synthetic(4, 7), make_feature_spec(Indicator::Iri));
  CHECK_THROWS_AS(split(tiny, 0.2, 1), ConfigError);

  const auto big = split(assemble_features(synthetic(10000, 8), make_feature_spec(Indicator::Iri)), 0.2, 3);
  const double frac = static_cast<double>(big.test_nodes().size()) / 10000.0;
  CHECK(std::abs(frac - 0.2) <= 0.01);

  // Statistics come from train rows only.
  const auto ds = split(assemble_features(synthetic(300, 9, 0.8, 0.1), make_feature_spec(Indicator::Iri)), 0.2, 5);
  std::vector<bool> only_train = ds.train_mask;
  CHECK(compute_stats(ds.raw, ds.spec, only_train) == ds.stats);
  // Changing test rows leaves the statistics and train features untouched.
  auto tampered = assemble_features(synthetic(300, 9, 0.8, 0.1), make_feature_spec(Indicator::Iri));
  for (NodeId v : ds.test_nodes()) tampered.raw(v, 0) = 1e6;
  tampered.train_mask = ds.train_mask;
  CHECK(compute_stats(tampered.raw, tampered.spec, tampered.train_mask) == ds.stats);
}

TEST_CASE("unlabelled sections stay out of both splits") {
  auto recs = synthetic(40, 10);
  recs[3].value(kTargetYear, Indicator::Iri).reset();
  const auto ds = split(assemble_features(recs, make_feature_spec(Indicator::Iri)), 0.2, 1);
  CHECK_FALSE(ds.labelled(3));
  CHECK(ds.train_nodes().size() + ds.test_nodes().size() == 39);
  CHECK(ds.test_nodes().size() == 8);
}
