#include "pavesage/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pavesage/error.hpp"
#include "pavesage/rng.hpp"

namespace pavesage {

FeatureSpec make_feature_spec(Indicator target, TreatmentEncoding encoding) {
  FeatureSpec spec;
  spec.target = target;
  spec.target_year = kTargetYear;
  spec.treatment_encoding = encoding;
  for (int year = kFirstYear; year < kTargetYear; ++year) spec.history_years.push_back(year);

  auto add = [&](std::string name, ColumnKind kind) { spec.columns.push_back({std::move(name), kind}); };
  for (int year : spec.history_years)
    for (const auto& info : indicators()) add(std::string(info.name) + "_" + std::to_string(year), ColumnKind::Numeric);
  add("traffic_esal_k", ColumnKind::Numeric);
  add("years_since_treatment", ColumnKind::Numeric);
  if (encoding == TreatmentEncoding::Level) {
    for (auto code : treatment_level_codes()) add("treat_level_" + std::string(code), ColumnKind::TreatmentDummy);
  } else {
    for (const auto& t : treatments()) add("treat_" + std::string(t.name), ColumnKind::TreatmentDummy);
  }
  for (auto z : climate_zones()) add("climate_" + std::string(z), ColumnKind::OneHot);
  for (auto p : pavement_types()) add("pavement_" + std::string(p), ColumnKind::OneHot);
  for (auto f : functional_classes()) add("fclass_" + std::string(f), ColumnKind::OneHot);
  return spec;
}

bool Dataset::labelled(std::size_t v) const { return std::isfinite(y[v]); }

std::vector<NodeId> Dataset::train_nodes() const {
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < y.size(); ++v)
    if (labelled(v) && train_mask[v]) out.push_back(static_cast<NodeId>(v));
  return out;
}

std::vector<NodeId> Dataset::test_nodes() const {
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < y.size(); ++v)
    if (labelled(v) && !train_mask[v]) out.push_back(static_cast<NodeId>(v));
  return out;
}

ColumnStats compute_stats(const DenseMatrix& raw, const FeatureSpec& spec, const std::vector<bool>& rows) {
  if (raw.cols() != spec.width() || rows.size() != raw.rows()) {
    throw ShapeError("compute_stats: matrix " + raw.shape_string() + " does not match the spec/mask");
  }
  const std::size_t d = spec.width();
  ColumnStats s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  std::vector<double> present;
  for (std::size_t c = 0; c < d; ++c) {
    if (spec.columns[c].kind != ColumnKind::Numeric) continue;
    present.clear();
    for (std::size_t r = 0; r < raw.rows(); ++r)
      if (rows[r] && !std::isnan(raw(r, c))) present.push_back(raw(r, c));
    if (!present.empty()) {
      std::sort(present.begin(), present.end());
      const std::size_t m = present.size();
      s.median[c] = m % 2 == 1 ? present[m / 2] : (present[m / 2 - 1] + present[m / 2]) / 2.0;
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      if (!rows[r]) continue;
      sum += std::isnan(raw(r, c)) ? s.median[c] : raw(r, c);
      ++count;
    }
    const double mean = count ? sum / static_cast<double>(count) : 0.0;
    double ss = 0.0;
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      if (!rows[r]) continue;
      const double v = (std::isnan(raw(r, c)) ? s.median[c] : raw(r, c)) - mean;
      ss += v * v;
    }
    s.mean[c] = mean;
    s.sd[c] = count ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
  }
  return s;
}

DenseMatrix apply_stats(const DenseMatrix& raw, const FeatureSpec& spec, const ColumnStats& stats) {
  if (raw.cols() != spec.width() || stats.mean.size() != spec.width()) {
    throw ShapeError("apply_stats: matrix " + raw.shape_string() + " does not match the spec");
  }
  DenseMatrix x = raw;
  for (std::size_t c = 0; c < spec.width(); ++c) {
    if (spec.columns[c].kind != ColumnKind::Numeric) continue;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double v = std::isnan(raw(r, c)) ? stats.median[c] : raw(r, c);
      x(r, c) = stats.sd[c] > 0.0 ? (v - stats.mean[c]) / stats.sd[c] : 0.0;
    }
  }
  return x;
}

Dataset assemble_features(std::span<const SectionRecord> records, const FeatureSpec& spec) {
  if (records.empty()) throw ConfigError("assemble_features: no records");
  if (spec.target_year < kFirstYear || spec.target_year > kTargetYear) {
    throw ConfigError("assemble_features: target year " + std::to_string(spec.target_year) +
                      " outside the survey window");
  }
  for (int year : spec.history_years) {
    if (year < kFirstYear || year > kTargetYear) {
      throw ConfigError("assemble_features: history year " + std::to_string(year) + " outside the survey window");
    }
  }
  const FeatureSpec reference = make_feature_spec(spec.target, spec.treatment_encoding);
  if (spec.columns != reference.columns || spec.history_years != reference.history_years) {
    throw ConfigError("assemble_features: feature spec does not match the documented column layout");
  }

  const std::size_t n = records.size();
  const std::size_t d = spec.width();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Dataset ds;
  ds.graph = build_graph(records);
  ds.spec = spec;
  ds.raw = DenseMatrix(n, d, 0.0);
  ds.y.assign(n, nan);
  ds.section_ids.reserve(n);

  const std::size_t n_treat_cols =
      spec.treatment_encoding == TreatmentEncoding::Level ? treatment_level_codes().size() : treatments().size();

  for (std::size_t r = 0; r < n; ++r) {
    const SectionRecord& rec = records[r];
    ds.section_ids.push_back(rec.section_id);
    std::size_t c = 0;
    for (int year : spec.history_years) {
      for (const auto& info : indicators()) {
        const auto& v = rec.value(year, info.id);
        ds.raw(r, c++) = v ? *v : nan;
      }
    }
    ds.raw(r, c++) = rec.traffic_esal_k ? *rec.traffic_esal_k : nan;
    ds.raw(r, c++) = rec.years_since_treatment ? *rec.years_since_treatment : nan;

    // Presence, not counts: repeated treatments of one kind set the dummy once.
    for (const auto& name : rec.treatments) {
      const std::size_t t = treatment_index(name);
      const std::size_t slot = spec.treatment_encoding == TreatmentEncoding::Level
                                   ? static_cast<std::size_t>(treatments()[t].level)
                                   : t;
      ds.raw(r, c + slot) = 1.0;
    }
    c += n_treat_cols;

    ds.raw(r, c + vocabulary_index(climate_zones(), rec.climate_zone, "climate zone")) = 1.0;
    c += climate_zones().size();
    ds.raw(r, c + vocabulary_index(pavement_types(), rec.pavement_type, "pavement type")) = 1.0;
    c += pavement_types().size();
    ds.raw(r, c + vocabulary_index(functional_classes(), rec.functional_class, "functional class")) = 1.0;

    const auto& target = rec.value(spec.target_year, spec.target);
    if (target) ds.y[r] = *target;
  }

  ds.train_mask.assign(n, true);
  ds.stats = compute_stats(ds.raw, spec, ds.train_mask);
  ds.x = apply_stats(ds.raw, spec, ds.stats);
  return ds;
}

Dataset split(const Dataset& dataset, double test_fraction, std::uint64_t rng_seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("split: test fraction must lie strictly between 0 and 1");
  }
  std::vector<NodeId> labelled;
  for (std::size_t v = 0; v < dataset.y.size(); ++v)
    if (dataset.labelled(v)) labelled.push_back(static_cast<NodeId>(v));
  if (labelled.size() < 5) {
    throw ConfigError("split: need at least 5 labelled nodes, have " + std::to_string(labelled.size()));
  }
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(labelled.size())));
  if (n_test == 0 || n_test >= labelled.size()) {
    throw ConfigError("split: test fraction leaves an empty train or test side");
  }

  Rng rng(derive_seed(rng_seed, 0x5b117));
  rng.shuffle(labelled.begin(), labelled.end());

  Dataset out = dataset;
  out.train_mask.assign(dataset.y.size(), false);
  for (std::size_t i = n_test; i < labelled.size(); ++i) out.train_mask[labelled[i]] = true;
  out.stats = compute_stats(out.raw, out.spec, out.train_mask);
  out.x = apply_stats(out.raw, out.spec, out.stats);
  return out;
}

}  // namespace pavesage
