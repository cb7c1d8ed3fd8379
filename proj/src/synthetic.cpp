#include "pavesage/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <fstream>
#include <numeric>

#include "pavesage/error.hpp"
#include "pavesage/rng.hpp"

namespace pavesage {

namespace {

// Affine reading of the deterioration state for each indicator:
// value = base + drift·(state + survey_error) + noise·ε, clamped to range.
struct IndicatorModel {
  double base;
  double drift;
  double noise;
  bool integral;
};

constexpr std::array<IndicatorModel, kIndicatorCount> kModels{{
    {12.0, 1.5, 2.0, false},    // shallow rutting
    {2.0, 0.4, 0.6, false},     // deep rutting
    {4.0, 0.8, 1.2, false},     // patching
    {0.8, 0.15, 0.3, true},     // failures
    {1.5, 0.3, 0.6, false},     // block cracking
    {5.0, 1.0, 1.5, false},     // alligator cracking
    {120.0, 15.0, 20.0, false}, // longitudinal cracking
    {3.0, 0.5, 0.8, true},      // transverse cracking
    {110.0, 6.0, 4.0, false},   // IRI
    {0.0, 0.0, 0.05, false},    // ride score: derived from IRI below
    {80.0, -2.0, 3.0, false},   // distress score
    {70.0, -2.2, 3.0, false},   // condition score
}};

// Ride score as a linear transform of same-year IRI.
constexpr double kRideIntercept = 4.8;
constexpr double kRidePerIri = -0.012;

constexpr double kSurveyNoiseHistory = 8.0;
constexpr double kSurveyNoiseTarget = 2.0;
constexpr double kProcessNoise = 0.3;
constexpr std::size_t kSmoothingRounds = 3;

// Functional-class prior; the remaining mass is spread over the other 15.
struct ClassPrior {
  std::string_view code;
  double weight;
  double traffic_k;  // typical 20-year ESALs, thousands
};
constexpr std::array<ClassPrior, 4> kMajorClasses{{
    {"FM", 0.40, 400.0}, {"SH", 0.18, 2000.0}, {"US", 0.16, 3000.0}, {"IH", 0.08, 8000.0}}};
constexpr double kMinorTraffic = 800.0;

constexpr std::array<double, 5> kClimateEffect{-0.10, 0.20, 0.10, 0.15, 0.0};  // west..central
constexpr std::array<double, 5> kPavementEffect{-0.20, -0.10, 0.10, 0.0, 0.25};  // 4,5,6,9,10

constexpr std::array<double, 4> kLevelProb{0.45, 0.25, 0.20, 0.10};
constexpr std::array<double, 4> kLevelJump{2.0, 3.5, 5.0, 7.0};

enum Stream : std::uint64_t {
  kRouteStream = 1,
  kLatentStream,
  kSectionStream,
  kTreatmentStream,
  kSurveyStream,
  kMissingStream,
};

std::string marker_text(std::size_t half_miles) {
  return std::to_string(half_miles / 2) + (half_miles % 2 ? ".5" : ".0");
}

std::size_t draw_weighted(Rng& rng, std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

void standardise(std::vector<double>& v) {
  const auto n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

}  // namespace

void SyntheticOptions::validate() const {
  if (n_routes == 0 || n_nodes < n_routes) {
    throw ConfigError("synthetic: need n_nodes >= n_routes >= 1 (got " + std::to_string(n_nodes) + ", " +
                      std::to_string(n_routes) + ")");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("synthetic: rho must lie in [0, 1]");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw ConfigError("synthetic: missing_rate must lie in [0, 1)");
}

std::vector<double> smooth_on_graph(const RoadGraph& graph, std::span<const double> values, double rho,
                                    std::size_t rounds) {
  if (values.size() != graph.n_nodes()) throw ShapeError("smooth_on_graph: one value per node required");
  std::vector<double> cur(values.begin(), values.end());
  std::vector<double> next(cur.size());
  for (std::size_t t = 0; t < rounds; ++t) {
    for (NodeId v = 0; v < cur.size(); ++v) {
      double sum = cur[v];
      auto nbrs = graph.neighbors(v);
      for (NodeId u : nbrs) sum += cur[u];
      const double mean = sum / static_cast<double>(nbrs.size() + 1);
      next[v] = (1.0 - rho) * cur[v] + rho * mean;
    }
    std::swap(cur, next);
  }
  return cur;
}

double neighbor_correlation(const RoadGraph& graph, std::span<const double> values) {
  if (values.size() != graph.n_nodes()) throw ShapeError("neighbor_correlation: one value per node required");
  double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
  std::size_t n = 0;
  for (NodeId v = 0; v < values.size(); ++v) {
    if (std::isnan(values[v])) continue;
    for (NodeId u : graph.neighbors(v)) {
      if (std::isnan(values[u])) continue;
      const double a = values[v];
      const double b = values[u];
      sa += a;
      sb += b;
      saa += a * a;
      sbb += b * b;
      sab += a * b;
      ++n;
    }
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = static_cast<double>(n);
  const double cov = sab / m - (sa / m) * (sb / m);
  const double va = saa / m - (sa / m) * (sa / m);
  const double vb = sbb / m - (sb / m) * (sb / m);
  if (va <= 0.0 || vb <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return cov / std::sqrt(va * vb);
}

SyntheticData generate_synthetic(const SyntheticOptions& options) {
  options.validate();
  const std::size_t n = options.n_nodes;
  SyntheticData out;
  auto& records = out.records;
  records.resize(n);

  // Routes: contiguous marker chains of near-equal length.
  Rng route_rng(derive_seed(options.seed, kRouteStream));
  std::vector<double> class_weights(functional_classes().size(), 0.0);
  std::vector<double> class_traffic(functional_classes().size(), kMinorTraffic);
  {
    double major = 0.0;
    for (const auto& c : kMajorClasses) {
      const auto i = vocabulary_index(functional_classes(), c.code, "functional class");
      class_weights[i] = c.weight;
      class_traffic[i] = c.traffic_k;
      major += c.weight;
    }
    const double minor = (1.0 - major) / static_cast<double>(functional_classes().size() - kMajorClasses.size());
    for (double& w : class_weights)
      if (w == 0.0) w = minor;
  }

  std::vector<std::size_t> route_of(n);
  std::vector<std::size_t> route_pavement;
  std::vector<double> route_traffic;
  {
    std::size_t node = 0;
    for (std::size_t r = 0; r < options.n_routes; ++r) {
      const std::size_t len = n / options.n_routes + (r < n % options.n_routes ? 1 : 0);
      const auto fclass = draw_weighted(route_rng, class_weights);
      const auto climate = route_rng.index(climate_zones().size());
      route_pavement.push_back(route_rng.index(pavement_types().size()));
      route_traffic.push_back(class_traffic[fclass] * std::exp(0.4 * route_rng.normal()));
      char route_id[16];
      std::snprintf(route_id, sizeof route_id, "R%04zu", r + 1);
      for (std::size_t j = 0; j < len; ++j, ++node) {
        auto& rec = records[node];
        char sid[24];
        std::snprintf(sid, sizeof sid, "S%07zu", node + 1);
        rec.section_id = sid;
        rec.route_id = route_id;
        rec.begin_marker = marker_text(j);
        rec.end_marker = marker_text(j + 1);
        rec.functional_class = std::string(functional_classes()[fclass]);
        rec.climate_zone = std::string(climate_zones()[climate]);
        route_of[node] = r;
      }
    }
  }
  const RoadGraph graph = build_graph(records);

  // Spatial latent factor: the white noise is drawn from its own stream so a
  // fixed seed yields the same noise for every rho.
  Rng latent_rng(derive_seed(options.seed, kLatentStream));
  std::vector<double> noise(n);
  for (double& z : noise) z = latent_rng.normal();
  auto& latent = out.truth.latent;
  latent = smooth_on_graph(graph, noise, options.rho, kSmoothingRounds);
  standardise(latent);

  Rng section_rng(derive_seed(options.seed, kSectionStream));
  std::vector<double> log_traffic(n);
  std::vector<std::size_t> pavement(n);
  std::vector<double> rate_noise(n);
  std::vector<double> level_noise(n);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t r = route_of[v];
    const double traffic = route_traffic[r] * std::exp(0.3 * section_rng.normal());
    records[v].traffic_esal_k = std::round(traffic * 10.0) / 10.0;
    log_traffic[v] = std::log(traffic);
    pavement[v] = section_rng.uniform() < 0.7 ? route_pavement[r] : section_rng.index(pavement_types().size());
    records[v].pavement_type = std::string(pavement_types()[pavement[v]]);
    rate_noise[v] = section_rng.normal();
    level_noise[v] = section_rng.normal();
  }
  standardise(log_traffic);

  auto& rate = out.truth.deterioration_rate;
  auto& level = out.truth.initial_level;
  rate.resize(n);
  level.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto climate = vocabulary_index(climate_zones(), records[v].climate_zone, "climate zone");
    rate[v] = std::max(0.1, 1.0 + 0.25 * log_traffic[v] + kClimateEffect[climate] + kPavementEffect[pavement[v]] +
                                0.8 * latent[v] + 0.3 * rate_noise[v]);
    level[v] = 4.0 + 3.0 * latent[v] + level_noise[v];
  }

  // Treatments and the deterioration state over the survey window.
  Rng treat_rng(derive_seed(options.seed, kTreatmentStream));
  Rng survey_rng(derive_seed(options.seed, kSurveyStream));
  Rng missing_rng(derive_seed(options.seed, kMissingStream));
  auto maybe_missing = [&](double v) -> std::optional<double> {
    if (options.missing_rate > 0.0 && missing_rng.uniform() < options.missing_rate) return std::nullopt;
    return v;
  };

  for (std::size_t v = 0; v < n; ++v) {
    auto& rec = records[v];
    const auto since = 1 + treat_rng.index(14);  // 1..14 years before the target year
    const auto last_level = draw_weighted(treat_rng, kLevelProb);
    const int treated_in = kTargetYear - static_cast<int>(since);
    std::vector<std::string> names;
    auto pick_treatment = [&](std::size_t lvl) {
      std::vector<std::string_view> pool;
      for (const auto& t : treatments())
        if (static_cast<std::size_t>(t.level) == lvl) pool.push_back(t.name);
      return std::string(pool[treat_rng.index(pool.size())]);
    };
    names.push_back(pick_treatment(last_level));
    if (treat_rng.uniform() < 0.3) names.push_back(pick_treatment(draw_weighted(treat_rng, kLevelProb)));
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    rec.treatments = std::move(names);
    rec.years_since_treatment = maybe_missing(static_cast<double>(since));
    rec.traffic_esal_k = maybe_missing(*rec.traffic_esal_k);

    double state = level[v];
    for (int year = kFirstYear; year <= kTargetYear; ++year) {
      state += rate[v] + kProcessNoise * treat_rng.normal();
      if (year == treated_in) state = std::max(0.0, state - kLevelJump[last_level]);
      const double survey = (year == kTargetYear ? kSurveyNoiseTarget : kSurveyNoiseHistory) * survey_rng.normal();
      const double observed = state + survey;

      double iri = 0.0;
      for (const auto& info : indicators()) {
        const auto i = static_cast<std::size_t>(info.id);
        const auto& m = kModels[i];
        double value = 0.0;
        if (info.id == Indicator::RideScore) {
          value = kRideIntercept + kRidePerIri * iri + m.noise * survey_rng.normal();
        } else {
          value = m.base + m.drift * observed + m.noise * survey_rng.normal();
        }
        value = std::clamp(value, info.lo, info.hi);
        if (m.integral) value = std::round(value);
        if (info.id == Indicator::Iri) iri = value;
        rec.value(year, info.id) = maybe_missing(value);
      }
    }
  }

  for (const auto& info : indicators()) {
    const auto i = static_cast<std::size_t>(info.id);
    if (info.id == Indicator::RideScore) {
      const auto& iri = kModels[static_cast<std::size_t>(Indicator::Iri)];
      out.truth.base[i] = kRideIntercept + kRidePerIri * iri.base;
      out.truth.drift[i] = kRidePerIri * iri.drift;
    } else {
      out.truth.base[i] = kModels[i].base;
      out.truth.drift[i] = kModels[i].drift;
    }
  }
  return out;
}

std::string ground_truth_csv(std::span<const SectionRecord> records, const GroundTruth& truth) {
  if (records.size() != truth.latent.size()) throw ShapeError("ground truth does not match the record count");
  std::string out = "kind,key,value\n";
  for (std::size_t v = 0; v < records.size(); ++v) {
    out += "latent_factor," + records[v].section_id + "," + format_double(truth.latent[v]) + "\n";
    out += "deterioration_rate," + records[v].section_id + "," + format_double(truth.deterioration_rate[v]) + "\n";
    out += "initial_level," + records[v].section_id + "," + format_double(truth.initial_level[v]) + "\n";
  }
  for (const auto& info : indicators()) {
    const auto i = static_cast<std::size_t>(info.id);
    out += "indicator_base," + std::string(info.name) + "," + format_double(truth.base[i]) + "\n";
    out += "indicator_drift," + std::string(info.name) + "," + format_double(truth.drift[i]) + "\n";
  }
  return out;
}

void write_ground_truth(const std::filesystem::path& path, std::span<const SectionRecord> records,
                        const GroundTruth& truth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << ground_truth_csv(records, truth);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace pavesage
