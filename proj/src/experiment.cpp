#include "pavesage/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdio>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "pavesage/error.hpp"
#include "pavesage/rng.hpp"

namespace pavesage {

namespace {

constexpr std::array<ModelKind, 4> kModels{ModelKind::Lr, ModelKind::Cart, ModelKind::Nn, ModelKind::Sage};

std::vector<std::size_t> rows_of(std::span<const NodeId> nodes) { return {nodes.begin(), nodes.end()}; }

std::vector<double> targets_of(const Dataset& ds, std::span<const NodeId> nodes) {
  std::vector<double> y;
  y.reserve(nodes.size());
  for (NodeId v : nodes) y.push_back(ds.y[v]);
  return y;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["master_seed"] = c.master_seed;
  j["test_fraction"] = c.test_fraction;
  j["treatment_encoding"] = c.treatment_encoding == TreatmentEncoding::Level ? "level" : "per_treatment";
  j["sage"] = {{"n_layers", c.sage.n_layers},
               {"hidden_dims", c.sage.hidden_dims},
               {"fanouts", c.sage.fanouts},
               {"learning_rate", c.sage.learning_rate},
               {"epochs", c.sage.epochs},
               {"batch_size", c.sage.batch_size},
               {"patience", c.sage.patience},
               {"mean_includes_self", c.sage.mean_includes_self}};
  j["nn"] = {{"hidden", c.mlp.hidden},
             {"epochs", c.mlp.epochs},
             {"learning_rate", c.mlp.learning_rate},
             {"batch_size", c.mlp.batch_size}};
  nlohmann::ordered_json cart;
  if (c.cart_max_depth == kUnlimitedDepth) {
    cart["max_depth"] = "unlimited";
  } else {
    cart["max_depth"] = c.cart_max_depth;
  }
  cart["min_samples_leaf"] = c.cart_min_samples_leaf;
  j["cart"] = cart;
  return j;
}

CellResult run_cell(const Dataset& ds, ModelKind model, const ExperimentConfig& config,
                    std::vector<EpochRecord>* history) {
  CellResult cell;
  cell.indicator = ds.spec.target;
  cell.model = model;
  cell.seed = cell_seed(config.master_seed, ds.spec.target, model);
  try {
    const auto train_nodes = ds.train_nodes();
    const auto test_nodes = ds.test_nodes();
    const auto y_test = targets_of(ds, test_nodes);
    std::vector<double> pred;

    if (model == ModelKind::Sage) {
      SageConfig sc = config.sage;
      sc.rng_seed = cell.seed;
      TrainResult tr = train(ds.graph, ds.x, ds.y, ds.train_mask, sc);
      const DenseMatrix all = predict(ds.graph, ds.x, tr.params);
      for (NodeId v : test_nodes) pred.push_back(all(v, 0));
      if (history) *history = std::move(tr.history);
      cell.params = to_container(tr.params, &sc);
    } else {
      const DenseMatrix x_train = gather_rows(ds.x, rows_of(train_nodes));
      const auto y_train = targets_of(ds, train_nodes);
      BaselineModel fitted;
      if (model == ModelKind::Lr) {
        fitted = fit_linear(x_train, y_train);
      } else if (model == ModelKind::Cart) {
        fitted = fit_cart(x_train, y_train, config.cart_max_depth, config.cart_min_samples_leaf);
      } else {
        MlpOptions mo = config.mlp;
        mo.rng_seed = cell.seed;
        fitted = fit_mlp(x_train, y_train, mo);
      }
      pred = predict_baseline(fitted, gather_rows(ds.x, rows_of(test_nodes)));
      cell.params = to_container(fitted);
    }
    cell.metrics = evaluate_metrics(y_test, pred);
  } catch (const std::exception& e) {
    cell.metrics.reset();
    cell.params.reset();
    cell.error = e.what();
    if (history) history->clear();
  }
  return cell;
}

std::string metric_text(const std::optional<Metrics>& m, double Metrics::*field) {
  return m ? format_double((*m).*field) : std::string("NA");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::span<const ModelKind> all_models() { return kModels; }

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Lr: return "lr";
    case ModelKind::Cart: return "cart";
    case ModelKind::Nn: return "nn";
    case ModelKind::Sage: return "sage";
  }
  return "?";
}

ModelKind parse_model(std::string_view name) {
  for (ModelKind m : kModels)
    if (model_name(m) == name) return m;
  throw ConfigError("unknown model '" + std::string(name) + "' (expected lr, cart, nn or sage)");
}

std::uint64_t cell_seed(std::uint64_t master_seed, Indicator indicator, ModelKind model) {
  return derive_seed(master_seed, 0xce11, static_cast<std::uint64_t>(indicator),
                     static_cast<std::uint64_t>(model));
}

std::uint64_t split_seed(std::uint64_t master_seed, Indicator indicator) {
  return derive_seed(master_seed, 0x5b1, static_cast<std::uint64_t>(indicator));
}

std::vector<Dataset> prepare_datasets(std::span<const SectionRecord> records, std::span<const Indicator> indicators,
                                      const ExperimentConfig& config) {
  std::vector<Dataset> out;
  out.reserve(indicators.size());
  for (Indicator ind : indicators) {
    const Dataset full = assemble_features(records, make_feature_spec(ind, config.treatment_encoding));
    out.push_back(split(full, config.test_fraction, split_seed(config.master_seed, ind)));
  }
  return out;
}

const CellResult& EvalReport::cell(Indicator indicator, ModelKind model) const {
  for (const auto& c : cells)
    if (c.indicator == indicator && c.model == model) return c;
  throw IndexError("report has no cell " + std::string(indicator_info(indicator).name) + "/" +
                   std::string(model_name(model)));
}

EvalReport run_experiment(std::span<const Dataset> datasets, std::span<const ModelKind> models,
                          const ExperimentConfig& config) {
  if (datasets.empty()) throw ConfigError("run_experiment: no indicators requested");
  if (models.empty()) throw ConfigError("run_experiment: no models requested");

  EvalReport report;
  report.master_seed = config.master_seed;
  report.models.assign(models.begin(), models.end());
  for (const auto& ds : datasets) report.indicators.push_back(ds.spec.target);
  report.dataset_checksum = dataset_checksum(datasets);
  report.config_json = config_to_json(config).dump();

  const std::size_t n_cells = datasets.size() * models.size();
  report.cells.resize(n_cells);
  std::vector<std::vector<EpochRecord>> histories(n_cells);

  auto work = [&](std::size_t i) {
    const Dataset& ds = datasets[i / models.size()];
    const ModelKind m = models[i % models.size()];
    report.cells[i] = run_cell(ds, m, config, m == ModelKind::Sage ? &histories[i] : nullptr);
  };

  const std::size_t jobs = std::clamp<std::size_t>(config.jobs, 1, n_cells);
  if (jobs == 1) {
    for (std::size_t i = 0; i < n_cells; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n_cells; i = next++) work(i);
      });
    }
  }

  for (std::size_t i = 0; i < n_cells; ++i) {
    if (report.cells[i].model == ModelKind::Sage) report.history[report.cells[i].indicator] = std::move(histories[i]);
  }
  return report;
}

std::string dataset_checksum(std::span<const Dataset> datasets) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& ds : datasets) {
    feed(static_cast<std::uint64_t>(ds.spec.target));
    feed(ds.x.rows());
    feed(ds.x.cols());
    for (double v : ds.x.values()) feed(std::bit_cast<std::uint64_t>(v));
    for (double v : ds.y) feed(std::bit_cast<std::uint64_t>(v));
    for (bool b : ds.train_mask) feed(b ? 1 : 0);
    for (const auto& [u, v] : ds.graph.edges()) feed((std::uint64_t{u} << 32) | v);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string comparison_csv(const EvalReport& report) {
  std::string out = "indicator";
  for (ModelKind m : report.models)
    for (const char* metric : {"r2", "mse", "mae"}) out += "," + std::string(model_name(m)) + "_" + metric;
  out += "\n";
  for (Indicator ind : report.indicators) {
    out += indicator_info(ind).name;
    for (ModelKind m : report.models) {
      const auto& c = report.cell(ind, m);
      out += "," + metric_text(c.metrics, &Metrics::r2);
      out += "," + metric_text(c.metrics, &Metrics::mse);
      out += "," + metric_text(c.metrics, &Metrics::mae);
    }
    out += "\n";
  }
  return out;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_r2,test_r2\n";
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : format_double(v); };
  for (const auto& r : history) out += std::to_string(r.epoch) + "," + num(r.train_r2) + "," + num(r.test_r2) + "\n";
  return out;
}

std::string manifest_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["format"] = "pavesage-report";
  j["master_seed"] = report.master_seed;
  j["dataset_checksum"] = report.dataset_checksum;
  j["metrics_protocol"] = "single train/test split per master seed; no averaging across seeds";
  std::vector<std::string> inds, models;
  for (Indicator i : report.indicators) inds.emplace_back(indicator_info(i).name);
  for (ModelKind m : report.models) models.emplace_back(model_name(m));
  j["indicators"] = inds;
  j["models"] = models;
  j["config"] = report.config_json.empty() ? nlohmann::ordered_json::object()
                                           : nlohmann::ordered_json::parse(report.config_json);
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    nlohmann::ordered_json cj;
    cj["indicator"] = indicator_info(c.indicator).name;
    cj["model"] = model_name(c.model);
    cj["seed"] = c.seed;
    cj["status"] = c.metrics ? "ok" : "failed";
    if (!c.error.empty()) cj["error"] = c.error;
    cells.push_back(cj);
  }
  j["cells"] = cells;
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory '" + out_dir.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    written.push_back(out_dir / name);
    write_text(written.back(), text);
  };
  emit("comparison.csv", comparison_csv(report));
  for (const auto& [ind, hist] : report.history)
    emit("history_" + std::string(indicator_info(ind).name) + ".csv", history_csv(hist));
  emit("manifest.json", manifest_json(report));
  return written;
}

}  // namespace pavesage
