#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pavesage/baselines.hpp"
#include "pavesage/error.hpp"
#include "pavesage/experiment.hpp"
#include "pavesage/features.hpp"
#include "pavesage/gradcheck.hpp"
#include "pavesage/metrics.hpp"
#include "pavesage/param_io.hpp"
#include "pavesage/records.hpp"
#include "pavesage/sage.hpp"
#include "pavesage/synthetic.hpp"

using namespace pavesage;

namespace {

void make_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
}

constexpr double kGradTolerance = 1e-4;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  for (const auto& tok : split_list(text)) {
    if (tok == "all") {
      out.push_back(kAllNeighbors);
      continue;
    }
    try {
      std::size_t pos = 0;
      const auto v = std::stoul(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad ") + what + " entry '" + tok + "'");
    }
  }
  return out;
}

std::vector<SectionRecord> load_records(const std::string& path) {
  LoadResult res = load_csv(path);
  for (const auto& d : res.report.diagnostics)
    std::cerr << path << ":" << d.line << ": dropped row (" << d.column << "): " << d.message << "\n";
  if (res.records.empty()) throw DataError("no usable rows in '" + path + "'");
  return std::move(res.records);
}

struct ModelFlags {
  std::size_t epochs = 0;  // 0 keeps each model's default
  std::string fanouts;
  std::string hidden;
  double lr_rate = 0.0;
  std::size_t batch_size = 0;
  std::size_t patience = 0;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--epochs", f.epochs, "Training epochs (GraphSAGE and NN)");
  cmd->add_option("--fanouts", f.fanouts, "Per-hop sample sizes, e.g. 25,10 ('all' takes every neighbor)");
  cmd->add_option("--hidden", f.hidden, "GraphSAGE hidden widths, e.g. 256,256");
  cmd->add_option("--lr-rate", f.lr_rate, "Adam learning rate");
  cmd->add_option("--batch-size", f.batch_size, "Mini-batch size");
  cmd->add_option("--patience", f.patience, "GraphSAGE early-stopping patience in epochs");
}

void apply_model_flags(const ModelFlags& f, ExperimentConfig& cfg) {
  if (f.epochs) cfg.sage.epochs = cfg.mlp.epochs = f.epochs;
  if (!f.fanouts.empty()) cfg.sage.fanouts = parse_sizes(f.fanouts, "fanout");
  if (!f.hidden.empty()) cfg.sage.hidden_dims = parse_sizes(f.hidden, "hidden width");
  cfg.sage.n_layers = cfg.sage.hidden_dims.size();
  if (f.lr_rate > 0.0) cfg.sage.learning_rate = cfg.mlp.learning_rate = f.lr_rate;
  if (f.batch_size) cfg.sage.batch_size = cfg.mlp.batch_size = f.batch_size;
  if (f.patience) cfg.sage.patience = f.patience;
  cfg.sage.validate();
}

std::string encoding_name(TreatmentEncoding e) { return e == TreatmentEncoding::Level ? "level" : "per_treatment"; }

TreatmentEncoding parse_encoding(const std::string& s) {
  if (s == "level") return TreatmentEncoding::Level;
  if (s == "per_treatment") return TreatmentEncoding::PerTreatment;
  throw ConfigError("unknown treatment encoding '" + s + "' (expected level or per_treatment)");
}

// The dataset context a saved model needs to be re-applied to a CSV.
void attach_dataset(ParamContainer& c, const Dataset& ds, const ExperimentConfig& cfg) {
  c.meta["data.indicator"] = std::string(indicator_info(ds.spec.target).name);
  c.meta["data.treatment_encoding"] = encoding_name(ds.spec.treatment_encoding);
  c.meta["data.master_seed"] = std::to_string(cfg.master_seed);
  c.meta["data.test_fraction"] = format_double(cfg.test_fraction);
  c.matrices["data.median"] = DenseMatrix(1, ds.spec.width(), ds.stats.median);
  c.matrices["data.mean"] = DenseMatrix(1, ds.spec.width(), ds.stats.mean);
  c.matrices["data.sd"] = DenseMatrix(1, ds.spec.width(), ds.stats.sd);
}

void print_metrics(const std::string& label, const Metrics& m) {
  std::printf("%s r2=%.6f mse=%.6g mae=%.6g\n", label.c_str(), m.r2, m.mse, m.mae);
}

int cmd_generate(std::size_t nodes, std::size_t routes, double rho, std::uint64_t seed, double missing,
                 const std::string& out, const std::string& truth_out) {
  SyntheticOptions opt;
  opt.n_nodes = nodes;
  opt.n_routes = routes;
  opt.rho = rho;
  opt.seed = seed;
  opt.missing_rate = missing;
  SyntheticData data = generate_synthetic(opt);
  make_parent(out);
  write_csv(out, data.records);
  if (!truth_out.empty()) make_parent(truth_out);
  if (!truth_out.empty()) write_ground_truth(truth_out, data.records, data.truth);
  const RoadGraph g = build_graph(data.records);
  std::printf("wrote %zu sections (%zu edges, latent neighbor correlation %.3f) to %s\n", data.records.size(),
              g.n_edges(), neighbor_correlation(g, data.truth.latent), out.c_str());
  return 0;
}

int cmd_train(const std::string& data, const std::string& indicator, const std::string& model_name_,
              std::uint64_t seed, double test_fraction, const std::string& encoding, const ModelFlags& flags,
              const std::string& params_out) {
  ExperimentConfig cfg;
  cfg.master_seed = seed;
  cfg.test_fraction = test_fraction;
  cfg.treatment_encoding = parse_encoding(encoding);
  apply_model_flags(flags, cfg);
  const Indicator ind = parse_indicator(indicator);
  const ModelKind model = parse_model(model_name_);

  const auto records = load_records(data);
  const std::vector<Indicator> inds{ind};
  const auto datasets = prepare_datasets(records, inds, cfg);
  const std::vector<ModelKind> models{model};
  EvalReport report = run_experiment(datasets, models, cfg);
  CellResult& cell = report.cells.front();
  if (!cell.metrics) throw Error(std::string(model_name(model)) + " on " + indicator + " failed: " + cell.error);
  print_metrics(std::string(model_name(model)) + "/" + indicator + " test", *cell.metrics);
  if (model == ModelKind::Sage) {
    const auto& h = report.history.at(ind);
    if (!h.empty()) std::printf("trained %zu epochs\n", h.size());
  }
  if (!params_out.empty()) {
    attach_dataset(*cell.params, datasets.front(), cfg);
    make_parent(params_out);
    save_container(params_out, *cell.params);
    std::printf("saved parameters to %s\n", params_out.c_str());
  }
  return 0;
}

int cmd_evaluate(const std::string& data, const std::string& params_path, const std::string& out) {
  const ParamContainer c = load_container(params_path);
  const Indicator ind = parse_indicator(c.meta_value("data.indicator"));
  ExperimentConfig cfg;
  cfg.treatment_encoding = parse_encoding(c.meta_value("data.treatment_encoding"));
  cfg.master_seed = std::stoull(c.meta_value("data.master_seed"));
  cfg.test_fraction = std::stod(c.meta_value("data.test_fraction"));

  const auto records = load_records(data);
  const std::vector<Indicator> inds{ind};
  Dataset ds = prepare_datasets(records, inds, cfg).front();
  ColumnStats stats{std::vector<double>(c.matrix("data.median").values().begin(), c.matrix("data.median").values().end()),
                    std::vector<double>(c.matrix("data.mean").values().begin(), c.matrix("data.mean").values().end()),
                    std::vector<double>(c.matrix("data.sd").values().begin(), c.matrix("data.sd").values().end())};
  if (stats.mean.size() != ds.spec.width()) {
    throw ShapeError("saved statistics have " + std::to_string(stats.mean.size()) + " columns, data has " +
                     std::to_string(ds.spec.width()));
  }
  ds.x = apply_stats(ds.raw, ds.spec, stats);

  std::vector<double> pred(ds.x.rows());
  if (c.kind == "sage") {
    const SageParams p = sage_from_container(c, ds.spec.width());
    const DenseMatrix all = predict(ds.graph, ds.x, p);
    for (std::size_t v = 0; v < pred.size(); ++v) pred[v] = all(v, 0);
  } else {
    pred = predict_baseline(baseline_from_container(c), ds.x);
  }

  std::vector<double> yt, yp;
  for (NodeId v : ds.test_nodes()) {
    yt.push_back(ds.y[v]);
    yp.push_back(pred[v]);
  }
  print_metrics(c.kind + "/" + std::string(indicator_info(ind).name) + " test", evaluate_metrics(yt, yp));

  if (!out.empty()) {
    std::string text = "section_id,split,y_true,y_pred\n";
    for (std::size_t v = 0; v < pred.size(); ++v) {
      const char* role = !ds.labelled(v) ? "unlabelled" : ds.train_mask[v] ? "train" : "test";
      text += ds.section_ids[v] + "," + role + "," + (ds.labelled(v) ? format_double(ds.y[v]) : "") + "," +
              format_double(pred[v]) + "\n";
    }
    make_parent(out);
    std::ofstream f(out, std::ios::binary);
    if (!f) throw IoError("cannot open '" + out + "' for writing");
    f << text;
    if (!f) throw IoError("failed writing '" + out + "'");
    std::printf("wrote predictions to %s\n", out.c_str());
  }
  return 0;
}

int cmd_compare(const std::string& data, const std::string& indicators_arg, const std::string& models_arg,
                std::uint64_t seed, double test_fraction, const std::string& encoding, std::size_t jobs,
                const ModelFlags& flags, const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.master_seed = seed;
  cfg.test_fraction = test_fraction;
  cfg.treatment_encoding = parse_encoding(encoding);
  cfg.jobs = jobs;
  apply_model_flags(flags, cfg);

  std::vector<Indicator> inds;
  if (indicators_arg == "all") {
    for (const auto& info : indicators()) inds.push_back(info.id);
  } else {
    for (const auto& tok : split_list(indicators_arg)) inds.push_back(parse_indicator(tok));
  }
  std::vector<ModelKind> models;
  if (models_arg == "all") {
    models.assign(all_models().begin(), all_models().end());
  } else {
    for (const auto& tok : split_list(models_arg)) models.push_back(parse_model(tok));
  }

  const auto records = load_records(data);
  const auto datasets = prepare_datasets(records, inds, cfg);
  const EvalReport report = run_experiment(datasets, models, cfg);
  for (const auto& path : emit_report(report, out_dir)) std::printf("wrote %s\n", path.string().c_str());
  for (const auto& cell : report.cells) {
    const std::string label = std::string(indicator_info(cell.indicator).name) + "/" + std::string(model_name(cell.model));
    if (cell.metrics) {
      print_metrics(label, *cell.metrics);
    } else {
      std::printf("%s failed: %s\n", label.c_str(), cell.error.c_str());
    }
  }
  return 0;
}

int cmd_gradcheck(std::size_t points, std::uint64_t seed) {
  double worst = 0.0;
  for (const auto& e : run_gradient_suite(points, seed)) {
    std::printf("%-14s points=%zu max_rel_error=%.3e\n", e.name.c_str(), e.points, e.max_rel_error);
    worst = std::max(worst, e.max_rel_error);
  }
  std::printf("max relative error %.3e (tolerance %.0e)\n", worst, kGradTolerance);
  return worst <= kGradTolerance ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GraphSAGE pavement-condition regression on road networks"};
  app.require_subcommand(1);

  // generate
  std::size_t g_nodes = 2000, g_routes = 40;
  double g_rho = 0.8, g_missing = 0.0;
  std::uint64_t g_seed = 0;
  std::string g_out, g_truth;
  auto* gen = app.add_subcommand("generate", "Write a synthetic section table with spatially correlated condition");
  gen->add_option("--nodes", g_nodes, "Number of sections")->capture_default_str();
  gen->add_option("--routes", g_routes, "Number of routes")->capture_default_str();
  gen->add_option("--rho", g_rho, "Spatial correlation strength in [0, 1]")->capture_default_str();
  gen->add_option("--seed", g_seed, "Random seed")->capture_default_str();
  gen->add_option("--missing-rate", g_missing, "Probability of blanking each numeric cell")->capture_default_str();
  gen->add_option("--out", g_out, "Output CSV")->required();
  gen->add_option("--truth-out", g_truth, "Optional ground-truth sidecar CSV");

  // train
  std::string t_data, t_indicator = "iri", t_model = "sage", t_params, t_encoding = "level";
  std::uint64_t t_seed = 0;
  double t_fraction = 0.2;
  ModelFlags t_flags;
  auto* tr = app.add_subcommand("train", "Train one model on one indicator and report test metrics");
  tr->add_option("--data", t_data, "Section CSV")->required();
  tr->add_option("--indicator", t_indicator, "Target indicator")->capture_default_str();
  tr->add_option("--model", t_model, "lr, cart, nn or sage")->capture_default_str();
  tr->add_option("--seed", t_seed, "Master seed (split and initialisation)")->capture_default_str();
  tr->add_option("--test-fraction", t_fraction, "Share of labelled sections held out")->capture_default_str();
  tr->add_option("--treatment-encoding", t_encoding, "level or per_treatment")->capture_default_str();
  tr->add_option("--params-out", t_params, "Where to save the fitted parameters");
  add_model_flags(tr, t_flags);

  // evaluate
  std::string e_data, e_params, e_out;
  auto* ev = app.add_subcommand("evaluate", "Score saved parameters on a section CSV");
  ev->add_option("--data", e_data, "Section CSV")->required();
  ev->add_option("--params", e_params, "Parameter file from train")->required();
  ev->add_option("--out", e_out, "Optional per-section prediction CSV");

  // compare
  std::string c_data, c_inds = "all", c_models = "all", c_out = "report", c_encoding = "level";
  std::uint64_t c_seed = 0;
  double c_fraction = 0.2;
  std::size_t c_jobs = 1;
  ModelFlags c_flags;
  auto* cmp = app.add_subcommand("compare", "Train every model on every indicator and write the comparison report");
  cmp->add_option("--data", c_data, "Section CSV")->required();
  cmp->add_option("--indicators", c_inds, "Comma-separated indicators or 'all'")->capture_default_str();
  cmp->add_option("--models", c_models, "Comma-separated models or 'all'")->capture_default_str();
  cmp->add_option("--seed", c_seed, "Master seed")->capture_default_str();
  cmp->add_option("--test-fraction", c_fraction, "Share of labelled sections held out")->capture_default_str();
  cmp->add_option("--treatment-encoding", c_encoding, "level or per_treatment")->capture_default_str();
  cmp->add_option("--jobs", c_jobs, "Cells trained in parallel")->capture_default_str();
  cmp->add_option("--out-dir", c_out, "Report directory")->capture_default_str();
  add_model_flags(cmp, c_flags);

  // gradcheck
  std::size_t k_points = 100;
  std::uint64_t k_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
  gc->add_option("--points", k_points, "Random points per check")->capture_default_str();
  gc->add_option("--seed", k_seed, "Random seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(g_nodes, g_routes, g_rho, g_seed, g_missing, g_out, g_truth);
    if (*tr) return cmd_train(t_data, t_indicator, t_model, t_seed, t_fraction, t_encoding, t_flags, t_params);
    if (*ev) return cmd_evaluate(e_data, e_params, e_out);
    if (*cmp) return cmd_compare(c_data, c_inds, c_models, c_seed, c_fraction, c_encoding, c_jobs, c_flags, c_out);
    if (*gc) return cmd_gradcheck(k_points, k_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
