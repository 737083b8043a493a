#include "spikeforge/harness.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "spikeforge/error.hpp"
#include "spikeforge/features.hpp"
#include "spikeforge/parallel.hpp"
#include "spikeforge/preprocess.hpp"
#include "spikeforge/stats.hpp"
#include "spikeforge/text_io.hpp"

namespace spikeforge {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Pipeline

PreparedCell prepare_cell(const Recording& rec) {
  const BinnedRecording binned = resample_to_common(rec, kCommonRateHz);
  PreparedCell cell;
  cell.cell_id = rec.cell_id;
  cell.dataset_id = rec.dataset_id;
  cell.fluorescence = preprocess_fluorescence(binned.fluorescence);
  cell.counts = binned.spike_counts;
  return cell;
}

std::vector<PreparedCell> prepare_dataset(const Dataset& dataset, int jobs) {
  std::vector<PreparedCell> cells(dataset.cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) { cells[i] = prepare_cell(dataset.cells[i]); });
  return cells;
}

TrainResult fit_pipeline(const std::vector<const PreparedCell*>& cells, const TrainConfig& cfg,
                         int jobs) {
  if (cells.empty()) throw DataError("fit_pipeline: no training cells");
  cfg.validate();
  WindowMoments moments;
  Eigen::Index total_rows = 0;
  for (const PreparedCell* c : cells) {
    moments.add(extract_windows(c->fluorescence, cfg.window_ms, kCommonRateHz));
    total_rows += static_cast<Eigen::Index>(c->fluorescence.size());
  }
  const PcaBasis basis = fit_pca(moments, cfg.variance_threshold);

  FeatureMatrix features;
  features.bin_rate_hz = kCommonRateHz;
  features.window_ms = cfg.window_ms;
  features.values.resize(total_rows, basis.n_kept());
  std::vector<int> counts;
  counts.reserve(static_cast<std::size_t>(total_rows));
  Eigen::Index row = 0;
  for (const PreparedCell* c : cells) {
    const FeatureMatrix f =
        project(basis, extract_windows(c->fluorescence, cfg.window_ms, kCommonRateHz));
    features.values.middleRows(row, f.rows()) = f.values;
    row += f.rows();
    counts.insert(counts.end(), c->counts.begin(), c->counts.end());
  }
  return train(features, counts, cfg, basis, jobs);
}

std::vector<double> predict_rates(const ModelEnsemble& ensemble, std::span<const double> fluorescence) {
  const Eigen::MatrixXd windows = extract_windows(fluorescence, ensemble.window_ms, ensemble.bin_rate_hz);
  const FeatureMatrix features =
      project(ensemble.pca_basis, windows, ensemble.bin_rate_hz, ensemble.window_ms);
  const Eigen::VectorXd r = ensemble_rates(ensemble, features.values);
  return {r.data(), r.data() + r.size()};
}

// ---------------------------------------------------------------------------
// Spec

std::string to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::Loocv: return "loocv";
    case Protocol::CrossDataset: return "cross_dataset";
    case Protocol::FreqSweep: return "freq_sweep";
    case Protocol::Complexity: return "complexity";
    case Protocol::SizeSweep: return "size_sweep";
  }
  return "unknown";
}

Protocol parse_protocol(const std::string& name) {
  for (Protocol p : {Protocol::Loocv, Protocol::CrossDataset, Protocol::FreqSweep,
                     Protocol::Complexity, Protocol::SizeSweep}) {
    if (to_string(p) == name) return p;
  }
  throw UsageError("unknown protocol '" + name +
                   "' (expected loocv, cross_dataset, freq_sweep, complexity or size_sweep)");
}

void ExperimentSpec::validate() const {
  if (eval_rates_hz.empty()) throw UsageError("experiment: eval_rates_hz is empty");
  for (double r : eval_rates_hz) rebin_factor(r, kCommonRateHz);
  for (const auto& m : models) m.config.validate();
  if (calibration_knots < 2) throw UsageError("experiment: calibration_knots must be >= 2");
  for (int s : sizes) {
    if (s < 1) throw UsageError("experiment: training sizes must be >= 1");
  }
}

json to_json(const ExperimentSpec& spec) {
  json models = json::array();
  for (const auto& m : spec.models) {
    json entry = to_json(m.config);
    entry["name"] = m.name;
    models.push_back(std::move(entry));
  }
  std::vector<std::string> datasets;
  for (const auto& d : spec.datasets) datasets.push_back(d.string());
  return {{"protocol", to_string(spec.protocol)},
          {"datasets", datasets},
          {"models", std::move(models)},
          {"baselines", spec.baselines},
          {"eval_rates_hz", spec.eval_rates_hz},
          {"seed", spec.seed},
          {"output", spec.output.string()},
          {"sizes", spec.sizes},
          {"calibration_knots", spec.calibration_knots},
          {"jobs", spec.jobs}};
}

ExperimentSpec experiment_spec_from_json(const json& doc) {
  static const std::set<std::string> known = {"protocol", "datasets", "models", "baselines",
                                              "eval_rates_hz", "seed", "output", "sizes",
                                              "calibration_knots", "jobs"};
  if (!doc.is_object()) throw UsageError("experiment spec must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) throw UsageError("experiment spec: unknown key '" + key + "'");
  }
  ExperimentSpec spec;
  try {
    spec.protocol = parse_protocol(doc.value("protocol", std::string("loocv")));
    for (const auto& d : doc.value("datasets", std::vector<std::string>{})) spec.datasets.emplace_back(d);
    spec.baselines = doc.value("baselines", spec.baselines);
    spec.seed = doc.value("seed", spec.seed);
    spec.output = doc.value("output", std::string());
    spec.sizes = doc.value("sizes", spec.sizes);
    spec.calibration_knots = doc.value("calibration_knots", spec.calibration_knots);
    spec.jobs = doc.value("jobs", spec.jobs);
    if (doc.contains("eval_rates_hz")) {
      spec.eval_rates_hz = doc.at("eval_rates_hz").get<std::vector<double>>();
    } else if (spec.protocol == Protocol::FreqSweep) {
      spec.eval_rates_hz = {2.0, 5.0, 10.0, 25.0, 50.0, 100.0};
    }
    if (doc.contains("models")) {
      for (json entry : doc.at("models")) {
        std::string name;
        if (entry.contains("name")) {
          name = entry.at("name").get<std::string>();
          entry.erase("name");
        }
        const bool has_seed = entry.contains("seed");
        MethodSpec m{name, train_config_from_json(entry)};
        if (!has_seed) m.config.seed = spec.seed;
        if (m.name.empty()) m.name = std::string(to_string(m.config.kind));
        spec.models.push_back(std::move(m));
      }
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("experiment spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Scoring

std::uint64_t fnv1a(const std::string& text, std::uint64_t hash) {
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ULL;
  }
  return hash;
}

const MetricsReport& ExperimentResult::report(const std::string& dataset_id, const std::string& method,
                                              double eval_rate_hz) const {
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (report_datasets[i] == dataset_id && reports[i].method == method &&
        reports[i].eval_rate_hz == eval_rate_hz) {
      return reports[i];
    }
  }
  throw UsageError("no report for " + dataset_id + "/" + method + " at " +
                   text::format_double(eval_rate_hz) + " Hz");
}

MetricsReport score_predictions(const std::string& method, const std::vector<std::string>& cell_ids,
                                const std::vector<std::vector<double>>& rates,
                                const std::vector<std::vector<int>>& counts, double eval_rate_hz,
                                int calibration_knots) {
  if (rates.size() != counts.size() || rates.size() != cell_ids.size()) {
    throw DataError("score_predictions: cells, rates and counts differ in number");
  }
  std::vector<std::vector<double>> binned_rates;
  std::vector<std::vector<int>> binned_counts;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    EvalBins b = rebin_for_eval(rates[i], counts[i], eval_rate_hz);
    binned_rates.push_back(std::move(b.rates));
    binned_counts.push_back(std::move(b.counts));
  }

  MetricsReport report;
  report.method = method;
  report.eval_rate_hz = eval_rate_hz;
  report.calibration = fit_calibration(binned_rates, binned_counts, calibration_knots);

  std::vector<double> ig, hm;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    CellScores s = evaluate(rates[i], counts[i], eval_rate_hz, &report.calibration);
    s.cell_id = cell_ids[i];
    if (!s.zero_rate) {
      ig.push_back(s.info_gain_bits_per_bin);
      hm.push_back(s.marginal_entropy_bits_per_bin);
    }
    report.per_cell.push_back(std::move(s));
  }
  if (!ig.empty()) report.relative_info_gain = relative_information_gain(ig, hm);
  return report;
}

DeconvConfig tune_deconvolution(const std::vector<const PreparedCell*>& cells, double eval_rate_hz) {
  const auto grid = default_deconv_grid();
  const int factor = rebin_factor(eval_rate_hz, kCommonRateHz);
  DeconvConfig best = grid.front();
  double best_score = -INFINITY;
  for (const auto& cfg : grid) {
    double total = 0.0;
    for (const PreparedCell* c : cells) {
      const auto pred = rebin_rates(deconvolve(c->fluorescence, cfg, kCommonRateHz), factor);
      total += correlation(pred, rebin_counts(c->counts, factor)).value;
    }
    if (total > best_score) {
      best_score = total;
      best = cfg;
    }
  }
  return best;
}

namespace {

constexpr const char* kRawMethod = "raw";
constexpr const char* kDeconvMethod = "deconv";
// Grid choice is made at one fixed rate so it does not depend on which
// evaluation rates a run happens to request.
constexpr double kDeconvTuneRateHz = 25.0;

std::vector<MethodSpec> resolved_models(const ExperimentSpec& spec, Protocol protocol) {
  if (!spec.models.empty()) return spec.models;
  std::vector<ModelKind> kinds = {ModelKind::Stm};
  if (protocol == Protocol::Complexity) kinds = {ModelKind::Stm, ModelKind::Lnp, ModelKind::Mlnn};
  std::vector<MethodSpec> out;
  for (ModelKind k : kinds) {
    TrainConfig cfg;
    cfg.kind = k;
    cfg.seed = spec.seed;
    out.push_back({std::string(to_string(k)), cfg});
  }
  return out;
}

std::vector<std::string> method_names(const std::vector<MethodSpec>& models, bool baselines) {
  std::vector<std::string> names;
  for (const auto& m : models) names.push_back(m.name);
  if (baselines) {
    names.emplace_back(kRawMethod);
    names.emplace_back(kDeconvMethod);
  }
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) throw UsageError("experiment: method names must be unique");
  return names;
}

// One training/evaluation split. `test` indexes into the evaluated dataset.
struct FoldPlan {
  Fold fold;
  std::vector<const PreparedCell*> train;
  std::vector<std::size_t> test;
};

Fold make_fold(const std::string& dataset_id, const std::vector<const PreparedCell*>& train,
               const std::vector<const PreparedCell*>& test) {
  Fold f;
  f.dataset_id = dataset_id;
  std::uint64_t h = fnv1a(dataset_id);
  for (const auto* c : test) {
    f.held_out.push_back(c->cell_id);
    h = fnv1a("|test:" + c->dataset_id + "/" + c->cell_id, h);
  }
  for (const auto* c : train) {
    f.train.push_back(c->cell_id);
    h = fnv1a("|train:" + c->dataset_id + "/" + c->cell_id, h);
  }
  f.hash = h;
  return f;
}

// Runs every method on every fold of one evaluated dataset.
DatasetPredictions predict_dataset(const std::string& dataset_id,
                                   const std::vector<PreparedCell>& cells,
                                   const std::vector<FoldPlan>& plans,
                                   const std::vector<MethodSpec>& models, const ExperimentSpec& spec) {
  DatasetPredictions out;
  out.dataset_id = dataset_id;
  for (const auto& c : cells) {
    out.cell_ids.push_back(c.cell_id);
    out.counts.push_back(c.counts);
  }
  const auto names = method_names(models, spec.baselines);
  for (const auto& n : names) {
    MethodPredictions mp;
    mp.method = n;
    mp.rates.resize(cells.size());
    if (n == kDeconvMethod) mp.deconv_choice.resize(plans.size());
    out.methods.push_back(std::move(mp));
  }
  for (const auto& p : plans) out.folds.push_back(p.fold);

  // Folds fan out; methods within a fold run in order.
  parallel_for(plans.size(), spec.jobs, [&](std::size_t f) {
    const FoldPlan& plan = plans[f];
    for (std::size_t m = 0; m < models.size(); ++m) {
      const TrainResult trained = fit_pipeline(plan.train, models[m].config, 1);
      for (std::size_t i : plan.test) {
        out.methods[m].rates[i] = predict_rates(trained.ensemble, cells[i].fluorescence);
      }
    }
    if (spec.baselines) {
      MethodPredictions& raw = out.methods[models.size()];
      MethodPredictions& deconv = out.methods[models.size() + 1];
      const DeconvConfig choice = tune_deconvolution(plan.train, kDeconvTuneRateHz);
      deconv.deconv_choice[f] = choice;
      for (std::size_t i : plan.test) {
        raw.rates[i] = raw_predict(cells[i].fluorescence);
        deconv.rates[i] = deconvolve(cells[i].fluorescence, choice, kCommonRateHz);
      }
    }
  });
  return out;
}

void score_dataset(const DatasetPredictions& preds, const ExperimentSpec& spec, ExperimentResult& result) {
  for (const auto& m : preds.methods) {
    for (double rate : spec.eval_rates_hz) {
      result.reports.push_back(
          score_predictions(m.method, preds.cell_ids, m.rates, preds.counts, rate, spec.calibration_knots));
      result.report_datasets.push_back(preds.dataset_id);
    }
  }
}

std::string num(double v) { return std::isfinite(v) ? text::format_double(v) : std::string("nan"); }

std::vector<double> column(const MetricsReport& r, double CellScores::*field) {
  std::vector<double> out;
  for (const auto& c : r.per_cell) out.push_back(c.*field);
  return out;
}

std::string summary_table(const ExperimentResult& result) {
  std::string out =
      "dataset,method,eval_rate_hz,n_cells,mean_correlation,sem_correlation,mean_info_gain,"
      "relative_info_gain,mean_auc\n";
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const auto& r = result.reports[i];
    const auto corr = column(r, &CellScores::correlation);
    out += result.report_datasets[i] + "," + r.method + "," + num(r.eval_rate_hz) + "," +
           std::to_string(r.per_cell.size()) + "," + num(mean_of(corr)) + "," + num(sem_of(corr)) + "," +
           num(r.mean_info_gain()) + "," + num(r.relative_info_gain) + "," + num(r.mean_auc()) + "\n";
  }
  return out;
}

json fold_json(const Fold& f) {
  return {{"dataset_id", f.dataset_id}, {"held_out", f.held_out}, {"train", f.train}, {"hash", f.hash}};
}

json base_record(const ExperimentSpec& spec, const std::vector<MethodSpec>& models, Protocol protocol) {
  ExperimentSpec resolved = spec;
  resolved.protocol = protocol;
  resolved.models = models;
  return {{"format_version", 1},
          {"spec", to_json(resolved)},
          {"fold_unit", "recording"},
          {"sem", "plain standard error of per-cell scores"},
          {"deconv_baseline", "moving-average smoothing + first-order inverse filter (stand-in)"},
          {"deconv_tune_rate_hz", kDeconvTuneRateHz},
          {"folds", json::array()}};
}

void record_predictions(json& record, const DatasetPredictions& preds) {
  for (const auto& f : preds.folds) record["folds"].push_back(fold_json(f));
  for (const auto& m : preds.methods) {
    if (m.deconv_choice.empty()) continue;
    json choices = json::array();
    for (const auto& c : m.deconv_choice) {
      choices.push_back({{"smooth_cutoff_hz", c.smooth_cutoff_hz}, {"tau_s", c.tau_s}});
    }
    record["deconv_choice"][preds.dataset_id] = std::move(choices);
  }
}

std::vector<std::vector<PreparedCell>> prepare_all(const std::vector<Dataset>& datasets, int jobs) {
  std::vector<std::vector<PreparedCell>> out;
  for (const auto& d : datasets) out.push_back(prepare_dataset(d, jobs));
  return out;
}

std::vector<FoldPlan> loocv_plans(const std::string& dataset_id, const std::vector<PreparedCell>& cells) {
  std::vector<FoldPlan> plans;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    FoldPlan p;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j != i) p.train.push_back(&cells[j]);
    }
    p.test = {i};
    p.fold = make_fold(dataset_id, p.train, {&cells[i]});
    plans.push_back(std::move(p));
  }
  return plans;
}

ExperimentResult loocv_impl(const std::vector<Dataset>& datasets, const ExperimentSpec& spec,
                            Protocol protocol) {
  spec.validate();
  if (datasets.empty()) throw UsageError("experiment: no datasets");
  const auto models = resolved_models(spec, protocol);
  const auto prepared = prepare_all(datasets, spec.jobs);

  ExperimentResult result;
  result.protocol = protocol;
  result.record = base_record(spec, models, protocol);
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    if (prepared[d].size() < 2) {
      throw DataError("loocv: dataset '" + datasets[d].dataset_id + "' needs at least 2 cells");
    }
    const auto plans = loocv_plans(datasets[d].dataset_id, prepared[d]);
    DatasetPredictions preds = predict_dataset(datasets[d].dataset_id, prepared[d], plans, models, spec);
    score_dataset(preds, spec, result);
    record_predictions(result.record, preds);
    result.predictions.push_back(std::move(preds));
  }
  result.tables["summary.csv"] = summary_table(result);
  return result;
}

}  // namespace

ExperimentResult run_loocv(const std::vector<Dataset>& datasets, const ExperimentSpec& spec) {
  return loocv_impl(datasets, spec, Protocol::Loocv);
}

ExperimentResult run_freq_sweep(const std::vector<Dataset>& datasets, const ExperimentSpec& spec) {
  ExperimentResult result = loocv_impl(datasets, spec, Protocol::FreqSweep);
  std::string table =
      "dataset,method,eval_rate_hz,mean_correlation,sem_correlation,mean_info_gain,"
      "relative_info_gain,mean_auc\n";
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const auto& r = result.reports[i];
    const auto corr = column(r, &CellScores::correlation);
    table += result.report_datasets[i] + "," + r.method + "," + num(r.eval_rate_hz) + "," +
             num(mean_of(corr)) + "," + num(sem_of(corr)) + "," + num(r.mean_info_gain()) + "," +
             num(r.relative_info_gain) + "," + num(r.mean_auc()) + "\n";
  }
  result.tables["freq_sweep.csv"] = std::move(table);
  return result;
}

ExperimentResult run_complexity(const std::vector<Dataset>& datasets, const ExperimentSpec& spec) {
  ExperimentResult result = loocv_impl(datasets, spec, Protocol::Complexity);
  const auto models = resolved_models(spec, Protocol::Complexity);
  if (models.size() < 2) throw UsageError("complexity: need at least two models");
  const std::string& reference = models.front().name;

  std::string table =
      "dataset,eval_rate_hz,reference,other,metric,mean_difference,n,statistic,p_value,exact\n";
  for (const auto& preds : result.predictions) {
    for (double rate : spec.eval_rates_hz) {
      const MetricsReport& ref = result.report(preds.dataset_id, reference, rate);
      for (std::size_t m = 1; m < models.size(); ++m) {
        const MetricsReport& other = result.report(preds.dataset_id, models[m].name, rate);
        for (auto [metric, field] : {std::pair{"correlation", &CellScores::correlation},
                                     std::pair{"info_gain", &CellScores::info_gain_bits_per_bin},
                                     std::pair{"auc", &CellScores::auc}}) {
          const auto a = column(ref, field);
          const auto b = column(other, field);
          std::vector<double> diff(a.size());
          for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
          const SignRankResult test = wilcoxon_signed_rank(diff);
          table += preds.dataset_id + "," + num(rate) + "," + reference + "," + models[m].name + "," +
                   metric + "," + num(mean_of(diff)) + "," + std::to_string(test.n) + "," +
                   num(test.statistic) + "," + num(test.p_value) + "," + (test.exact ? "1" : "0") + "\n";
        }
      }
    }
  }
  // Every method is evaluated on the same fold list.
  for (const auto& preds : result.predictions) {
    std::uint64_t h = 0;
    for (const auto& f : preds.folds) h = fnv1a(std::to_string(f.hash), h ^ 0x9e3779b97f4a7c15ULL);
    for (const auto& m : preds.methods) result.record["fold_hashes"][preds.dataset_id][m.method] = h;
  }
  result.tables["complexity.csv"] = std::move(table);
  return result;
}

ExperimentResult run_cross_dataset(const std::vector<Dataset>& datasets, const ExperimentSpec& spec) {
  spec.validate();
  if (datasets.size() < 2) throw DataError("cross_dataset: need at least 2 datasets");
  const auto models = resolved_models(spec, Protocol::CrossDataset);
  const auto prepared = prepare_all(datasets, spec.jobs);

  ExperimentResult result;
  result.protocol = Protocol::CrossDataset;
  result.record = base_record(spec, models, Protocol::CrossDataset);
  std::size_t total_cells = 0;
  for (const auto& p : prepared) total_cells += p.size();

  for (std::size_t target = 0; target < datasets.size(); ++target) {
    FoldPlan plan;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      if (d == target) continue;
      for (const auto& c : prepared[d]) plan.train.push_back(&c);
    }
    std::vector<const PreparedCell*> test;
    for (std::size_t i = 0; i < prepared[target].size(); ++i) {
      plan.test.push_back(i);
      test.push_back(&prepared[target][i]);
    }
    if (plan.train.size() != total_cells - prepared[target].size()) {
      throw Error("cross_dataset: training pool size mismatch");
    }
    plan.fold = make_fold(datasets[target].dataset_id, plan.train, test);
    DatasetPredictions preds =
        predict_dataset(datasets[target].dataset_id, prepared[target], {plan}, models, spec);
    score_dataset(preds, spec, result);
    record_predictions(result.record, preds);
    result.predictions.push_back(std::move(preds));
  }
  result.tables["summary.csv"] = summary_table(result);
  return result;
}

ExperimentResult run_size_sweep(const std::vector<Dataset>& datasets, const ExperimentSpec& spec) {
  spec.validate();
  if (datasets.empty()) throw UsageError("experiment: no datasets");
  const auto models = resolved_models(spec, Protocol::SizeSweep);
  const auto prepared = prepare_all(datasets, spec.jobs);

  ExperimentResult result;
  result.protocol = Protocol::SizeSweep;
  result.record = base_record(spec, models, Protocol::SizeSweep);
  std::string table =
      "dataset,method,train_size,eval_rate_hz,mean_correlation,sem_correlation,mean_info_gain,"
      "relative_info_gain,mean_auc\n";

  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto& cells = prepared[d];
    const std::string& id = datasets[d].dataset_id;
    if (cells.size() < 3) throw DataError("size_sweep: dataset '" + id + "' needs at least 3 cells");
    std::vector<int> sizes = spec.sizes;
    if (sizes.empty()) {
      for (int s = 1; s < static_cast<int>(cells.size()); ++s) sizes.push_back(s);
    }
    for (int size : sizes) {
      if (size > static_cast<int>(cells.size()) - 1) {
        throw UsageError("size_sweep: size " + std::to_string(size) + " exceeds available cells");
      }
      std::vector<FoldPlan> plans;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        std::vector<const PreparedCell*> pool;
        for (std::size_t j = 0; j < cells.size(); ++j) {
          if (j != i) pool.push_back(&cells[j]);
        }
        std::mt19937_64 rng(spec.seed ^ fnv1a(id + "/" + std::to_string(size) + "/" + std::to_string(i)));
        // Partial Fisher-Yates; first `size` entries form the subset.
        for (int k = 0; k < size; ++k) {
          std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
          std::swap(pool[k], pool[pick(rng)]);
        }
        FoldPlan p;
        p.train.assign(pool.begin(), pool.begin() + size);
        p.test = {i};
        p.fold = make_fold(id, p.train, {&cells[i]});
        plans.push_back(std::move(p));
      }
      DatasetPredictions preds = predict_dataset(id, cells, plans, models, spec);
      ExperimentResult scored;
      score_dataset(preds, spec, scored);
      for (std::size_t r = 0; r < scored.reports.size(); ++r) {
        const auto& rep = scored.reports[r];
        const auto corr = column(rep, &CellScores::correlation);
        table += id + "," + rep.method + "," + std::to_string(size) + "," + num(rep.eval_rate_hz) + "," +
                 num(mean_of(corr)) + "," + num(sem_of(corr)) + "," + num(rep.mean_info_gain()) + "," +
                 num(rep.relative_info_gain) + "," + num(rep.mean_auc()) + "\n";
        result.reports.push_back(rep);
        result.reports.back().method = rep.method + "@" + std::to_string(size);
        result.report_datasets.push_back(id);
      }
      record_predictions(result.record, preds);
      result.predictions.push_back(std::move(preds));
    }
  }
  result.tables["size_sweep.csv"] = std::move(table);
  result.tables["summary.csv"] = summary_table(result);
  return result;
}

ExperimentResult run_experiment(const std::vector<Dataset>& datasets, const ExperimentSpec& spec) {
  switch (spec.protocol) {
    case Protocol::Loocv: return run_loocv(datasets, spec);
    case Protocol::CrossDataset: return run_cross_dataset(datasets, spec);
    case Protocol::FreqSweep: return run_freq_sweep(datasets, spec);
    case Protocol::Complexity: return run_complexity(datasets, spec);
    case Protocol::SizeSweep: return run_size_sweep(datasets, spec);
  }
  throw UsageError("invalid protocol");
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.datasets.empty()) throw UsageError("experiment: no datasets listed");
  std::vector<Dataset> datasets;
  for (const auto& path : spec.datasets) datasets.push_back(load_dataset(path));
  ExperimentResult result = run_experiment(datasets, spec);
  if (!spec.output.empty()) write_experiment(result, spec.output);
  return result;
}

void write_experiment(const ExperimentResult& result, const fs::path& dir) {
  fs::create_directories(dir / "reports");
  text::write_file(dir / "experiment.json", result.record.dump(2) + "\n");
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const auto& r = result.reports[i];
    std::string stem = result.report_datasets[i] + "__" + r.method + "__" + num(r.eval_rate_hz) + "Hz";
    std::replace(stem.begin(), stem.end(), '@', '_');
    save_metrics_report(r, dir / "reports" / (stem + ".json"));
    text::write_file(dir / "reports" / (stem + ".csv"), to_csv(r));
  }
  for (const auto& [name, contents] : result.tables) text::write_file(dir / name, contents);
}

}  // namespace spikeforge
