#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "spikeforge/baselines.hpp"
#include "spikeforge/metrics.hpp"
#include "spikeforge/models.hpp"
#include "spikeforge/signal_io.hpp"
#include "spikeforge/trainer.hpp"

namespace spikeforge {

// ---------------------------------------------------------------------------
// Shared pipeline (also used by the CLI's train/infer commands)

// A recording on the 100 Hz grid with preprocessed fluorescence.
struct PreparedCell {
  std::string cell_id;
  std::string dataset_id;
  std::vector<double> fluorescence;
  std::vector<int> counts;
};

PreparedCell prepare_cell(const Recording& rec);
std::vector<PreparedCell> prepare_dataset(const Dataset& dataset, int jobs = 1);

// Pools windows of `cells`, fits the PCA basis on them alone, and trains an
// ensemble on the projected windows.
TrainResult fit_pipeline(const std::vector<const PreparedCell*>& cells, const TrainConfig& cfg,
                         int jobs = 1);

// Expected spikes per 100 Hz bin for a prepared trace.
std::vector<double> predict_rates(const ModelEnsemble& ensemble, std::span<const double> fluorescence);

// ---------------------------------------------------------------------------
// Experiment description

enum class Protocol { Loocv, CrossDataset, FreqSweep, Complexity, SizeSweep };

std::string to_string(Protocol protocol);
Protocol parse_protocol(const std::string& name);

struct MethodSpec {
  std::string name;
  TrainConfig config;
};

struct ExperimentSpec {
  Protocol protocol = Protocol::Loocv;
  std::vector<std::filesystem::path> datasets;
  std::vector<MethodSpec> models;
  bool baselines = true;
  std::vector<double> eval_rates_hz = {25.0};
  std::uint64_t seed = 0;
  std::filesystem::path output;
  // Training-set sizes for the size sweep; empty means 1..N-1.
  std::vector<int> sizes;
  int calibration_knots = 10;
  int jobs = 1;

  void validate() const;
};

nlohmann::json to_json(const ExperimentSpec& spec);
// Model entries are train configs with an optional "name". The experiment
// seed is used for every model that does not set its own.
ExperimentSpec experiment_spec_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Results

struct Fold {
  std::string dataset_id;
  std::vector<std::string> held_out;
  std::vector<std::string> train;
  std::uint64_t hash = 0;  // FNV-1a over the member lists
};

// Per-method 100 Hz predictions for every evaluated cell, in dataset order.
struct MethodPredictions {
  std::string method;
  std::vector<std::vector<double>> rates;
  // Chosen deconvolution parameters per fold (deconv baseline only).
  std::vector<DeconvConfig> deconv_choice;
};

struct DatasetPredictions {
  std::string dataset_id;
  std::vector<std::string> cell_ids;
  std::vector<std::vector<int>> counts;
  std::vector<MethodPredictions> methods;
  std::vector<Fold> folds;
};

struct ExperimentResult {
  Protocol protocol = Protocol::Loocv;
  std::vector<DatasetPredictions> predictions;
  // One report per (dataset, method, eval rate).
  std::vector<MetricsReport> reports;
  std::vector<std::string> report_datasets;
  // Protocol-specific tables as CSV text keyed by file name.
  std::map<std::string, std::string> tables;
  nlohmann::json record;

  const MetricsReport& report(const std::string& dataset_id, const std::string& method,
                              double eval_rate_hz) const;
};

// Rebins predictions to `eval_rate_hz`, fits one calibration for the method
// over all cells, and scores each cell.
MetricsReport score_predictions(const std::string& method, const std::vector<std::string>& cell_ids,
                                const std::vector<std::vector<double>>& rates,
                                const std::vector<std::vector<int>>& counts, double eval_rate_hz,
                                int calibration_knots = 10);

// Picks the deconvolution parameters with the highest mean correlation on
// `cells` at `eval_rate_hz`.
DeconvConfig tune_deconvolution(const std::vector<const PreparedCell*>& cells, double eval_rate_hz);

ExperimentResult run_loocv(const std::vector<Dataset>& datasets, const ExperimentSpec& spec);
ExperimentResult run_cross_dataset(const std::vector<Dataset>& datasets, const ExperimentSpec& spec);
ExperimentResult run_freq_sweep(const std::vector<Dataset>& datasets, const ExperimentSpec& spec);
ExperimentResult run_complexity(const std::vector<Dataset>& datasets, const ExperimentSpec& spec);
ExperimentResult run_size_sweep(const std::vector<Dataset>& datasets, const ExperimentSpec& spec);

// Loads spec.datasets, dispatches on spec.protocol, and writes reports under
// spec.output when it is set.
ExperimentResult run_experiment(const ExperimentSpec& spec);
ExperimentResult run_experiment(const std::vector<Dataset>& datasets, const ExperimentSpec& spec);
void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir);

std::uint64_t fnv1a(const std::string& text, std::uint64_t hash = 1469598103934665603ULL);

}  // namespace spikeforge
