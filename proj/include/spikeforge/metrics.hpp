#pragma once

#include <filesystem>
#include <json.hpp>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace spikeforge {

inline constexpr double kRateFloor = 1e-8;

// Piecewise-linear nondecreasing map with constant extrapolation beyond the
// end knots; outputs are floored at kRateFloor.
struct MonotoneCalibration {
  std::vector<double> knots_x;  // strictly increasing
  std::vector<double> knots_y;  // nondecreasing, >= 0

  double operator()(double x) const;
  std::vector<double> apply(std::span<const double> xs) const;
  void validate() const;

  bool operator==(const MonotoneCalibration&) const = default;
};

struct Correlation {
  double value = 0.0;
  bool degenerate = false;  // one side had zero variance; value is 0
};

// Pearson correlation, two-pass.
Correlation correlation(std::span<const double> pred, std::span<const double> target);
Correlation correlation(std::span<const double> pred, std::span<const int> counts);

// Entropy of counts under Poisson(mean count), bits per bin.
double marginal_entropy(std::span<const int> counts);

// Average Poisson log-likelihood ratio of mu_t = max(pred_t, 1e-8) against
// the constant mean-rate model, in bits per bin.
double information_gain(std::span<const double> pred, std::span<const int> counts);
double information_gain(std::span<const double> pred, std::span<const int> counts,
                        const MonotoneCalibration& calib);

// Mann-Whitney AUC of predictions for bins with >= 1 spike versus bins with
// none; ties count one half.
double auc(std::span<const double> pred, std::span<const int> counts);

double relative_information_gain(std::span<const double> info_gain,
                                 std::span<const double> marginal_entropy);

// Fits knots at rank quantiles of the pooled predictions and nondecreasing
// knot values maximizing the summed per-cell information gain.
MonotoneCalibration fit_calibration(const std::vector<std::vector<double>>& preds,
                                    const std::vector<std::vector<int>>& counts,
                                    int n_knots = 10);

// Calibration passing through (x_j, max(x_j, 0)) at the rank-quantile knots.
MonotoneCalibration identity_calibration(const std::vector<std::vector<double>>& preds,
                                         int n_knots = 10);

// Integer factor base_rate / eval_rate; throws UsageError otherwise.
int rebin_factor(double eval_rate_hz, double base_rate_hz = 100.0);

struct EvalBins {
  std::vector<double> rates;
  std::vector<int> counts;
};
EvalBins rebin_for_eval(std::span<const double> rates, std::span<const int> counts,
                        double eval_rate_hz, double base_rate_hz = 100.0);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CellScores {
  std::string cell_id;
  double correlation = 0.0;
  bool correlation_degenerate = false;
  double info_gain_bits_per_bin = kNaN;
  double marginal_entropy_bits_per_bin = kNaN;
  double auc = kNaN;
  // No spikes at the evaluation rate: information metrics and AUC are NaN.
  bool zero_rate = false;
};

// Rebins to eval_rate_hz and computes correlation, AUC, information gain
// (through `calib` when given) and marginal entropy.
CellScores evaluate(std::span<const double> rates, std::span<const int> counts,
                    double eval_rate_hz, const MonotoneCalibration* calib = nullptr,
                    double base_rate_hz = 100.0);

struct MetricsReport {
  std::string method;
  double eval_rate_hz = 25.0;
  std::vector<CellScores> per_cell;
  double relative_info_gain = kNaN;
  MonotoneCalibration calibration;

  double mean_correlation() const;
  double mean_info_gain() const;
  double mean_auc() const;
};

nlohmann::json to_json(const CellScores& cell);
nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const nlohmann::json& doc);
std::string to_csv(const MetricsReport& report);

void save_metrics_report(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport load_metrics_report(const std::filesystem::path& path);

}  // namespace spikeforge
