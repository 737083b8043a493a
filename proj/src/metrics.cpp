#include "spikeforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "spikeforge/error.hpp"
#include "spikeforge/signal_io.hpp"
#include "spikeforge/text_io.hpp"

namespace spikeforge {

using nlohmann::json;

namespace {

double mean_count(std::span<const int> counts) {
  if (counts.empty()) throw DataError("empty spike counts");
  double total = 0.0;
  for (int k : counts) total += k;
  const double lambda = total / static_cast<double>(counts.size());
  if (!(lambda > 0.0)) throw DataError("zero-rate cell");
  return lambda;
}

double finite_mean(const std::vector<CellScores>& cells, double CellScores::*field) {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    const double v = c.*field;
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  return n > 0 ? sum / n : kNaN;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& v) { return v.is_null() ? kNaN : v.get<double>(); }

}  // namespace

double MonotoneCalibration::operator()(double x) const {
  if (knots_x.empty()) return std::max(x, kRateFloor);
  double y;
  if (x <= knots_x.front()) {
    y = knots_y.front();
  } else if (x >= knots_x.back()) {
    y = knots_y.back();
  } else {
    const auto it = std::upper_bound(knots_x.begin(), knots_x.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - knots_x.begin()) - 1;
    const double a = (x - knots_x[j]) / (knots_x[j + 1] - knots_x[j]);
    y = (1.0 - a) * knots_y[j] + a * knots_y[j + 1];
  }
  return std::max(y, kRateFloor);
}

std::vector<double> MonotoneCalibration::apply(std::span<const double> xs) const {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return (*this)(x); });
  return out;
}

void MonotoneCalibration::validate() const {
  if (knots_x.size() != knots_y.size()) throw DataError("calibration: knot count mismatch");
  for (std::size_t j = 0; j < knots_x.size(); ++j) {
    if (knots_y[j] < 0.0) throw DataError("calibration: negative knot value");
    if (j > 0 && !(knots_x[j] > knots_x[j - 1])) {
      throw DataError("calibration: knots_x not strictly increasing");
    }
    if (j > 0 && knots_y[j] < knots_y[j - 1]) throw DataError("calibration: knots_y decreasing");
  }
}

Correlation correlation(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw DataError("correlation: length mismatch");
  if (pred.size() < 2) throw DataError("correlation: need at least 2 bins");
  const double n = static_cast<double>(pred.size());
  const double mx = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double my = std::accumulate(target.begin(), target.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double dx = pred[t] - mx;
    const double dy = target[t] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

Correlation correlation(std::span<const double> pred, std::span<const int> counts) {
  const std::vector<double> target(counts.begin(), counts.end());
  return correlation(pred, target);
}

double marginal_entropy(std::span<const int> counts) {
  const double lambda = mean_count(counts);
  double log_fact = 0.0;
  for (int k : counts) log_fact += std::lgamma(k + 1.0);
  log_fact /= static_cast<double>(counts.size());
  return (log_fact - lambda * std::log(lambda) + lambda) / std::numbers::ln2;
}

double information_gain(std::span<const double> pred, std::span<const int> counts) {
  if (pred.size() != counts.size()) throw DataError("information_gain: length mismatch");
  const double lambda = mean_count(counts);
  double total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double mu = std::max(pred[t], kRateFloor);
    // Per-bin log ratio, so mu == lambda contributes an exact zero.
    total += counts[t] * std::log(mu / lambda) - (mu - lambda);
  }
  return total / static_cast<double>(pred.size()) / std::numbers::ln2;
}

double information_gain(std::span<const double> pred, std::span<const int> counts,
                        const MonotoneCalibration& calib) {
  const std::vector<double> mu = calib.apply(pred);
  return information_gain(mu, counts);
}

double auc(std::span<const double> pred, std::span<const int> counts) {
  if (pred.size() != counts.size()) throw DataError("auc: length mismatch");
  const std::size_t n = pred.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pred[a] < pred[b]; });

  double pos_rank_sum = 0.0;
  double n_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pred[order[j + 1]] == pred[order[i]]) ++j;
    // 1-based ranks i+1..j+1 share their average.
    const double avg_rank = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t r = i; r <= j; ++r) {
      if (counts[order[r]] > 0) {
        pos_rank_sum += avg_rank;
        n_pos += 1.0;
      }
    }
    i = j + 1;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw DataError("AUC undefined: only one class present");
  const double u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

double relative_information_gain(std::span<const double> info_gain,
                                 std::span<const double> marginal_entropy) {
  if (info_gain.size() != marginal_entropy.size() || info_gain.empty()) {
    throw DataError("relative_information_gain: need equal nonempty inputs");
  }
  const double ig = std::accumulate(info_gain.begin(), info_gain.end(), 0.0);
  const double hm = std::accumulate(marginal_entropy.begin(), marginal_entropy.end(), 0.0);
  if (!(hm > 0.0)) throw DataError("relative_information_gain: zero entropy sum");
  return ig / hm;
}

int rebin_factor(double eval_rate_hz, double base_rate_hz) {
  if (!(eval_rate_hz > 0.0)) throw UsageError("evaluation rate must be positive");
  const double ratio = base_rate_hz / eval_rate_hz;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw UsageError("evaluation rate " + text::format_double(eval_rate_hz) +
                     " Hz does not divide " + text::format_double(base_rate_hz) + " Hz");
  }
  return static_cast<int>(rounded);
}

EvalBins rebin_for_eval(std::span<const double> rates, std::span<const int> counts,
                        double eval_rate_hz, double base_rate_hz) {
  if (rates.size() != counts.size()) throw DataError("evaluate: rates and counts differ in length");
  const int factor = rebin_factor(eval_rate_hz, base_rate_hz);
  return {rebin_rates(rates, factor), rebin_counts(counts, factor)};
}

CellScores evaluate(std::span<const double> rates, std::span<const int> counts,
                    double eval_rate_hz, const MonotoneCalibration* calib, double base_rate_hz) {
  const EvalBins bins = rebin_for_eval(rates, counts, eval_rate_hz, base_rate_hz);
  CellScores s;
  const Correlation r = correlation(bins.rates, bins.counts);
  s.correlation = r.value;
  s.correlation_degenerate = r.degenerate;
  const bool any_spike = std::any_of(bins.counts.begin(), bins.counts.end(), [](int k) { return k > 0; });
  if (!any_spike) {
    s.zero_rate = true;
    return s;
  }
  s.marginal_entropy_bits_per_bin = marginal_entropy(bins.counts);
  s.info_gain_bits_per_bin =
      calib ? information_gain(bins.rates, bins.counts, *calib) : information_gain(bins.rates, bins.counts);
  const bool any_silent = std::any_of(bins.counts.begin(), bins.counts.end(), [](int k) { return k == 0; });
  if (any_silent) s.auc = auc(bins.rates, bins.counts);
  return s;
}

double MetricsReport::mean_correlation() const { return finite_mean(per_cell, &CellScores::correlation); }
double MetricsReport::mean_info_gain() const {
  return finite_mean(per_cell, &CellScores::info_gain_bits_per_bin);
}
double MetricsReport::mean_auc() const { return finite_mean(per_cell, &CellScores::auc); }

json to_json(const CellScores& c) {
  return {{"cell_id", c.cell_id},
          {"correlation", c.correlation},
          {"correlation_degenerate", c.correlation_degenerate},
          {"info_gain_bits_per_bin", number_or_null(c.info_gain_bits_per_bin)},
          {"marginal_entropy_bits_per_bin", number_or_null(c.marginal_entropy_bits_per_bin)},
          {"auc", number_or_null(c.auc)},
          {"zero_rate", c.zero_rate}};
}

json to_json(const MetricsReport& report) {
  json cells = json::array();
  for (const auto& c : report.per_cell) cells.push_back(to_json(c));
  return {{"format_version", 1},
          {"method", report.method},
          {"eval_rate_hz", report.eval_rate_hz},
          {"per_cell", std::move(cells)},
          {"relative_info_gain", number_or_null(report.relative_info_gain)},
          {"calibration_knots",
           {{"x", report.calibration.knots_x}, {"y", report.calibration.knots_y}}}};
}

MetricsReport metrics_report_from_json(const json& doc) {
  try {
    MetricsReport r;
    r.method = doc.value("method", std::string());
    r.eval_rate_hz = doc.at("eval_rate_hz").get<double>();
    for (const auto& c : doc.at("per_cell")) {
      CellScores s;
      s.cell_id = c.at("cell_id").get<std::string>();
      s.correlation = c.at("correlation").get<double>();
      s.correlation_degenerate = c.value("correlation_degenerate", false);
      s.info_gain_bits_per_bin = number_from(c.at("info_gain_bits_per_bin"));
      s.marginal_entropy_bits_per_bin = number_from(c.at("marginal_entropy_bits_per_bin"));
      s.auc = number_from(c.at("auc"));
      s.zero_rate = c.value("zero_rate", false);
      r.per_cell.push_back(std::move(s));
    }
    r.relative_info_gain = number_from(doc.at("relative_info_gain"));
    r.calibration.knots_x = doc.at("calibration_knots").at("x").get<std::vector<double>>();
    r.calibration.knots_y = doc.at("calibration_knots").at("y").get<std::vector<double>>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("metrics report: ") + e.what());
  }
}

std::string to_csv(const MetricsReport& report) {
  auto num = [](double v) { return std::isfinite(v) ? text::format_double(v) : std::string("nan"); };
  std::string out = "method,eval_rate_hz,cell_id,correlation,info_gain_bits_per_bin,"
                    "marginal_entropy_bits_per_bin,auc\n";
  for (const auto& c : report.per_cell) {
    out += report.method + "," + num(report.eval_rate_hz) + "," + c.cell_id + "," +
           num(c.correlation) + "," + num(c.info_gain_bits_per_bin) + "," +
           num(c.marginal_entropy_bits_per_bin) + "," + num(c.auc) + "\n";
  }
  return out;
}

void save_metrics_report(const MetricsReport& report, const std::filesystem::path& path) {
  text::write_file(path, to_json(report).dump(2) + "\n");
}

MetricsReport load_metrics_report(const std::filesystem::path& path) {
  try {
    return metrics_report_from_json(json::parse(text::read_file(path)));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace spikeforge
