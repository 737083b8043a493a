#include "spikeforge/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spikeforge/error.hpp"

namespace spikeforge {

namespace {

constexpr int kMaxEmIterations = 500;
constexpr double kEmTolerance = 1e-8;

struct Line {
  double slope;
  double intercept;
};

// Weighted least squares on (index, value); centered for conditioning.
Line weighted_line(std::span<const double> y, std::span<const double> w) {
  double sw = 0.0, st = 0.0, sy = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    sw += w[t];
    st += w[t] * static_cast<double>(t);
    sy += w[t] * y[t];
  }
  const double t_mean = st / sw;
  const double y_mean = sy / sw;
  double stt = 0.0, sty = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double dt = static_cast<double>(t) - t_mean;
    stt += w[t] * dt * dt;
    sty += w[t] * dt * (y[t] - y_mean);
  }
  const double slope = stt > 0.0 ? sty / stt : 0.0;
  return {slope, y_mean - slope * t_mean};
}

double stddev(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

class GsmEm {
 public:
  GsmEm(std::span<const double> y, int k) : y_(y), k_(k), resp_(y.size() * k), resid_(y.size()) {}

  // E-step at the given parameters. Fills responsibilities, returns the
  // average log-likelihood.
  double expectation(const DetrendFit& fit) {
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    std::vector<double> log_coef(k_), inv_var(k_);
    for (int c = 0; c < k_; ++c) {
      log_coef[c] = fit.weights[c] > 0.0
                        ? std::log(fit.weights[c]) - std::log(fit.sigmas[c]) - half_log_2pi
                        : -INFINITY;
      inv_var[c] = 1.0 / (fit.sigmas[c] * fit.sigmas[c]);
    }
    double total = 0.0;
    std::vector<double> lp(k_);
    for (std::size_t t = 0; t < y_.size(); ++t) {
      const double e = y_[t] - fit.slope * static_cast<double>(t) - fit.intercept;
      resid_[t] = e;
      double peak = -INFINITY;
      for (int c = 0; c < k_; ++c) {
        lp[c] = log_coef[c] - 0.5 * e * e * inv_var[c];
        peak = std::max(peak, lp[c]);
      }
      double s = 0.0;
      for (int c = 0; c < k_; ++c) s += std::exp(lp[c] - peak);
      const double lse = peak + std::log(s);
      total += lse;
      for (int c = 0; c < k_; ++c) resp_[t * k_ + c] = std::exp(lp[c] - lse);
    }
    return total / static_cast<double>(y_.size());
  }

  // Conditional M-steps: line given scales, then weights and scales given line.
  void maximization(DetrendFit& fit, double sigma_floor) {
    const std::size_t n = y_.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      for (int c = 0; c < k_; ++c) w[t] += resp_[t * k_ + c] / (fit.sigmas[c] * fit.sigmas[c]);
    }
    const Line line = weighted_line(y_, w);
    fit.slope = line.slope;
    fit.intercept = line.intercept;

    for (int c = 0; c < k_; ++c) {
      double rsum = 0.0, r2sum = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double e = y_[t] - fit.slope * static_cast<double>(t) - fit.intercept;
        rsum += resp_[t * k_ + c];
        r2sum += resp_[t * k_ + c] * e * e;
      }
      fit.weights[c] = rsum / static_cast<double>(n);
      if (rsum > 0.0) fit.sigmas[c] = std::max(std::sqrt(r2sum / rsum), sigma_floor);
    }
  }

 private:
  std::span<const double> y_;
  int k_;
  std::vector<double> resp_;
  std::vector<double> resid_;
};

}  // namespace

DetrendFit fit_gsm_trend(std::span<const double> fluor, int n_components) {
  if (fluor.size() < 10) throw DataError("fit_gsm_trend: need at least 10 samples");
  if (n_components < 1) throw UsageError("fit_gsm_trend: n_components must be >= 1");

  const std::size_t n = fluor.size();
  const double sigma_floor = 1e-6 * (stddev(fluor) + 1e-12);

  DetrendFit fit;
  const std::vector<double> unit(n, 1.0);
  const Line ols = weighted_line(fluor, unit);
  fit.slope = ols.slope;
  fit.intercept = ols.intercept;
  std::vector<double> resid(n);
  for (std::size_t t = 0; t < n; ++t) {
    resid[t] = fluor[t] - ols.slope * static_cast<double>(t) - ols.intercept;
  }
  const double resid_sd = stddev(resid);
  fit.weights.assign(n_components, 1.0 / n_components);
  fit.sigmas.resize(n_components);
  for (int c = 0; c < n_components; ++c) {
    // {0.5, 1, 2} x residual sd for three components; geometric in general.
    const double scale =
        n_components == 1 ? 1.0 : 0.5 * std::pow(4.0, static_cast<double>(c) / (n_components - 1));
    fit.sigmas[c] = std::max(scale * resid_sd, sigma_floor);
  }

  GsmEm em(fluor, n_components);
  double ll = em.expectation(fit);
  fit.loglik_history.push_back(ll);
  for (int it = 0; it < kMaxEmIterations; ++it) {
    em.maximization(fit, sigma_floor);
    const double next = em.expectation(fit);
    fit.loglik_history.push_back(next);
    fit.iterations = it + 1;
    const double gain = next - ll;
    ll = next;
    if (gain < kEmTolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!std::isfinite(ll)) throw NumericalError("fit_gsm_trend: non-finite log-likelihood");
  fit.loglik = ll;
  fit.sigma_floor_engaged =
      std::any_of(fit.sigmas.begin(), fit.sigmas.end(), [&](double s) { return s <= sigma_floor; });
  return fit;
}

std::vector<double> detrend(std::span<const double> fluor, const DetrendFit& fit) {
  std::vector<double> out(fluor.size());
  for (std::size_t t = 0; t < fluor.size(); ++t) {
    out[t] = fluor[t] - fit.slope * static_cast<double>(t) - fit.intercept;
  }
  return out;
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw DataError("percentile: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> percentile_normalize(std::span<const double> fluor) {
  if (fluor.size() < 2) throw DataError("percentile_normalize: need at least 2 samples");
  const double p05 = percentile(fluor, 5.0);
  const double p80 = percentile(fluor, 80.0);
  if (!(p80 > p05)) throw DataError("percentile_normalize: degenerate dynamic range");
  const double scale = 1.0 / (p80 - p05);
  std::vector<double> out(fluor.size());
  for (std::size_t t = 0; t < fluor.size(); ++t) out[t] = (fluor[t] - p05) * scale;
  return out;
}

std::vector<double> preprocess_fluorescence(std::span<const double> fluor) {
  const DetrendFit fit = fit_gsm_trend(fluor);
  return percentile_normalize(detrend(fluor, fit));
}

}  // namespace spikeforge
