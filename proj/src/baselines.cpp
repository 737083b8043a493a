#include "spikeforge/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "spikeforge/error.hpp"

namespace spikeforge {

void DeconvConfig::validate() const {
  if (!(smooth_cutoff_hz > 0.0)) throw UsageError("deconvolution: cutoff must be positive");
  if (!(tau_s > 0.0)) throw UsageError("deconvolution: tau must be positive");
}

std::vector<double> raw_predict(std::span<const double> normalized_fluor) {
  if (normalized_fluor.empty()) return {};
  const double lo = *std::min_element(normalized_fluor.begin(), normalized_fluor.end());
  std::vector<double> out(normalized_fluor.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = normalized_fluor[t] - lo + 1e-8;
  return out;
}

std::vector<double> moving_average(std::span<const double> values, int width) {
  if (width < 1) throw UsageError("moving_average: width must be >= 1");
  const auto n = static_cast<long long>(values.size());
  std::vector<double> out(values.size());
  if (width == 1) {
    std::copy(values.begin(), values.end(), out.begin());
    return out;
  }
  // Prefix sums over the edge-replicated signal; window t covers
  // [t - width/2, t - width/2 + width).
  const long long before = width / 2;
  std::vector<double> prefix(static_cast<std::size_t>(n + width) + 1, 0.0);
  for (long long i = 0; i < n + width; ++i) {
    prefix[i + 1] = prefix[i] + values[std::clamp(i - before, 0LL, n - 1)];
  }
  for (long long t = 0; t < n; ++t) out[t] = (prefix[t + width] - prefix[t]) / width;
  return out;
}

std::vector<double> deconvolve(std::span<const double> normalized_fluor, const DeconvConfig& cfg,
                               double bin_rate_hz) {
  cfg.validate();
  const int width = std::max(1, static_cast<int>(std::lround(bin_rate_hz / cfg.smooth_cutoff_hz)));
  const std::vector<double> y = moving_average(normalized_fluor, width);
  const double decay = std::exp(-1.0 / (bin_rate_hz * cfg.tau_s));
  std::vector<double> s(y.size());
  double prev = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    s[t] = y[t] - decay * prev;
    prev = y[t];
    if (cfg.nonneg_clip && s[t] < 0.0) s[t] = 0.0;
  }
  return s;
}

std::vector<DeconvConfig> default_deconv_grid() {
  std::vector<DeconvConfig> grid;
  for (double cutoff : {1.0, 2.0, 5.0, 10.0, 20.0, 50.0}) {
    for (double tau : {0.1, 0.2, 0.5, 1.0, 2.0}) grid.push_back({cutoff, tau, true});
  }
  return grid;
}

}  // namespace spikeforge
