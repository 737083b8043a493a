#pragma once

#include <span>
#include <vector>

namespace spikeforge {

// Smoothing + first-order inverse filter, standing in for the classic
// local-smoothing deconvolution baseline.
struct DeconvConfig {
  double smooth_cutoff_hz = 5.0;  // moving-average width round(rate / cutoff) bins
  double tau_s = 0.5;             // decay constant of the exponential transient
  bool nonneg_clip = true;

  void validate() const;
};

// The normalized trace shifted so its minimum sits at 1e-8.
std::vector<double> raw_predict(std::span<const double> normalized_fluor);

// Centered moving average with edge replication.
std::vector<double> moving_average(std::span<const double> values, int width);

// s_t = y_t - exp(-dt/tau) y_{t-1} (y_{-1} = 0) after smoothing; exact inverse
// of convolution with the unit-peak kernel exp(-t/tau).
std::vector<double> deconvolve(std::span<const double> normalized_fluor, const DeconvConfig& cfg,
                               double bin_rate_hz = 100.0);

// Grid searched by the harness when tuning the deconvolution baseline.
std::vector<DeconvConfig> default_deconv_grid();

}  // namespace spikeforge
