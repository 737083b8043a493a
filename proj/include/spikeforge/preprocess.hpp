#pragma once

#include <span>
#include <vector>

namespace spikeforge {

// Robust line fit F_t = slope * t + intercept + eps_t, where eps_t follows a
// zero-mean Gaussian scale mixture. t is the sample index, so slope is per bin.
struct DetrendFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> weights;
  std::vector<double> sigmas;
  // Average per-sample log-likelihood at the returned parameters.
  double loglik = 0.0;
  // loglik after initialization and after every EM iteration.
  std::vector<double> loglik_history;
  int iterations = 0;
  bool converged = false;
  // Set when any mixture scale sits on the lower floor (e.g. noiseless or
  // constant traces).
  bool sigma_floor_engaged = false;
};

DetrendFit fit_gsm_trend(std::span<const double> fluor, int n_components = 3);

std::vector<double> detrend(std::span<const double> fluor, const DetrendFit& fit);

// Percentile with linear interpolation between closest ranks (p in [0, 100]).
double percentile(std::span<const double> values, double p);

// Affine map taking the 5th percentile to 0 and the 80th to 1.
std::vector<double> percentile_normalize(std::span<const double> fluor);

// detrend(fit_gsm_trend(.)) followed by percentile_normalize.
std::vector<double> preprocess_fluorescence(std::span<const double> fluor);

}  // namespace spikeforge
