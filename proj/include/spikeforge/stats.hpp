#pragma once

#include <span>

namespace spikeforge {

struct SignRankResult {
  double statistic = 0.0;  // sum of ranks of positive differences
  double p_value = 1.0;    // P(W+ >= observed) under the null
  int n = 0;               // nonzero differences used
  bool exact = false;
};

// One-sided Wilcoxon signed-rank test of "differences tend to be positive".
// Zero differences are dropped. Exact null distribution for n <= 25 without
// tied magnitudes, normal approximation with tie correction otherwise.
SignRankResult wilcoxon_signed_rank(std::span<const double> differences);

double mean_of(std::span<const double> values);
// Standard error of the mean (sample sd / sqrt(n)); NaN-valued entries skipped.
double sem_of(std::span<const double> values);

}  // namespace spikeforge
