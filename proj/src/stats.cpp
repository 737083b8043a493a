#include "spikeforge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace spikeforge {

SignRankResult wilcoxon_signed_rank(std::span<const double> differences) {
  std::vector<double> d;
  for (double v : differences) {
    if (std::isfinite(v) && v != 0.0) d.push_back(v);
  }
  SignRankResult r;
  r.n = static_cast<int>(d.size());
  if (r.n == 0) return r;

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> rank(d.size());
  bool ties = false;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    if (j > i) {
      ties = true;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
    }
    i = j + 1;
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) r.statistic += rank[i];
  }

  const int n = r.n;
  if (n <= 25 && !ties) {
    // Number of subsets of {1..n} with each rank sum.
    const int max_sum = n * (n + 1) / 2;
    std::vector<double> ways(max_sum + 1, 0.0);
    ways[0] = 1.0;
    for (int k = 1; k <= n; ++k) {
      for (int s = max_sum; s >= k; --s) ways[s] += ways[s - k];
    }
    const auto w = static_cast<int>(std::lround(r.statistic));
    double tail = 0.0;
    for (int s = w; s <= max_sum; ++s) tail += ways[s];
    r.p_value = tail / std::ldexp(1.0, n);
    r.exact = true;
    return r;
  }
  const double nn = n;
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  // Continuity correction toward the mean.
  const double z = (r.statistic - mean - 0.5) / std::sqrt(var);
  r.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  return r;
}

double mean_of(std::span<const double> values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double sem_of(std::span<const double> values) {
  const double m = mean_of(values);
  double ss = 0.0;
  int n = 0;
  for (double v : values) {
    if (std::isfinite(v)) {
      ss += (v - m) * (v - m);
      ++n;
    }
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
}

}  // namespace spikeforge
