#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "spikeforge/error.hpp"
#include "spikeforge/preprocess.hpp"

using namespace spikeforge;

TEST_CASE("clean linear data: robust fit agrees with least squares") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<double> y;
  for (int t = 0; t < 2000; ++t) y.push_back(0.003 * t + 2.0 + noise(rng));
  const auto [slope, intercept] = oracle::ols_line(y);
  const DetrendFit fit = fit_gsm_trend(y);
  CHECK(fit.slope == doctest::Approx(slope).epsilon(1e-3));
  CHECK(fit.intercept == doctest::Approx(intercept).epsilon(1e-3));
}

TEST_CASE("robust fit ignores outliers and keeps the likelihood monotone") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y;
  for (int t = 0; t < 10000; ++t) {
    double v = 0.001 * t + 5.0 + noise(rng);
    if (u(rng) < 0.01) v += 50.0;
    y.push_back(v);
  }
  const DetrendFit fit = fit_gsm_trend(y);
  CHECK(std::abs(fit.slope - 0.001) < 0.01 * 0.001);
  CHECK(fit.weights.size() == 3);
  for (std::size_t i = 1; i < fit.loglik_history.size(); ++i) {
    CHECK(fit.loglik_history[i] >= fit.loglik_history[i - 1] - 1e-9 * std::abs(fit.loglik_history[i - 1]));
  }
  // The least-squares fit is dragged by the outliers; the robust one is not.
  const auto [ols_slope, ols_intercept] = oracle::ols_line(y);
  CHECK(std::abs(fit.intercept - 5.0) < std::abs(ols_intercept - 5.0));
}

TEST_CASE("detrend of a constant trace stays finite") {
  std::vector<double> y(500, 3.0);
  const DetrendFit fit = fit_gsm_trend(y);
  CHECK(std::isfinite(fit.loglik));
  const auto r = detrend(y, fit);
  for (double v : r) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("percentile follows linear interpolation between order statistics") {
  const std::vector<double> v = {4, 1, 3, 2, 5};
  CHECK(percentile(v, 0) == 1.0);
  CHECK(percentile(v, 100) == 5.0);
  CHECK(percentile(v, 80) == doctest::Approx(4.2));
  CHECK(percentile(v, 5) == doctest::Approx(1.2));
}

TEST_CASE("percentile normalization pins the 5th and 80th percentiles") {
  std::mt19937_64 rng(3);
  std::gamma_distribution<double> g(2.0, 1.0);
  std::vector<double> y, z;
  for (int t = 0; t < 1001; ++t) {
    y.push_back(g(rng));
    z.push_back(7.0 * y.back() - 3.0);
  }
  const auto a = percentile_normalize(y);
  CHECK(std::abs(percentile(a, 5)) < 1e-9);
  CHECK(std::abs(percentile(a, 80) - 1.0) < 1e-9);
  const auto b = percentile_normalize(z);
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(std::abs(a[t] - b[t]) < 1e-9);
  CHECK_THROWS_WITH_AS(percentile_normalize(std::vector<double>(10, 1.0)),
                       doctest::Contains("degenerate dynamic range"), DataError);
}
