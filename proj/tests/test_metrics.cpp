#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "spikeforge/error.hpp"
#include "spikeforge/metrics.hpp"

using namespace spikeforge;

namespace {

struct Instance {
  std::vector<double> pred;
  std::vector<int> counts;
};

Instance random_instance(std::mt19937_64& rng, std::size_t n, bool with_ties) {
  Instance in;
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (std::size_t t = 0; t < n; ++t) {
    double p = u(rng);
    if (with_ties) p = std::round(p * 4.0) / 4.0;
    in.pred.push_back(p);
    in.counts.push_back(std::poisson_distribution<int>(0.2 + 0.5 * p)(rng));
  }
  in.counts[0] = 1;
  in.counts[1] = 0;
  return in;
}

}  // namespace

TEST_CASE("auc equals the pairwise oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_instance(rng, 10 + 20 * trial, trial % 2 == 0);
    CHECK(auc(in.pred, in.counts) == oracle::pairwise_auc(in.pred, in.counts));
  }
}

TEST_CASE("auc edge cases") {
  CHECK(auc(std::vector<double>{1, 2, 3, 4}, std::vector<int>{0, 0, 1, 2}) == 1.0);
  CHECK(auc(std::vector<double>{4, 3, 2, 1}, std::vector<int>{0, 0, 1, 2}) == 0.0);
  CHECK(auc(std::vector<double>{1, 1, 1, 1}, std::vector<int>{0, 1, 0, 1}) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{1, 2}, std::vector<int>{0, 0}), DataError);
}

TEST_CASE("correlation matches the two-pass oracle and flags zero variance") {
  std::mt19937_64 rng(2);
  const auto in = random_instance(rng, 300, false);
  const std::vector<double> k(in.counts.begin(), in.counts.end());
  CHECK(std::abs(correlation(in.pred, in.counts).value - oracle::pearson(in.pred, k)) < 1e-12);
  const std::vector<double> flat(10, 3.0);
  const std::vector<int> some(10, 1);
  const auto c = correlation(flat, some);
  CHECK(c.value == 0.0);
  CHECK(c.degenerate);
}

TEST_CASE("marginal entropy matches the pmf oracle") {
  std::mt19937_64 rng(3);
  const auto in = random_instance(rng, 400, false);
  CHECK(std::abs(marginal_entropy(in.counts) - oracle::marginal_entropy_bits(in.counts)) < 1e-12);
  CHECK_THROWS_AS(marginal_entropy(std::vector<int>{0, 0, 0}), DataError);
}

TEST_CASE("information gain of the mean-rate predictor is zero") {
  const std::vector<int> k = {0, 1, 0, 3, 0, 0, 2, 0};
  const std::vector<double> mean(k.size(), 6.0 / 8.0);
  CHECK(information_gain(mean, k) == 0.0);
}

TEST_CASE("information gain equals the log-likelihood ratio in bits") {
  std::mt19937_64 rng(4);
  const auto in = random_instance(rng, 200, false);
  double lambda = 0.0;
  for (int k : in.counts) lambda += k;
  lambda /= in.counts.size();
  double ratio = 0.0;
  for (std::size_t t = 0; t < in.pred.size(); ++t) {
    ratio += oracle::poisson_log_pmf(in.pred[t], in.counts[t]) - oracle::poisson_log_pmf(lambda, in.counts[t]);
  }
  CHECK(information_gain(in.pred, in.counts) ==
        doctest::Approx(ratio / in.pred.size() / std::log(2.0)).epsilon(1e-11));
  // Zero predictions are floored instead of producing -inf.
  std::vector<double> zeros(in.pred.size(), 0.0);
  CHECK(std::isfinite(information_gain(zeros, in.counts)));
}

TEST_CASE("fitted calibration is monotone and never loses to the identity") {
  std::mt19937_64 rng(5);
  std::vector<std::vector<double>> preds;
  std::vector<std::vector<int>> counts;
  for (int c = 0; c < 3; ++c) {
    auto in = random_instance(rng, 500, false);
    for (auto& p : in.pred) p = 3.0 * p * p;  // badly scaled predictions
    preds.push_back(in.pred);
    counts.push_back(in.counts);
  }
  const MonotoneCalibration f = fit_calibration(preds, counts, 10);
  f.validate();
  CHECK(f.knots_x.size() == 10);
  const MonotoneCalibration id = identity_calibration(preds, 10);
  double fitted = 0.0, ident = 0.0;
  for (int c = 0; c < 3; ++c) {
    fitted += information_gain(preds[c], counts[c], f);
    ident += information_gain(preds[c], counts[c], id);
  }
  CHECK(fitted >= ident - 1e-9);
  CHECK(fitted > 0.0);
}

TEST_CASE("calibration of a constant predictor recovers the mean rate") {
  std::vector<std::vector<double>> preds = {std::vector<double>(100, 0.3)};
  std::vector<std::vector<int>> counts = {std::vector<int>(100, 0)};
  for (int t = 0; t < 20; ++t) counts[0][t * 5] = 1;
  const MonotoneCalibration f = fit_calibration(preds, counts, 10);
  CHECK(f(0.3) == doctest::Approx(0.2).epsilon(1e-4));
}

TEST_CASE("rebinning for evaluation") {
  CHECK(rebin_factor(25.0) == 4);
  CHECK(rebin_factor(100.0) == 1);
  CHECK_THROWS_AS(rebin_factor(30.0), UsageError);
  const std::vector<double> r = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::vector<int> k = {0, 1, 0, 1, 1, 1, 0, 0, 1};
  const EvalBins b = rebin_for_eval(r, k, 25.0);
  CHECK(b.rates == std::vector<double>{10, 26});
  CHECK(b.counts == std::vector<int>{2, 2});
}

TEST_CASE("metric invariances") {
  std::mt19937_64 rng(6);
  const auto in = random_instance(rng, 300, false);
  const double a0 = auc(in.pred, in.counts);
  const double c0 = correlation(in.pred, in.counts).value;
  std::vector<double> cube, affine;
  for (double p : in.pred) {
    cube.push_back(std::exp(p * p * p));
    affine.push_back(3.5 * p + 11.0);
  }
  CHECK(auc(cube, in.counts) == a0);
  CHECK(std::abs(correlation(affine, in.counts).value - c0) < 1e-12);
}

TEST_CASE("metrics report round trips through json") {
  MetricsReport r;
  r.method = "stm";
  r.eval_rate_hz = 25.0;
  CellScores a;
  a.cell_id = "cell_000";
  a.correlation = 0.4;
  a.info_gain_bits_per_bin = 0.1;
  a.marginal_entropy_bits_per_bin = 0.5;
  a.auc = 0.8;
  CellScores b;
  b.cell_id = "cell_001";
  b.zero_rate = true;
  r.per_cell = {a, b};
  r.relative_info_gain = 0.2;
  r.calibration.knots_x = {0.0, 1.0};
  r.calibration.knots_y = {0.1, 0.5};
  const auto path = oracle::scratch_dir("report") / "r.json";
  save_metrics_report(r, path);
  const MetricsReport back = load_metrics_report(path);
  CHECK(back.method == "stm");
  CHECK(back.per_cell.size() == 2);
  CHECK(back.per_cell[0].auc == 0.8);
  CHECK(std::isnan(back.per_cell[1].auc));
  CHECK(back.per_cell[1].zero_rate);
  CHECK(back.calibration == r.calibration);
  CHECK(r.mean_auc() == 0.8);
  CHECK(to_csv(back) == to_csv(r));
}
