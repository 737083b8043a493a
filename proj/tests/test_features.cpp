#include <doctest.h>

#include <random>

#include "spikeforge/error.hpp"
#include "spikeforge/features.hpp"

using namespace spikeforge;

TEST_CASE("windows are centered with edge replication") {
  std::vector<double> f;
  for (int t = 0; t < 7; ++t) f.push_back(t);
  const Eigen::MatrixXd w = extract_windows(f, 40.0, 100.0);  // L = 4, center offset 2
  REQUIRE(w.rows() == 7);
  REQUIRE(w.cols() == 4);
  CHECK(w(0, 0) == 0.0);
  CHECK(w(0, 2) == 0.0);
  CHECK(w(0, 3) == 1.0);
  CHECK(w(3, 0) == 1.0);
  CHECK(w(3, 2) == 3.0);
  CHECK(w(6, 3) == 6.0);
  CHECK(window_bins(1000.0) == 100);
}

TEST_CASE("pooled moments equal moments of the stacked matrix") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(30, 5), b(45, 5);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng) + 2.0;
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = 3.0 * g(rng);
  WindowMoments ma(5), mb(5);
  ma.add(a);
  mb.add(b);
  ma += mb;
  Eigen::MatrixXd all(75, 5);
  all << a, b;
  const Eigen::VectorXd mean = all.colwise().mean().transpose();
  const Eigen::MatrixXd c = all.rowwise() - mean.transpose();
  CHECK((ma.mean() - mean).norm() < 1e-12);
  CHECK((ma.scatter() - c.transpose() * c).norm() < 1e-9);
}

TEST_CASE("pca keeps enough components for the variance threshold") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(500, 6);
  for (Eigen::Index i = 0; i < 500; ++i) {
    const double s = 10.0 * g(rng), r = 3.0 * g(rng);
    for (Eigen::Index j = 0; j < 6; ++j) x(i, j) = s * (j + 1) + r * (j % 2 ? 1 : -1) + 0.01 * g(rng);
  }
  const PcaBasis p = fit_pca(x, 0.95);
  CHECK(p.n_kept() >= 1);
  CHECK(p.variance_fraction_kept >= 0.95);
  // Orthonormal rows, and the largest entry of each row is positive.
  CHECK((p.components * p.components.transpose() - Eigen::MatrixXd::Identity(p.n_kept(), p.n_kept())).norm() <
        1e-10);
  for (Eigen::Index k = 0; k < p.n_kept(); ++k) {
    Eigen::Index arg;
    p.components.row(k).cwiseAbs().maxCoeff(&arg);
    CHECK(p.components(k, arg) > 0.0);
  }
  const PcaBasis full = fit_pca(x, 1.0);
  CHECK(full.n_kept() == 6);
  const FeatureMatrix f = project(full, x);
  CHECK((reconstruct(full, f.values) - x).norm() < 1e-8 * x.norm());
}

TEST_CASE("pca rejects degenerate input") {
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Ones(10, 3)), DataError);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 3);
  CHECK_THROWS(fit_pca(x, 0.0));
  const PcaBasis p = fit_pca(x);
  CHECK_THROWS_AS(project(p, Eigen::MatrixXd::Zero(4, 5)), DataError);
}
