#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "spikeforge/error.hpp"
#include "spikeforge/models.hpp"
#include "spikeforge/trainer.hpp"

using namespace spikeforge;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

std::vector<int> poisson_counts(const Eigen::VectorXd& rate, std::mt19937_64& rng) {
  std::vector<int> k(rate.size());
  for (Eigen::Index t = 0; t < rate.size(); ++t) k[t] = std::poisson_distribution<int>(rate[t])(rng);
  return k;
}

void check_gradient(const ModelParams& params, const Eigen::MatrixXd& X, const std::vector<int>& counts) {
  const Eigen::VectorXd theta = flatten(params);
  auto f = [&](const Eigen::VectorXd& th) {
    return log_likelihood_gradient(unflatten(params, th), X, counts).value;
  };
  const auto analytic = log_likelihood_gradient(params, X, counts);
  const Eigen::VectorXd numeric = oracle::central_difference(f, theta);
  CHECK(oracle::max_relative_error(flatten(analytic.gradient), numeric) < 1e-5);
}

}  // namespace

TEST_CASE("stm rate matches the term-by-term formula") {
  std::mt19937_64 rng(3);
  StmParams p{random_matrix(3, 4, rng, 0.5), random_matrix(2, 4, rng, 0.5), random_matrix(3, 2, rng, 0.3),
              random_matrix(3, 1, rng, 0.5)};
  const Eigen::MatrixXd X = random_matrix(20, 4, rng, 1.0);
  const Eigen::VectorXd r = rates(p, X);
  for (Eigen::Index t = 0; t < X.rows(); ++t) {
    const Eigen::VectorXd x = X.row(t).transpose();
    CHECK(r[t] == doctest::Approx(oracle::stm_rate(p.w, p.u, p.beta, p.b, x)).epsilon(1e-12));
  }
}

TEST_CASE("stm with one component and no quadratic features is an lnp") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd w = random_matrix(1, 5, rng, 0.4);
  StmParams stm{w, Eigen::MatrixXd(0, 5), Eigen::MatrixXd(1, 0), Eigen::VectorXd::Constant(1, -0.7)};
  LnpParams lnp{w.row(0).transpose(), -0.7};
  const Eigen::MatrixXd X = random_matrix(50, 5, rng, 1.0);
  const Eigen::VectorXd a = rates(stm, X);
  const Eigen::VectorXd b = rates(lnp, X);
  for (Eigen::Index t = 0; t < X.rows(); ++t) CHECK(a[t] == doctest::Approx(b[t]).epsilon(1e-14));
}

TEST_CASE("mlnn with zero weights gives exp of the output offset") {
  MlnnParams p{Eigen::MatrixXd::Zero(10, 3), Eigen::VectorXd::Zero(10), Eigen::MatrixXd::Zero(5, 10),
               Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5), std::log(0.2)};
  const Eigen::VectorXd r = rates(p, Eigen::MatrixXd::Ones(4, 3));
  for (Eigen::Index t = 0; t < 4; ++t) CHECK(r[t] == doctest::Approx(0.2));
}

TEST_CASE("exponent clamp bounds the rate") {
  LnpParams p{Eigen::VectorXd::Constant(1, 100.0), 0.0};
  Eigen::MatrixXd X(2, 1);
  X << 10.0, -10.0;
  const Eigen::VectorXd r = rates(p, X);
  CHECK(r[0] == doctest::Approx(std::exp(kExponentClamp)));
  CHECK(r[1] == doctest::Approx(std::exp(-kExponentClamp)));
  // Clamped bins contribute no gradient through the exponent.
  const std::vector<int> k = {0, 0};
  const auto g = log_likelihood_gradient(p, X, k);
  CHECK(flatten(g.gradient).norm() == 0.0);
}

TEST_CASE("average log-likelihood matches the pmf oracle") {
  std::mt19937_64 rng(5);
  const std::vector<double> r = {0.1, 0.5, 2.0, 3.7, 0.01};
  const std::vector<int> k = {0, 1, 3, 5, 0};
  double expected = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) expected += oracle::poisson_log_pmf(r[i], k[i]);
  CHECK(poisson_log_likelihood(r, k) == doctest::Approx(expected / 5.0).epsilon(1e-13));
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd X = random_matrix(60, 4, rng, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const ModelDims dims{4, 3, 2, 10, 5};
    for (ModelKind kind : {ModelKind::Stm, ModelKind::Lnp, ModelKind::Mlnn}) {
      ModelParams p = random_init(kind, dims, 0.3, 100 + trial, 0.3);
      const std::vector<int> k = poisson_counts(rates(p, X), rng);
      check_gradient(p, X, k);
    }
  }
}

TEST_CASE("flatten and unflatten round trip") {
  const ModelDims dims{6, 3, 2, 10, 5};
  for (ModelKind kind : {ModelKind::Stm, ModelKind::Lnp, ModelKind::Mlnn}) {
    const ModelParams p = random_init(kind, dims, 0.2, 9, 0.5);
    const Eigen::VectorXd theta = flatten(p);
    CHECK(theta.size() == parameter_count(p));
    CHECK(flatten(unflatten(p, theta)) == theta);
  }
  CHECK(parameter_count(random_init(ModelKind::Stm, dims, 0.1, 1, 1.0)) == 3 * 6 + 2 * 6 + 3 * 2 + 3);
  CHECK(parameter_count(random_init(ModelKind::Lnp, dims, 0.1, 1, 1.0)) == 7);
  CHECK(parameter_count(random_init(ModelKind::Mlnn, dims, 0.1, 1, 1.0)) == 10 * 6 + 10 + 5 * 10 + 5 + 5 + 1);
}

TEST_CASE("geometric ensemble of identical members is the member") {
  const ModelDims dims{3, 3, 2, 10, 5};
  ModelEnsemble e;
  e.kind = ModelKind::Lnp;
  const ModelParams p = random_init(ModelKind::Lnp, dims, 0.5, 2, 0.4);
  e.members = {p, p, p, p};
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd X = random_matrix(10, 3, rng, 1.0);
  const Eigen::VectorXd a = ensemble_rates(e, X);
  const Eigen::VectorXd b = rates(p, X);
  for (Eigen::Index t = 0; t < 10; ++t) CHECK(a[t] == doctest::Approx(b[t]).epsilon(1e-13));
}

TEST_CASE("geometric ensemble is the normalized geometric mean of member pmfs") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-3.0, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    ModelEnsemble e;
    e.kind = ModelKind::Lnp;
    std::vector<double> lam;
    for (int m = 0; m < 4; ++m) {
      lam.push_back(std::exp(u(rng)));
      e.members.push_back(LnpParams{Eigen::VectorXd::Zero(1), std::log(lam.back())});
    }
    const double mu = ensemble_rate(e, Eigen::VectorXd::Zero(1));
    std::vector<double> prod(51);
    double z = 0.0;
    for (int k = 0; k <= 50; ++k) {
      prod[k] = 1.0;
      for (double l : lam) prod[k] *= std::pow(oracle::poisson_pmf(l, k), 0.25);
      z += prod[k];
    }
    for (int k = 0; k <= 50; ++k) CHECK(std::abs(prod[k] / z - oracle::poisson_pmf(mu, k)) < 1e-9);
  }
}

TEST_CASE("sampling is seeded and respects zero rates") {
  const std::vector<double> r = {0.0, 0.5, 2.0, 0.0, 10.0};
  CHECK(sample_spike_train(r, 7) == sample_spike_train(r, 7));
  const auto k = sample_spike_train(r, 7);
  CHECK(k[0] == 0);
  CHECK(k[3] == 0);
  const std::vector<double> bad = {-1.0};
  CHECK_THROWS_AS(sample_spike_train(bad, 1), DataError);
}

TEST_CASE("model kind names") {
  CHECK(parse_model_kind("stm") == ModelKind::Stm);
  CHECK(to_string(ModelKind::Mlnn) == "mlnn");
  CHECK_THROWS(parse_model_kind("svm"));
}
