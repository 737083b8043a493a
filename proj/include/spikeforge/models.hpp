#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spikeforge/features.hpp"

namespace spikeforge {

enum class ModelKind { Stm, Lnp, Mlnn };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

// Exponents are clamped to [-kExponentClamp, kExponentClamp] before exp.
inline constexpr double kExponentClamp = 30.0;

// Spike-triggered mixture:
//   rate(x) = sum_k exp(sum_m beta(k,m) (u_m . x)^2 + w_k . x + b_k)
struct StmParams {
  Eigen::MatrixXd w;     // K x D linear filters
  Eigen::MatrixXd u;     // M x D quadratic filters
  Eigen::MatrixXd beta;  // K x M
  Eigen::VectorXd b;     // K offsets

  Eigen::Index components() const { return w.rows(); }
  Eigen::Index quadratic_features() const { return u.rows(); }
};

// rate(x) = exp(w . x + b)
struct LnpParams {
  Eigen::VectorXd w;
  double b = 0.0;
};

// rate(x) = exp(w3 . relu(W2 relu(W1 x + b1) + b2) + b3)
struct MlnnParams {
  Eigen::MatrixXd w1;  // H1 x D
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // H2 x H1
  Eigen::VectorXd b2;
  Eigen::VectorXd w3;  // H2
  double b3 = 0.0;
};

using ModelParams = std::variant<StmParams, LnpParams, MlnnParams>;

ModelKind kind_of(const ModelParams& params);
Eigen::Index input_dim(const ModelParams& params);
// Throws DataError if the parameter blocks disagree on shapes.
void validate(const ModelParams& params);

// Flat view used by the optimizer; unflatten takes its shape from `like`.
Eigen::VectorXd flatten(const ModelParams& params);
ModelParams unflatten(const ModelParams& like, const Eigen::VectorXd& flat);
Eigen::Index parameter_count(const ModelParams& params);

// Expected spikes per model bin for every row of `features`.
Eigen::VectorXd rates(const ModelParams& params, const Eigen::MatrixXd& features);
double rate(const ModelParams& params, const Eigen::VectorXd& x);

// (1/N) sum_t [k_t ln(rate_t) - rate_t - lnGamma(k_t + 1)], in nats.
double poisson_log_likelihood(std::span<const double> rates, std::span<const int> counts);

struct LikelihoodGradient {
  double value = 0.0;    // average log-likelihood
  ModelParams gradient;  // same shape as the parameters
};

// Exact gradient of the average log-likelihood. Clamped exponents and
// inactive rectifiers contribute zero derivative.
LikelihoodGradient log_likelihood_gradient(const ModelParams& params,
                                           const Eigen::MatrixXd& features,
                                           std::span<const int> counts);

struct ModelEnsemble {
  ModelKind kind = ModelKind::Stm;
  std::vector<ModelParams> members;
  PcaBasis pca_basis;
  std::string preprocessing = "gsm_detrend+percentile_5_80";
  double bin_rate_hz = 100.0;
  double window_ms = 1000.0;
  nlohmann::json train_config = nlohmann::json::object();
  // Which cells the ensemble was fit on; free-form.
  nlohmann::json provenance = nlohmann::json::object();
};

// Geometric mean of member rates: exp(mean_i ln rate_i).
Eigen::VectorXd ensemble_rates(const ModelEnsemble& ensemble, const Eigen::MatrixXd& features);
double ensemble_rate(const ModelEnsemble& ensemble, const Eigen::VectorXd& x);

// Independent Poisson draw per bin. Zero rates are allowed.
std::vector<int> sample_spike_train(std::span<const double> rates, std::uint64_t seed);

}  // namespace spikeforge
