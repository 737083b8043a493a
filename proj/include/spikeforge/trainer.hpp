#pragma once

#include <cstdint>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "spikeforge/features.hpp"
#include "spikeforge/lbfgs.hpp"
#include "spikeforge/models.hpp"

namespace spikeforge {

struct TrainConfig {
  ModelKind kind = ModelKind::Stm;
  int n_members = 4;
  int max_iters = 1000;
  double grad_tol = 1e-6;
  int lbfgs_memory = 10;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
  int components = 3;          // STM K
  int quadratic_features = 2;  // STM M
  int hidden1 = 10;            // ML-NN
  int hidden2 = 5;
  double ridge = 0.0;          // 0.5 * ridge * |theta|^2 added to the objective
  double variance_threshold = 0.95;
  double window_ms = 1000.0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& doc);

struct ModelDims {
  Eigen::Index input = 0;
  int components = 3;
  int quadratic_features = 2;
  int hidden1 = 10;
  int hidden2 = 5;
};

ModelDims dims_for(const TrainConfig& cfg, Eigen::Index input_dim);

// Gaussian(0, init_scale^2) weights; offsets chosen so that with zero weights
// the model predicts `mean_count` per bin.
ModelParams random_init(ModelKind kind, const ModelDims& dims, double init_scale,
                        std::uint64_t seed, double mean_count);

// Minimizes the negative average log-likelihood (plus optional ridge).
LbfgsResult minimize(const Objective& objective, const Eigen::VectorXd& init,
                     const TrainConfig& cfg);

struct MemberLog {
  std::uint64_t seed = 0;
  LbfgsResult optimizer;
  double train_loglik = 0.0;
  // Set when the optimizer ended below the constant-rate model and the member
  // was replaced by it.
  bool replaced_by_constant = false;
  bool aborted = false;
  std::string diagnostic;
};

struct TrainResult {
  ModelEnsemble ensemble;
  std::vector<MemberLog> members;
  double constant_loglik = 0.0;
};

// Trains cfg.n_members members from seeds cfg.seed + i and assembles the
// ensemble with `basis` attached. Members run on up to `jobs` threads;
// the result does not depend on `jobs`.
TrainResult train(const FeatureMatrix& features, std::span<const int> counts,
                  const TrainConfig& cfg, const PcaBasis& basis, int jobs = 1);

}  // namespace spikeforge
