#include "spikeforge/trainer.hpp"

#include <cmath>
#include <random>
#include <set>

#include "spikeforge/error.hpp"
#include "spikeforge/parallel.hpp"

namespace spikeforge {

using nlohmann::json;

void TrainConfig::validate() const {
  if (n_members < 1) throw UsageError("train config: n_members must be >= 1");
  if (max_iters < 0) throw UsageError("train config: max_iters must be >= 0");
  if (!(grad_tol > 0.0)) throw UsageError("train config: grad_tol must be positive");
  if (lbfgs_memory < 1) throw UsageError("train config: lbfgs_memory must be >= 1");
  if (!(init_scale >= 0.0)) throw UsageError("train config: init_scale must be >= 0");
  if (components < 1 || quadratic_features < 0) {
    throw UsageError("train config: need components >= 1 and quadratic_features >= 0");
  }
  if (hidden1 < 1 || hidden2 < 1) throw UsageError("train config: hidden sizes must be >= 1");
  if (!(ridge >= 0.0)) throw UsageError("train config: ridge must be >= 0");
  if (!(variance_threshold > 0.0 && variance_threshold <= 1.0)) {
    throw UsageError("train config: variance_threshold must lie in (0, 1]");
  }
  if (!(window_ms > 0.0)) throw UsageError("train config: window_ms must be positive");
}

json to_json(const TrainConfig& cfg) {
  return {{"kind", std::string(to_string(cfg.kind))},
          {"n_members", cfg.n_members},
          {"max_iters", cfg.max_iters},
          {"grad_tol", cfg.grad_tol},
          {"lbfgs_memory", cfg.lbfgs_memory},
          {"init_scale", cfg.init_scale},
          {"seed", cfg.seed},
          {"components", cfg.components},
          {"quadratic_features", cfg.quadratic_features},
          {"hidden1", cfg.hidden1},
          {"hidden2", cfg.hidden2},
          {"ridge", cfg.ridge},
          {"variance_threshold", cfg.variance_threshold},
          {"window_ms", cfg.window_ms}};
}

TrainConfig train_config_from_json(const json& doc) {
  static const std::set<std::string> known = {
      "kind",       "n_members",          "max_iters", "grad_tol", "lbfgs_memory",
      "init_scale", "seed",               "components", "quadratic_features", "hidden1",
      "hidden2",    "ridge",              "variance_threshold", "window_ms"};
  if (!doc.is_object()) throw UsageError("train config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) throw UsageError("train config: unknown key '" + key + "'");
  }
  TrainConfig cfg;
  try {
    if (doc.contains("kind")) cfg.kind = parse_model_kind(doc.at("kind").get<std::string>());
    cfg.n_members = doc.value("n_members", cfg.n_members);
    cfg.max_iters = doc.value("max_iters", cfg.max_iters);
    cfg.grad_tol = doc.value("grad_tol", cfg.grad_tol);
    cfg.lbfgs_memory = doc.value("lbfgs_memory", cfg.lbfgs_memory);
    cfg.init_scale = doc.value("init_scale", cfg.init_scale);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.components = doc.value("components", cfg.components);
    cfg.quadratic_features = doc.value("quadratic_features", cfg.quadratic_features);
    cfg.hidden1 = doc.value("hidden1", cfg.hidden1);
    cfg.hidden2 = doc.value("hidden2", cfg.hidden2);
    cfg.ridge = doc.value("ridge", cfg.ridge);
    cfg.variance_threshold = doc.value("variance_threshold", cfg.variance_threshold);
    cfg.window_ms = doc.value("window_ms", cfg.window_ms);
  } catch (const json::exception& e) {
    throw UsageError(std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ModelDims dims_for(const TrainConfig& cfg, Eigen::Index input_dim) {
  return {input_dim, cfg.components, cfg.quadratic_features, cfg.hidden1, cfg.hidden2};
}

ModelParams random_init(ModelKind kind, const ModelDims& dims, double init_scale,
                        std::uint64_t seed, double mean_count) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    // Row-major fill so the draw order matches the serialized layout.
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = init_scale * normal(rng);
    }
    return m;
  };
  const Eigen::Index d = dims.input;
  switch (kind) {
    case ModelKind::Stm: {
      StmParams p;
      p.w = gaussian(dims.components, d);
      p.u = gaussian(dims.quadratic_features, d);
      p.beta = gaussian(dims.components, dims.quadratic_features);
      p.b = Eigen::VectorXd::Constant(dims.components,
                                      std::log(mean_count / dims.components + 1e-6));
      return p;
    }
    case ModelKind::Lnp: {
      LnpParams p;
      p.w = gaussian(d, 1).col(0);
      p.b = std::log(mean_count + 1e-6);
      return p;
    }
    case ModelKind::Mlnn: {
      MlnnParams p;
      p.w1 = gaussian(dims.hidden1, d);
      p.b1 = Eigen::VectorXd::Zero(dims.hidden1);
      p.w2 = gaussian(dims.hidden2, dims.hidden1);
      p.b2 = Eigen::VectorXd::Zero(dims.hidden2);
      p.w3 = gaussian(dims.hidden2, 1).col(0);
      p.b3 = std::log(mean_count + 1e-6);
      return p;
    }
  }
  throw UsageError("random_init: unknown model kind");
}

LbfgsResult minimize(const Objective& objective, const Eigen::VectorXd& init,
                     const TrainConfig& cfg) {
  LbfgsOptions opt;
  opt.max_iters = cfg.max_iters;
  opt.grad_tol = cfg.grad_tol;
  opt.memory = cfg.lbfgs_memory;
  return minimize_lbfgs(objective, init, opt);
}

namespace {

ModelParams constant_model(ModelKind kind, const ModelDims& dims, double mean_count) {
  return random_init(kind, dims, 0.0, 0, mean_count);
}

}  // namespace

TrainResult train(const FeatureMatrix& features, std::span<const int> counts,
                  const TrainConfig& cfg, const PcaBasis& basis, int jobs) {
  cfg.validate();
  if (static_cast<std::size_t>(features.rows()) != counts.size()) {
    throw DataError("train: feature rows and counts differ in length");
  }
  if (counts.empty()) throw DataError("train: no training bins");
  double total = 0.0;
  for (int k : counts) total += k;
  if (total <= 0.0) throw DataError("train: counts are all zero");
  const double mean_count = total / static_cast<double>(counts.size());

  const ModelDims dims = dims_for(cfg, features.dims());
  const ModelParams constant = constant_model(cfg.kind, dims, mean_count);
  const Eigen::MatrixXd& x = features.values;

  TrainResult result;
  result.constant_loglik = log_likelihood_gradient(constant, x, counts).value;

  std::vector<ModelParams> members(cfg.n_members);
  result.members.resize(cfg.n_members);
  parallel_for(static_cast<std::size_t>(cfg.n_members), jobs, [&](std::size_t i) {
    MemberLog& log = result.members[i];
    log.seed = cfg.seed + i;
    const ModelParams init = random_init(cfg.kind, dims, cfg.init_scale, log.seed, mean_count);
    const Objective objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
      const ModelParams params = unflatten(init, theta);
      const LikelihoodGradient lg = log_likelihood_gradient(params, x, counts);
      grad = -flatten(lg.gradient) + cfg.ridge * theta;
      return -lg.value + 0.5 * cfg.ridge * theta.squaredNorm();
    };
    try {
      log.optimizer = minimize(objective, flatten(init), cfg);
      members[i] = unflatten(init, log.optimizer.x);
      log.train_loglik = log_likelihood_gradient(members[i], x, counts).value;
      if (log.train_loglik < result.constant_loglik) {
        members[i] = constant;
        log.train_loglik = result.constant_loglik;
        log.replaced_by_constant = true;
      }
    } catch (const NumericalError& e) {
      log.aborted = true;
      log.diagnostic = e.what();
    }
  });

  ModelEnsemble& ens = result.ensemble;
  ens.kind = cfg.kind;
  ens.pca_basis = basis;
  ens.bin_rate_hz = features.bin_rate_hz;
  ens.window_ms = features.window_ms;
  ens.train_config = to_json(cfg);
  std::string diagnostics;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (result.members[i].aborted) {
      diagnostics += " member " + std::to_string(i) + ": " + result.members[i].diagnostic + ";";
    } else {
      ens.members.push_back(std::move(members[i]));
    }
  }
  if (ens.members.empty()) throw NumericalError("train: all members aborted:" + diagnostics);
  return result;
}

}  // namespace spikeforge
